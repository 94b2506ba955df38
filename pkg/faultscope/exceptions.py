"Core exceptions raised by faultscope"


class FaultscopeError(Exception):
    pass


class EmulatorError(FaultscopeError):
    """
    Base class for everything that terminates an emulated run.

    ``address`` is the address of the instruction being executed and
    ``encoding`` its raw halfwords, when known.
    """
    classification = 'EmulatorError'

    def __init__(self, message='', address=None, encoding=None):
        super().__init__(message)
        self.address = address
        self.encoding = encoding

    def __str__(self):
        message = super().__str__()
        if self.address is None:
            return message
        return '%s (at 0x%08x)' % (message, self.address)


class DecodeError(EmulatorError):
    classification = 'DecodeError'


class UndefinedInstruction(DecodeError):
    classification = 'Undefined'


class UndefinedBehavior(UndefinedInstruction):
    "The active profile aborts on an undefined-behavior condition"

    def __init__(self, message='', address=None, encoding=None,
                 condition=None):
        super().__init__(message, address, encoding)
        self.condition = condition


class UnpredictableInstruction(DecodeError):
    classification = 'Unpredictable'


class NotInConfiguredArch(DecodeError):
    classification = 'NotInConfiguredArch'


class MemoryAccessError(EmulatorError):
    classification = 'MemoryError'


class UnalignedAccessError(MemoryAccessError):
    pass


class HardFault(EmulatorError):
    classification = 'HardFault'


class UnsupportedExceptionEntry(HardFault):
    "Exception entry (SVC and friends) is not modeled; the run ends here"
    pass


class Halted(EmulatorError):
    "The core stopped on a breakpoint"
    classification = 'Halted'


class SnapshotError(FaultscopeError):
    "A snapshot that is no longer tracked cannot be restored"
    pass


class ConfigError(FaultscopeError, ValueError):
    pass


class ImageError(ConfigError):
    pass


class ProfileError(ConfigError):
    pass


class ModelError(ConfigError):
    pass


class FaultError(FaultscopeError):
    pass


class FaultTimeError(FaultError):
    "Error installing a fault whose injection time has already passed"
    pass


class MalformedCombinationError(FaultError, ValueError):
    pass


class AssemblerError(FaultscopeError, ValueError):
    pass


class BranchOutOfRangeError(AssemblerError):
    pass


class UnknownMnemonicError(AssemblerError):
    pass


class ReportError(FaultscopeError, ValueError):
    pass
