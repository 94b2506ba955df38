"""
Exploitability models.

An exploitability model decides, at a halting point, whether a faulted run
counts as a successful attack. Models are bound to an emulator once (to
resolve symbols and check their parameters) and are pure afterwards: the
verdict depends only on the machine state and the halting point reached.
"""
import logging

from faultscope.crypto import BLOCK_SIZE, AesReference
from faultscope.emulator import HALTING_POINT
from faultscope.exceptions import ConfigError, MemoryAccessError
from faultscope.utils import to_int


logger = logging.getLogger(__name__)


def _parse_bytes(value, key):
    if isinstance(value, (bytes, bytearray)):
        return bytes(value)
    try:
        return bytes.fromhex(value.replace(' ', ''))
    except (AttributeError, TypeError, ValueError):
        raise ConfigError('Invalid value for `%s` in oracle config.' % key)


class ExploitabilityModel:
    "Base class for verdict functions"
    name = None

    def __repr__(self):
        return '%s<%s>' % (type(self).__name__, self.describe())

    def describe(self):
        return self.name

    def bind(self, emu):
        """
        Resolves symbols against ``emu`` and validates parameters. Called
        once with the prepared campaign state.
        """
        pass

    def prepare(self, emu, halting_points, timeout):
        "Hook for models that derive reference data from a fault-free run"
        pass

    def halting_points(self):
        "Addresses this model needs as halting points"
        return ()

    def is_exploitable(self, emu, halting_point):
        raise NotImplementedError

    def to_dict(self):
        return {'name': self.name}


class AddressReached(ExploitabilityModel):
    """
    Exploitable iff the run stops at ``target``, for example the entry of
    ``execute_firmware`` in a bootloader.
    """
    name = 'address-reached'

    def __init__(self, target):
        self.target = target
        self.address = target if isinstance(target, int) else None

    def describe(self):
        return '%s %s' % (self.name, self.target)

    def bind(self, emu):
        address = emu.resolve(self.target)
        if address not in emu.memory.flash:
            raise ConfigError('Target 0x%08x of `%s` is outside flash'
                              % (address, self.name))
        self.address = address

    def halting_points(self):
        return (self.address,)

    def is_exploitable(self, emu, halting_point):
        return halting_point == self.address

    def to_dict(self):
        return {'name': self.name, 'target': self.target}


class _RamRegionModel(ExploitabilityModel):
    "Shared handling of a RAM output region and an optional done point"

    def __init__(self, address, length, done=None):
        self.location = address
        self.address = address if isinstance(address, int) else None
        self.length = length
        self.done = done
        self.done_address = done if isinstance(done, int) else None

    def bind(self, emu):
        address = emu.resolve(self.location)
        if self.length <= 0 or not emu.memory.ram.contains(address,
                                                            self.length):
            raise ConfigError('Output region 0x%08x+%d of `%s` is outside '
                              'RAM' % (address, self.length, self.name))
        self.address = address
        if self.done is not None:
            self.done_address = emu.resolve(self.done)

    def halting_points(self):
        if self.done_address is None:
            return ()
        return (self.done_address,)

    def observed(self, emu, halting_point):
        "The region contents, or None when this halting point is not judged"
        if self.done_address is not None and \
                halting_point != self.done_address:
            return None
        try:
            return emu.read_memory(self.address, self.length)
        except MemoryAccessError:
            return None


class OutputMismatch(_RamRegionModel):
    """
    Exploitable iff the ``length`` bytes at ``address`` differ from
    ``expected`` when the run reaches ``done`` (or any halting point when
    ``done`` is not given).

    With ``expected=None`` the reference output is taken from a fault-free
    run in :py:meth:`prepare`.
    """
    name = 'output-mismatch'

    def __init__(self, address, length, expected=None, done=None):
        super().__init__(address, length, done)
        self.expected = bytes(expected) if expected is not None else None
        if self.expected is not None and len(self.expected) != length:
            raise ConfigError('Expected output of `%s` must be %d bytes'
                              % (self.name, length))

    def describe(self):
        return '%s %s+%d' % (self.name, self.location, self.length)

    def prepare(self, emu, halting_points, timeout):
        "Captures the expected output from a fault-free run of ``emu``"
        if self.expected is not None:
            return
        clone = emu.clone()
        outcome = clone.run_until(halting_points, timeout)
        expected = self.observed(clone, outcome.address) \
            if outcome.kind == HALTING_POINT else None
        if expected is None:
            raise ConfigError('Fault-free run did not reach the done point '
                              'of `%s` (%s)' % (self.name, outcome.kind))
        self.expected = expected

    def is_exploitable(self, emu, halting_point):
        observed = self.observed(emu, halting_point)
        return observed is not None and observed != self.expected

    def to_dict(self):
        return {'name': self.name, 'address': self.location,
                'length': self.length, 'done': self.done,
                'expected': self.expected.hex()
                if self.expected is not None else None}


class DfaAes(_RamRegionModel):
    """
    Single-byte differential fault analysis on AES-128.

    The ciphertext found at ``address`` is decrypted backwards round by
    round with the known key. The fault is exploitable iff one of the
    states entering rounds 8, 9 or 10 differs from the fault-free state in
    exactly one byte, which covers everything from the end of round 7's
    MixColumns up to the final SubBytes.
    """
    name = 'dfa-aes'
    WINDOW = (8, 9, 10)

    def __init__(self, reference, plaintext, address, done=None,
                 window=WINDOW):
        super().__init__(address, BLOCK_SIZE, done)
        if not isinstance(reference, AesReference):
            reference = AesReference(reference)
        self.reference = reference
        self.plaintext = bytes(plaintext)
        self.window = tuple(window)
        self.expected_states = reference.round_inputs(self.plaintext)

    def describe(self):
        return '%s %s rounds %s' % (self.name, self.location,
                                    ','.join(map(str, self.window)))

    def faulty_rounds(self, ciphertext):
        """
        Rounds of the window whose backward-computed input state differs
        from the reference in exactly one byte.
        """
        states = self.reference.backward_round_inputs(ciphertext)
        rounds = []
        for r in self.window:
            differing = sum(1 for a, b in zip(states[r],
                                              self.expected_states[r])
                            if a != b)
            if differing == 1:
                rounds.append(r)
        return rounds

    def is_exploitable(self, emu, halting_point):
        ciphertext = self.observed(emu, halting_point)
        if ciphertext is None:
            return False
        return bool(self.faulty_rounds(ciphertext))

    def to_dict(self):
        return {'name': self.name, 'key': self.reference.key.hex(),
                'plaintext': self.plaintext.hex(), 'address': self.location,
                'done': self.done, 'window': list(self.window)}


def address_reached_model(target):
    return AddressReached(target)


def output_mismatch_model(address, length, expected=None, done=None):
    return OutputMismatch(address, length, expected, done)


def dfa_aes_model(reference, plaintext, address, done=None):
    return DfaAes(reference, plaintext, address, done)


def _address(value, key):
    if isinstance(value, str) and not value.lower().startswith(('0x', '0b')) \
            and not value.isdigit():
        return value
    try:
        return to_int(value)
    except (TypeError, ValueError):
        raise ConfigError('Invalid value for `%s` in oracle config.' % key)


def _length(value, key):
    try:
        return to_int(value)
    except (TypeError, ValueError):
        raise ConfigError('Invalid value for `%s` in oracle config.' % key)


def _address_reached_from_dict(data):
    return AddressReached(_address(data['target'], 'target'))


def _output_mismatch_from_dict(data):
    expected = data.get('expected')
    if expected is not None:
        expected = _parse_bytes(expected, 'expected')
    done = data.get('done')
    return OutputMismatch(_address(data['address'], 'address'),
                          _length(data['length'], 'length'), expected,
                          _address(done, 'done') if done is not None else None)


def _dfa_aes_from_dict(data):
    done = data.get('done')
    return DfaAes(_parse_bytes(data['key'], 'key'),
                  _parse_bytes(data['plaintext'], 'plaintext'),
                  _address(data['address'], 'address'),
                  _address(done, 'done') if done is not None else None,
                  window=data.get('window') or DfaAes.WINDOW)


ORACLES = {
    AddressReached.name: _address_reached_from_dict,
    OutputMismatch.name: _output_mismatch_from_dict,
    DfaAes.name: _dfa_aes_from_dict,
}


def oracle_from_dict(data):
    """
    Builds a built-in model from ``{"name": ..., <parameters>}``. Custom
    models are plain :py:class:`ExploitabilityModel` subclasses passed to
    the campaign directly.
    """
    if isinstance(data, ExploitabilityModel):
        return data
    if isinstance(data, str):
        data = {'name': data}
    if not isinstance(data, dict) or data.get('name') not in ORACLES:
        raise ConfigError('Unknown oracle %r; choose one of %s'
                          % (data.get('name') if isinstance(data, dict)
                             else data, ', '.join(sorted(ORACLES))))
    try:
        return ORACLES[data['name']](data)
    except KeyError as e:
        raise ConfigError('Oracle `%s` is missing `%s`'
                          % (data['name'], e.args[0]))
