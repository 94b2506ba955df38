"""
Undefined-behavior profiles.

A profile maps an ``(instruction class, condition)`` pair to the action the
executor takes when an instruction hits that condition. The built-in
``xmc1100`` and ``stm32f407`` profiles carry the behavior measured on those
chips; ``default`` aborts on every condition.
"""
import json
import logging
import os

from faultscope.decoder import V6M, V7M
from faultscope.exceptions import ProfileError


logger = logging.getLogger(__name__)


# abort with an UndefinedBehavior classification
ABORT = 'abort'
HARD_FAULT = 'hard-fault'
MEMORY_ERROR = 'memory-error'
NOP = 'nop'
# the obvious architectural reading (compare, branch, unaligned access...)
EXECUTE = 'execute'
# substitute semantics
LDR_LR_SP = 'ldr-lr-sp'
STR_LR_SP = 'str-lr-sp'
LDR_LR_RN = 'ldr-lr-rn'
STR_LR_RN_POSTINC = 'str-lr-rn-postinc'
STORE_CURRENT_RN = 'store-current-rn'
BRANCH_TO_PC = 'branch-to-pc'
CLEAR_T_BIT = 'clear-t-bit'

ACTIONS = (ABORT, HARD_FAULT, MEMORY_ERROR, NOP, EXECUTE, LDR_LR_SP,
           STR_LR_SP, LDR_LR_RN, STR_LR_RN_POSTINC, STORE_CURRENT_RN,
           BRANCH_TO_PC, CLEAR_T_BIT)

# every condition the executor can raise, with the actions it understands
CONDITIONS = {
    ('add', 'pc-pc'): (ABORT, HARD_FAULT, EXECUTE, NOP),
    ('cmp', 'low-registers'): (ABORT, HARD_FAULT, EXECUTE, NOP),
    ('bx', 'pc'): (ABORT, HARD_FAULT, BRANCH_TO_PC, EXECUTE, NOP),
    ('blx', 'pc'): (ABORT, HARD_FAULT, BRANCH_TO_PC, EXECUTE, NOP),
    ('bx', 'sbz-bits'): (ABORT, HARD_FAULT, CLEAR_T_BIT, EXECUTE, NOP),
    ('blx', 'sbz-bits'): (ABORT, HARD_FAULT, CLEAR_T_BIT, EXECUTE, NOP),
    ('pop', 'empty-list'): (ABORT, HARD_FAULT, LDR_LR_SP, NOP),
    ('push', 'empty-list'): (ABORT, HARD_FAULT, STR_LR_SP, NOP),
    ('ldm', 'empty-list'): (ABORT, HARD_FAULT, LDR_LR_RN, NOP),
    ('stm', 'empty-list'): (ABORT, HARD_FAULT, STR_LR_RN_POSTINC, NOP),
    ('stm', 'base-not-lowest'): (ABORT, HARD_FAULT, STORE_CURRENT_RN),
    ('branch', 't-bit-clear'): (HARD_FAULT, ABORT),
    ('memory', 'unaligned'): (MEMORY_ERROR, HARD_FAULT, EXECUTE, ABORT),
}

DEFAULT_ENTRIES = dict((key, ABORT) for key in CONDITIONS)
DEFAULT_ENTRIES[('branch', 't-bit-clear')] = HARD_FAULT
DEFAULT_ENTRIES[('memory', 'unaligned')] = MEMORY_ERROR


class UbProfile:
    """
    A named table of undefined-behavior actions.

    Conditions missing from ``entries`` fall back to the default profile.
    ``arch`` is the architecture level the chip implements and is only a
    default; callers may run any profile on any level.
    """

    def __init__(self, name, entries=None, arch=V6M, description=None):
        self.name = name
        self.arch = arch
        self.description = description
        self.entries = dict(DEFAULT_ENTRIES)
        for key, action in (entries or {}).items():
            self.set_action(key[0], key[1], action)

    def __repr__(self):
        return '%s<%s>' % (type(self).__name__, self.name)

    def __eq__(self, other):
        return (isinstance(other, UbProfile) and self.name == other.name
                and self.entries == other.entries)

    def __hash__(self):
        return hash(self.name)

    def set_action(self, instruction_class, condition, action):
        key = (instruction_class, condition)
        if key not in CONDITIONS:
            raise ProfileError('Unknown undefined-behavior condition %s/%s'
                               % key)
        if action not in CONDITIONS[key]:
            raise ProfileError('Action `%s` is not valid for %s/%s'
                               % ((action,) + key))
        self.entries[key] = action

    def action(self, instruction_class, condition):
        return self.entries[(instruction_class, condition)]

    def to_dict(self):
        return {
            'name': self.name,
            'arch': self.arch,
            'description': self.description,
            'entries': [
                {'class': key[0], 'condition': key[1], 'action': action}
                for key, action in sorted(self.entries.items())
            ],
        }

    @classmethod
    def from_dict(cls, data):
        try:
            entries = dict(((e['class'], e['condition']), e['action'])
                           for e in data.get('entries', ()))
            name = data['name']
        except (KeyError, TypeError, AttributeError):
            raise ProfileError('Malformed profile document')
        arch = data.get('arch') or V6M
        if arch not in (V6M, V7M):
            raise ProfileError('Invalid value for `arch` in profile %s'
                               % name)
        return cls(name, entries, arch=arch,
                   description=data.get('description'))

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fp:
                data = json.load(fp)
        except (OSError, ValueError) as e:
            raise ProfileError('Cannot read profile %s: %s' % (path, e))
        profile = cls.from_dict(data)
        logger.debug('loaded profile %s from %s', profile.name, path)
        return profile


DEFAULT = UbProfile('default', description='abort on every condition')

XMC1100 = UbProfile('xmc1100', arch=V6M, description='Infineon XMC1100',
                    entries={
    ('add', 'pc-pc'): HARD_FAULT,
    ('cmp', 'low-registers'): EXECUTE,
    ('bx', 'pc'): BRANCH_TO_PC,
    ('blx', 'pc'): BRANCH_TO_PC,
    ('bx', 'sbz-bits'): CLEAR_T_BIT,
    ('blx', 'sbz-bits'): CLEAR_T_BIT,
    ('pop', 'empty-list'): LDR_LR_SP,
    ('push', 'empty-list'): STR_LR_SP,
    ('ldm', 'empty-list'): LDR_LR_RN,
    ('stm', 'empty-list'): STR_LR_RN_POSTINC,
    ('stm', 'base-not-lowest'): STORE_CURRENT_RN,
    ('memory', 'unaligned'): HARD_FAULT,
})

STM32F407 = UbProfile('stm32f407', arch=V7M, description='ST STM32F407',
                      entries={
    ('add', 'pc-pc'): HARD_FAULT,
    ('cmp', 'low-registers'): EXECUTE,
    ('bx', 'pc'): HARD_FAULT,
    ('blx', 'pc'): HARD_FAULT,
    ('bx', 'sbz-bits'): EXECUTE,
    ('blx', 'sbz-bits'): EXECUTE,
    ('pop', 'empty-list'): NOP,
    ('push', 'empty-list'): NOP,
    ('ldm', 'empty-list'): NOP,
    ('stm', 'empty-list'): NOP,
    ('stm', 'base-not-lowest'): STORE_CURRENT_RN,
    ('memory', 'unaligned'): EXECUTE,
})

BUILTIN_PROFILES = {
    'default': DEFAULT,
    'xmc1100': XMC1100,
    'stm32f407': STM32F407,
}


def get_profile(name_or_path):
    """
    Returns a built-in profile by name, or loads a JSON profile file.
    ``None`` selects the default profile.
    """
    if name_or_path is None:
        return DEFAULT
    if isinstance(name_or_path, UbProfile):
        return name_or_path
    profile = BUILTIN_PROFILES.get(name_or_path.lower())
    if profile is not None:
        return profile
    if os.path.exists(name_or_path):
        return UbProfile.from_file(name_or_path)
    raise ProfileError('Unknown profile `%s`; built-in profiles are %s'
                       % (name_or_path, ', '.join(sorted(BUILTIN_PROFILES))))
