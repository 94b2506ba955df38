"""
Fault models, injection points and fault installation.

A :py:class:`FaultModelSpec` describes a family of faults. Over a dry-run
trace it expands into :py:class:`ConcreteFault` objects, one per injection
point, and :py:func:`install` applies one of them to a running emulator
through its hooks.
"""
import json
import logging
import os

from faultscope.decoder import (
    LR,
    REGISTER_NAMES,
    XPSR,
    DecodedInstruction,
    is_wide,
)
from faultscope.exceptions import FaultTimeError, ModelError
from faultscope.utils import MASK32, to_int


logger = logging.getLogger(__name__)


INSTRUCTION = 'instruction'
REGISTER = 'register'
TARGETS = (INSTRUCTION, REGISTER)

PERMANENT = 'permanent'
UNTIL_OVERWRITE = 'until-overwrite'
TRANSIENT = 'transient'
LIFETIMES = (PERMANENT, UNTIL_OVERWRITE, TRANSIENT)

SKIP = 'skip'
BYTE_SET = 'byte-set'
BYTE_CLEAR = 'byte-clear'
BIT_FLIP = 'bit-flip'
BIT_SET = 'bit-set'
BIT_CLEAR = 'bit-clear'
CLEAR = 'clear'
FILL = 'fill'
EFFECTS = (SKIP, BYTE_SET, BYTE_CLEAR, BIT_FLIP, BIT_SET, BIT_CLEAR, CLEAR,
           FILL)

INSTRUCTION_EFFECTS = (SKIP, BYTE_SET, BYTE_CLEAR, BIT_FLIP)
REGISTER_EFFECTS = (CLEAR, FILL, BYTE_SET, BYTE_CLEAR, BIT_FLIP, BIT_SET,
                    BIT_CLEAR)
BYTE_EFFECTS = (BYTE_SET, BYTE_CLEAR)
BIT_EFFECTS = (BIT_FLIP, BIT_SET, BIT_CLEAR)

# R0-R12, LR and xPSR
DEFAULT_REGISTERS = tuple(range(13)) + (LR, XPSR)

NOP_HALFWORD = 0xBF00

# fault handle phases
WAITING = 'waiting'
ACTIVE = 'active'
DONE = 'done'


def _standard_models():
    models = []
    number = 1
    for lifetime in (PERMANENT, TRANSIENT):
        for effect in (SKIP, BYTE_SET, BYTE_CLEAR, BIT_FLIP):
            models.append({'id': number, 'target': INSTRUCTION,
                           'lifetime': lifetime, 'effect': effect})
            number += 1
    for effect in (CLEAR, FILL, BYTE_SET, BYTE_CLEAR, BIT_SET, BIT_CLEAR):
        models.append({'id': number, 'target': REGISTER,
                       'lifetime': PERMANENT, 'effect': effect})
        number += 1
    for lifetime in (UNTIL_OVERWRITE, TRANSIENT):
        for effect in (CLEAR, FILL, BYTE_SET, BYTE_CLEAR, BIT_FLIP):
            models.append({'id': number, 'target': REGISTER,
                           'lifetime': lifetime, 'effect': effect})
            number += 1
    return models


STANDARD_MODELS = _standard_models()

PRESETS = {
    'standard': STANDARD_MODELS,
    'instruction': STANDARD_MODELS[:8],
    'register': STANDARD_MODELS[8:],
    'skip': [STANDARD_MODELS[4]],
}


def register_id(value):
    "Accepts a register id, a name such as ``r3``/``lr``/``xpsr``"
    if isinstance(value, int) and not isinstance(value, bool):
        if 0 <= value <= XPSR:
            return value
    elif isinstance(value, str):
        name = value.strip().lower()
        if name in REGISTER_NAMES:
            return REGISTER_NAMES.index(name)
        aliases = {'r13': 13, 'r14': 14, 'r15': 15, 'psr': XPSR}
        if name in aliases:
            return aliases[name]
    raise ModelError('Unknown register %r' % (value,))


def apply_effect(effect, value, width, sub_index):
    """
    Applies ``effect`` to a ``width``-bit value. Bit ``b`` of an instruction
    is bit ``b % 8`` of its ``b // 8``-th byte in memory, so instruction
    values are little-endian integers of their raw bytes.
    """
    mask = (1 << width) - 1
    if effect == CLEAR:
        return 0
    if effect == FILL:
        return mask
    if effect in BYTE_EFFECTS:
        if sub_index is None or sub_index * 8 >= width:
            return value
        byte = 0xFF << (8 * sub_index)
        if effect == BYTE_SET:
            return value | byte
        return value & ~byte & mask
    if effect in BIT_EFFECTS:
        if sub_index is None or sub_index >= width:
            return value
        bit = 1 << sub_index
        if effect == BIT_FLIP:
            return value ^ bit
        if effect == BIT_SET:
            return value | bit
        return value & ~bit & mask
    raise ModelError('Effect `%s` cannot be applied to a value' % effect)


def halfwords_to_int(halfwords):
    value = 0
    for index, halfword in enumerate(halfwords):
        value |= (halfword & 0xFFFF) << (16 * index)
    return value


def int_to_halfwords(value, count):
    return tuple((value >> (16 * index)) & 0xFFFF for index in range(count))


class InstructionFilter:
    """
    Selects executed instructions by address and/or mnemonic. An empty
    filter selects everything.
    """

    def __init__(self, addresses=None, mnemonics=None):
        self.addresses = frozenset(addresses) if addresses else None
        self.mnemonics = frozenset(m.lower() for m in mnemonics) \
            if mnemonics else None

    def __call__(self, entry):
        if self.addresses is not None and entry.address not in self.addresses:
            return False
        if self.mnemonics is not None and \
                entry.mnemonic not in self.mnemonics:
            return False
        return True

    def to_dict(self):
        data = {}
        if self.addresses is not None:
            data['addresses'] = sorted(self.addresses)
        if self.mnemonics is not None:
            data['mnemonics'] = sorted(self.mnemonics)
        return data


class FaultModelSpec:
    """
    One fault model.

    ``target`` is ``instruction`` or ``register``; ``lifetime`` one of
    ``permanent``, ``until-overwrite`` (registers only) or ``transient``;
    ``effect`` one of ``skip`` (instructions only), ``byte-set``,
    ``byte-clear``, ``bit-flip``, ``bit-set``, ``bit-clear``, ``clear`` or
    ``fill`` (the last four registers only).

    Filters: ``registers`` is the register allowlist for register models,
    ``excluded_ranges`` a list of ``(start, end)`` half-open address ranges
    and ``instructions`` an :py:class:`InstructionFilter` or any callable
    taking a dry-run trace entry.
    """

    def __init__(self, id, target, lifetime, effect, registers=None,
                 excluded_ranges=(), instructions=None, name=None):
        if target not in TARGETS:
            raise ModelError('Invalid target `%s` for model %s'
                             % (target, id))
        if lifetime not in LIFETIMES:
            raise ModelError('Invalid lifetime `%s` for model %s'
                             % (lifetime, id))
        if effect not in EFFECTS:
            raise ModelError('Invalid effect `%s` for model %s'
                             % (effect, id))
        if target == INSTRUCTION:
            if effect not in INSTRUCTION_EFFECTS:
                raise ModelError('Effect `%s` only applies to registers '
                                 '(model %s)' % (effect, id))
            if lifetime == UNTIL_OVERWRITE:
                raise ModelError('Until-overwrite only applies to registers '
                                 '(model %s)' % id)
        elif effect not in REGISTER_EFFECTS:
            raise ModelError('Effect `%s` only applies to instructions '
                             '(model %s)' % (effect, id))
        self.id = id
        self.target = target
        self.lifetime = lifetime
        self.effect = effect
        self.name = name or '%s %s %s' % (lifetime, target, effect)
        if registers is None:
            registers = DEFAULT_REGISTERS
        self.registers = tuple(sorted(set(register_id(r) for r in registers)))
        self.excluded_ranges = tuple(
            (to_int(start), to_int(end)) for start, end in excluded_ranges)
        self.instructions = instructions

    def __repr__(self):
        return '%s<%s: %s>' % (type(self).__name__, self.id, self.name)

    def __eq__(self, other):
        return isinstance(other, FaultModelSpec) and \
            self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def _key(self):
        selector = self.instructions
        if isinstance(selector, InstructionFilter):
            selector = repr(sorted(selector.to_dict().items()))
        return (str(self.id), self.target, self.lifetime, self.effect,
                self.registers, self.excluded_ranges, selector)

    @property
    def permanent(self):
        return self.lifetime == PERMANENT

    def accepts(self, entry):
        "True when the executed instruction ``entry`` passes the filters"
        address = entry.address
        for start, end in self.excluded_ranges:
            if start <= address < end:
                return False
        if self.instructions is not None and not self.instructions(entry):
            return False
        return True

    def sub_indices(self, width):
        "The sub-positions one target of ``width`` bits offers"
        if self.effect in BIT_EFFECTS:
            return range(width)
        if self.effect in BYTE_EFFECTS:
            return range(width // 8)
        return (None,)

    def with_excluded_ranges(self, ranges):
        "A copy whose exclusions also cover ``ranges``"
        return FaultModelSpec(
            self.id, self.target, self.lifetime, self.effect,
            registers=self.registers,
            excluded_ranges=self.excluded_ranges + tuple(ranges),
            instructions=self.instructions, name=self.name)

    def to_dict(self):
        data = {
            'id': self.id,
            'name': self.name,
            'target': self.target,
            'lifetime': self.lifetime,
            'effect': self.effect,
        }
        if self.target == REGISTER:
            data['registers'] = [REGISTER_NAMES[r] for r in self.registers]
        if self.excluded_ranges:
            data['excluded_ranges'] = [list(r) for r in self.excluded_ranges]
        if isinstance(self.instructions, InstructionFilter):
            data['instructions'] = self.instructions.to_dict()
        return data

    @classmethod
    def from_dict(cls, data, resolve=to_int):
        """
        Builds a model from its JSON form. ``resolve`` turns addresses
        (which may be symbol names) into integers.
        """
        if not isinstance(data, dict):
            raise ModelError('A fault model must be an object, got %r'
                             % (data,))
        try:
            model_id = data['id']
            target = data['target']
            lifetime = data['lifetime']
            effect = data['effect']
        except KeyError as e:
            raise ModelError('Fault model is missing `%s`' % e.args[0])
        try:
            excluded = []
            for item in data.get('excluded_ranges') or ():
                if isinstance(item, dict):
                    item = (item['start'], item['end'])
                start, end = item
                excluded.append((resolve(start), resolve(end)))
            instructions = None
            selector = data.get('instructions')
            if selector:
                instructions = InstructionFilter(
                    [resolve(a) for a in selector.get('addresses') or ()],
                    selector.get('mnemonics'))
        except (KeyError, TypeError, ValueError) as e:
            raise ModelError('Invalid filter in fault model %s: %s'
                             % (model_id, e))
        return cls(model_id, target, lifetime, effect,
                   registers=data.get('registers'),
                   excluded_ranges=excluded, instructions=instructions,
                   name=data.get('name'))


def load_models(value, resolve=to_int):
    """
    Returns a list of :py:class:`FaultModelSpec` from a preset name, a list
    of model dicts (or specs), or the path of a JSON file holding either a
    list or ``{"models": [...]}``.
    """
    if isinstance(value, str):
        if value in PRESETS:
            return [FaultModelSpec.from_dict(d) for d in PRESETS[value]]
        if not os.path.exists(value):
            raise ModelError('Unknown model preset `%s`; presets are %s'
                             % (value, ', '.join(sorted(PRESETS))))
        try:
            with open(value) as fp:
                value = json.load(fp)
        except (OSError, ValueError) as e:
            raise ModelError('Cannot read fault models: %s' % e)
        if isinstance(value, dict):
            value = value.get('models')
    if not isinstance(value, (list, tuple)) or not value:
        raise ModelError('Fault models must be a non-empty list')
    models = [item if isinstance(item, FaultModelSpec)
              else FaultModelSpec.from_dict(item, resolve) for item in value]
    known = {}
    for model in models:
        if known.setdefault(str(model.id), model) != model:
            raise ModelError('Fault model id %s names two different models'
                             % model.id)
    return models


class InjectionPoint:
    """
    Where and when a fault model applies: the instruction index ``time``,
    the target (an instruction address or a register id) and the bit or
    byte ``sub_index`` (``None`` for skip, clear and fill).
    """

    def __init__(self, time, target_kind, target, sub_index, model_id):
        self.time = time
        self.target_kind = target_kind
        self.target = target
        self.sub_index = sub_index
        self.model_id = model_id

    def sort_key(self):
        return (self.time, 0 if self.target_kind == INSTRUCTION else 1,
                self.target, -1 if self.sub_index is None else self.sub_index,
                str(self.model_id))

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def describe_target(self):
        if self.target_kind == INSTRUCTION:
            return 'instruction@0x%08x' % self.target
        return REGISTER_NAMES[self.target]


class ConcreteFault(InjectionPoint):
    """
    A materialized injection point with everything needed to replay it:
    the lifetime and effect of its model, the target width and, for
    instruction faults, the original encoding. ``address`` is the address of
    the instruction executing at ``time``, or for permanent faults the
    instruction that first used the target.
    """

    def __init__(self, time, target_kind, target, sub_index, model_id,
                 lifetime, effect, width, address, original=None):
        super().__init__(time, target_kind, target, sub_index, model_id)
        self.lifetime = lifetime
        self.effect = effect
        self.width = width
        self.address = address
        self.original = tuple(original) if original is not None else None

    def __repr__(self):
        return '%s<%s>' % (type(self).__name__, self.describe())

    def _key(self):
        # permanent faults act from the start, their time is not part of them
        time = None if self.permanent else self.time
        return (time, self.target_kind, self.target, self.sub_index,
                str(self.model_id), self.lifetime, self.effect)

    def __eq__(self, other):
        return isinstance(other, ConcreteFault) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @property
    def permanent(self):
        return self.lifetime == PERMANENT

    def faulted_encoding(self, halfwords=None):
        "The encoding after the fault, applied to ``halfwords`` if given"
        halfwords = self.original if halfwords is None else tuple(halfwords)
        if halfwords is None:
            return None
        if self.effect == SKIP:
            return (NOP_HALFWORD,) * len(halfwords)
        width = 16 * len(halfwords)
        value = apply_effect(self.effect, halfwords_to_int(halfwords), width,
                             self.sub_index)
        return int_to_halfwords(value, len(halfwords))

    def apply_to_value(self, value):
        return apply_effect(self.effect, value, 32, self.sub_index) & MASK32

    def describe(self):
        position = ''
        if self.sub_index is not None:
            unit = 'byte' if self.effect in BYTE_EFFECTS else 'bit'
            position = ' %s %d' % (unit, self.sub_index)
        return 't=%d %s%s %s %s (model %s)' % (
            self.time, self.describe_target(), position, self.lifetime,
            self.effect, self.model_id)

    def to_dict(self):
        data = {
            'model': self.model_id,
            'time': self.time,
            'target': self.target_kind,
            'address': self.address,
            'register': None,
            'sub_index': self.sub_index,
            'lifetime': self.lifetime,
            'effect': self.effect,
            'width': self.width,
            'original': None,
            'faulted': None,
        }
        if self.target_kind == REGISTER:
            data['register'] = REGISTER_NAMES[self.target]
        else:
            data['original'] = list(self.original)
            data['faulted'] = list(self.faulted_encoding())
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            kind = data['target']
            if kind == REGISTER:
                target = register_id(data['register'])
                original = None
            elif kind == INSTRUCTION:
                target = data['address']
                original = data['original']
            else:
                raise ModelError('Invalid fault target %r' % (kind,))
            return cls(data['time'], kind, target, data['sub_index'],
                       data['model'], data['lifetime'], data['effect'],
                       data['width'], data['address'], original)
        except (KeyError, TypeError) as e:
            raise ModelError('Malformed fault record: %s' % e)


def enumerate_injection_points(model, trace, start=None):
    """
    Expands ``model`` over the executed instructions of a dry-run ``trace``
    into an ordered list of :py:class:`ConcreteFault`.

    Instruction models get one point per executed instruction and
    sub-position; register models one point per use (read or write) of each
    allow-listed register and sub-position. Permanent models get one point
    per address or register, injected at ``start`` (by default the time of
    the first traced instruction).
    """
    points = []
    seen = set()
    permanent = model.permanent
    subs_cache = {}
    for entry in trace:
        if start is None:
            start = entry.time
        if not model.accepts(entry):
            continue
        time = start if permanent else entry.time
        if model.target == INSTRUCTION:
            if permanent:
                if entry.address in seen:
                    continue
                seen.add(entry.address)
            width = entry.width
            subs = subs_cache.get(width)
            if subs is None:
                subs = subs_cache[width] = tuple(model.sub_indices(width))
            for sub in subs:
                points.append(ConcreteFault(
                    time, INSTRUCTION, entry.address, sub, model.id,
                    model.lifetime, model.effect, width, entry.address,
                    entry.encoding))
            continue
        subs = subs_cache.get(32)
        if subs is None:
            subs = subs_cache[32] = tuple(model.sub_indices(32))
        for reg in entry.registers_used():
            if reg not in model.registers:
                continue
            if permanent:
                if reg in seen:
                    continue
                seen.add(reg)
            for sub in subs:
                points.append(ConcreteFault(
                    time, REGISTER, reg, sub, model.id,
                    model.lifetime, model.effect, 32, entry.address))
    points.sort(key=InjectionPoint.sort_key)
    return points


class FaultEvent:
    "Something a fault did to the machine at instruction index ``time``"

    def __init__(self, time, fault, action, before=None, after=None):
        self.time = time
        self.fault = fault
        self.action = action
        self.before = before
        self.after = after

    def __repr__(self):
        return '%s<t=%d %s %s>' % (type(self).__name__, self.time,
                                   self.action, self.fault.describe())

    def to_dict(self):
        data = {'time': self.time, 'action': self.action,
                'fault': self.fault.to_dict()}
        if self.before is not None:
            data['before'] = _jsonable(self.before)
            data['after'] = _jsonable(self.after)
        return data


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    return value


class FaultHandle:
    """
    An installed fault. The handle follows the fault through its phases
    (waiting for its time, active, done) and keeps only the hooks the
    current phase needs. ``events`` lists what the fault did.
    """

    def __init__(self, fault):
        self.fault = fault
        self.emu = None
        self.phase = WAITING
        self.events = []
        self._hooks = []
        self._hook_phase = None

    def __repr__(self):
        return '%s<%s %s>' % (type(self).__name__, self.phase,
                              self.fault.describe())

    def attach(self, emu):
        self.emu = emu
        emu.faults.append(self)
        self._hook_phase = None
        self._sync_hooks()

    def detach(self):
        emu = self.emu
        for hook in self._hooks:
            emu.hooks.remove(hook)
        self._hooks = []
        self._hook_phase = None
        if self in emu.faults:
            emu.faults.remove(self)

    def save_state(self):
        return self.phase, len(self.events)

    def restore_state(self, state):
        self.phase, count = state
        del self.events[count:]
        self._sync_hooks()

    def _wanted_hooks(self):
        fault = self.fault
        if self.phase == WAITING:
            if fault.target_kind == INSTRUCTION and not fault.permanent:
                if fault.effect == SKIP:
                    return [('before_decode', self._skip_instruction)]
                return [('before_decode', self._substitute_instruction)]
            return [('before_fetch', self._trigger)]
        if self.phase == ACTIVE:
            if fault.lifetime == PERMANENT:
                return [('before_register_write', self._reassert)]
            if fault.lifetime == UNTIL_OVERWRITE:
                return [('after_register_write', self._disarm)]
            return [('after_register_read', self._transient_read),
                    ('after_execute', self._close_window)]
        return []

    def _sync_hooks(self):
        if self.emu is None or self._hook_phase == self.phase:
            return
        hooks = self.emu.hooks
        for hook in self._hooks:
            hooks.remove(hook)
        self._hooks = [hooks.add(event, callback)
                       for event, callback in self._wanted_hooks()]
        self._hook_phase = self.phase

    def _set_phase(self, phase):
        self.phase = phase
        self._sync_hooks()

    def _record(self, action, before=None, after=None):
        self.events.append(FaultEvent(self.emu.instr_count, self.fault,
                                      action, before, after))

    # instruction faults
    def _substitute_instruction(self, emu, address, halfwords):
        if emu.instr_count != self.fault.time:
            return None
        faulted = self.fault.faulted_encoding(halfwords)
        self._record('inject', tuple(halfwords), faulted)
        self._set_phase(DONE)
        return faulted

    def _skip_instruction(self, emu, address, halfwords):
        if emu.instr_count != self.fault.time:
            return None
        self._record('inject', tuple(halfwords), 'skip')
        self._set_phase(DONE)
        return DecodedInstruction.skip(32 if is_wide(halfwords[0]) else 16)

    def _trigger(self, emu, address):
        if emu.instr_count != self.fault.time:
            return
        fault = self.fault
        if fault.target_kind == INSTRUCTION:
            halfwords = (emu.fetch(fault.target),)
            if fault.width == 32:
                halfwords += (emu.fetch(fault.target + 2),)
            faulted = fault.faulted_encoding(halfwords)
            data = b''.join(hw.to_bytes(2, 'little') for hw in faulted)
            emu.memory.patch(fault.target, data)
            emu._pending = None
            self._record('inject', halfwords, faulted)
            self._set_phase(DONE)
            return
        if fault.lifetime == TRANSIENT:
            self._record('inject')
            self._set_phase(ACTIVE)
            return
        before = emu.get_register(fault.target)
        after = fault.apply_to_value(before)
        emu.set_register(fault.target, after)
        self._record('inject', before, emu.get_register(fault.target))
        self._set_phase(ACTIVE)

    # register faults
    def _reassert(self, emu, reg, value):
        if reg != self.fault.target:
            return None
        faulted = self.fault.apply_to_value(value)
        if faulted != value:
            self._record('reassert', value, faulted)
        return faulted

    def _disarm(self, emu, reg, value):
        if reg != self.fault.target:
            return
        self._record('disarm')
        self._set_phase(DONE)

    def _transient_read(self, emu, reg, value):
        if reg != self.fault.target:
            return None
        faulted = self.fault.apply_to_value(value)
        if faulted != value:
            self._record('read', value, faulted)
        return faulted

    def _close_window(self, emu, address, insn):
        self._set_phase(DONE)


def install(fault, emu):
    """
    Installs ``fault`` into ``emu`` and returns its :py:class:`FaultHandle`.
    The fault takes effect when the emulator reaches ``fault.time``.
    """
    if emu.instr_count > fault.time:
        raise FaultTimeError('Fault time %d has already passed (now %d)'
                             % (fault.time, emu.instr_count))
    handle = FaultHandle(fault)
    handle.attach(emu)
    logger.debug('installed %s', fault.describe())
    return handle


def uninstall(handle):
    handle.detach()
