"""
Instruction-accurate ARMv6-M emulator.

The emulator owns the complete machine state (registers, xPSR, flash and RAM
images, the executed-instruction counter) and executes one Thumb instruction
per :py:meth:`Emulator.step`. Everything that touches registers, memory or
the instruction stream goes through a :py:class:`HookSet`, which is how fault
injection, dry-run recording, tracing and snapshot bookkeeping observe and
alter a run.
"""
import logging

from faultscope.decoder import (
    PC,
    SP,
    LR,
    V6M,
    V7M,
    XPSR,
    ARCH_LEVELS,
    REGISTER_NAMES,
    DecodedInstruction,
    decode,
    disassemble,
    is_wide,
)
from faultscope.exceptions import (
    ConfigError,
    EmulatorError,
    FaultError,
    HardFault,
    Halted,
    MemoryAccessError,
    SnapshotError,
    UnalignedAccessError,
    UndefinedBehavior,
    UnsupportedExceptionEntry,
)
from faultscope.profiles import (
    ABORT,
    BRANCH_TO_PC,
    CLEAR_T_BIT,
    EXECUTE,
    HARD_FAULT,
    LDR_LR_RN,
    LDR_LR_SP,
    MEMORY_ERROR,
    NOP,
    STORE_CURRENT_RN,
    STR_LR_RN_POSTINC,
    STR_LR_SP,
    get_profile,
)
from faultscope.utils import MASK32, sign_extend, to_int, u32


logger = logging.getLogger(__name__)


DEFAULT_FLASH_BASE = 0x8000
DEFAULT_FLASH_SIZE = 0x40000
DEFAULT_RAM_BASE = 0x20000000
DEFAULT_RAM_SIZE = 0x10000
# granularity of the RAM copies kept by snapshots
PAGE_SIZE = 256

N_FLAG = 1 << 31
Z_FLAG = 1 << 30
C_FLAG = 1 << 29
V_FLAG = 1 << 28
T_BIT = 1 << 24
IT_MASK = 0x0600FC00

# step outcomes
EXECUTED = 'executed'
HALTED = 'halted'
ERROR = 'error'

# run outcomes
HALTING_POINT = 'halting-point'
TIMEOUT = 'timeout'


class MemoryRegion:
    "A contiguous little-endian byte image"

    def __init__(self, name, base, size, writable=True):
        if base % 4 or size <= 0:
            raise ConfigError('Invalid %s region 0x%x+0x%x'
                              % (name, base, size))
        self.name = name
        self.base = base
        self.size = size
        self.end = base + size
        self.writable = writable
        self.data = bytearray(size)

    def __repr__(self):
        return '%s<%s 0x%08x-0x%08x>' % (type(self).__name__, self.name,
                                         self.base, self.end)

    def __contains__(self, address):
        return self.base <= address < self.end

    def contains(self, address, length=1):
        return self.base <= address and address + length <= self.end


class Memory:
    """
    The flash and RAM images of one machine.

    Program stores to flash raise :py:class:`MemoryAccessError` like any
    unmapped access. Host-side flash patches go through :py:meth:`patch`,
    which keeps an undo journal so snapshots can roll them back.
    """

    def __init__(self, flash, ram):
        if flash.base < ram.end and ram.base < flash.end:
            raise ConfigError('flash and RAM regions overlap')
        self.flash = flash
        self.ram = ram
        self.journal = []

    def region(self, address, length):
        ram = self.ram
        if ram.base <= address and address + length <= ram.end:
            return ram
        flash = self.flash
        if flash.base <= address and address + length <= flash.end:
            return flash
        raise MemoryAccessError('unmapped access of %d bytes at 0x%08x'
                                % (length, address))

    def read(self, address, size):
        region = self.region(address, size)
        offset = address - region.base
        return int.from_bytes(region.data[offset:offset + size], 'little')

    def write(self, address, size, value):
        region = self.region(address, size)
        if not region.writable:
            raise MemoryAccessError('store of %d bytes to %s at 0x%08x'
                                    % (size, region.name, address))
        offset = address - region.base
        region.data[offset:offset + size] = \
            (value & ((1 << (8 * size)) - 1)).to_bytes(size, 'little')

    def read_bytes(self, address, length):
        region = self.region(address, length)
        offset = address - region.base
        return bytes(region.data[offset:offset + length])

    def write_bytes(self, address, data):
        "Host-side write that ignores write protection and the journal"
        region = self.region(address, len(data))
        offset = address - region.base
        region.data[offset:offset + len(data)] = data

    def patch(self, address, data):
        "Journaled flash write"
        self.journal.append((address, self.read_bytes(address, len(data))))
        self.write_bytes(address, data)

    def rollback(self, mark):
        journal = self.journal
        while len(journal) > mark:
            address, original = journal.pop()
            self.write_bytes(address, original)


class HookHandle:
    def __init__(self, event, callback):
        self.event = event
        self.callback = callback

    def __repr__(self):
        return '%s<%s %r>' % (type(self).__name__, self.event, self.callback)


class HookSet:
    """
    Callbacks fired by the emulator.

    Instruction hooks:

    * ``before_fetch(emu, address)``
    * ``before_decode(emu, address, halfwords)`` may return replacement
      halfwords, decoded from scratch with their width, or a
      :py:class:`DecodedInstruction` that is used without decoding
    * ``after_decode(emu, address, insn)`` may return replacement halfwords
      (decoded again) or a :py:class:`DecodedInstruction`
    * ``after_execute(emu, address, insn)``

    Register hooks (``reg`` is 0-15, or 16 for xPSR):

    * ``before_register_read(emu, reg)``
    * ``after_register_read(emu, reg, value)`` may return the value the
      instruction observes
    * ``before_register_write(emu, reg, value)`` may return the value that
      gets written
    * ``after_register_write(emu, reg, value)``

    Memory hooks follow the same pattern with ``(emu, address, size)`` and
    ``(emu, address, size, value)``.
    """
    EVENTS = (
        'before_fetch', 'before_decode', 'after_decode', 'after_execute',
        'before_register_read', 'after_register_read',
        'before_register_write', 'after_register_write',
        'before_memory_read', 'after_memory_read',
        'before_memory_write', 'after_memory_write',
    )

    def __init__(self):
        for event in self.EVENTS:
            setattr(self, event, [])

    def __len__(self):
        return sum(len(getattr(self, event)) for event in self.EVENTS)

    def add(self, event, callback):
        if event not in self.EVENTS:
            raise ValueError('Unknown hook event %r' % (event,))
        getattr(self, event).append(callback)
        return HookHandle(event, callback)

    def remove(self, handle):
        callbacks = getattr(self, handle.event)
        for i, callback in enumerate(callbacks):
            if callback is handle.callback:
                del callbacks[i]
                return True
        return False


class StepOutcome:
    def __init__(self, status, error=None):
        self.status = status
        self.error = error

    def __repr__(self):
        if self.error is None:
            return '%s<%s>' % (type(self).__name__, self.status)
        return '%s<%s %s>' % (type(self).__name__, self.status,
                              self.error.classification)


class RunOutcome:
    """
    How :py:meth:`Emulator.run_until` stopped. ``kind`` is one of
    ``halting-point``, ``timeout``, ``error`` or ``halted``; ``address`` is
    the PC at that moment and ``executed`` the number of instructions run.
    """

    def __init__(self, kind, address, executed, error=None):
        self.kind = kind
        self.address = address
        self.executed = executed
        self.error = error

    def __repr__(self):
        return '%s<%s 0x%08x after %d>' % (type(self).__name__, self.kind,
                                           self.address, self.executed)

    @property
    def classification(self):
        if self.error is not None:
            return self.error.classification
        return self.kind


class MachineState:
    "A comparable copy of everything that makes up the machine"
    FIELDS = ('regs', 'xpsr', 'instr_count', 'flash', 'ram', 'primask',
              'control', 'psp')

    def __init__(self, **values):
        for name in self.FIELDS:
            setattr(self, name, values[name])

    def __eq__(self, other):
        return isinstance(other, MachineState) and all(
            getattr(self, name) == getattr(other, name)
            for name in self.FIELDS)

    def __repr__(self):
        return '%s<pc=0x%08x count=%d>' % (type(self).__name__,
                                           self.regs[PC], self.instr_count)


class DirtyTracker:
    """
    Two RAM ranges written since a snapshot: one anchored at the stack
    pointer, one at the start of RAM. A write outside both grows the nearer.
    """

    def __init__(self, ram_base, ram_end, sp):
        self.ram_base = ram_base
        self.ram_end = ram_end
        self.stack_anchor = min(max(sp, ram_base), ram_end)
        self.live = True
        self.reset()

    def reset(self):
        self.ranges = [[self.stack_anchor, self.stack_anchor],
                       [self.ram_base, self.ram_base]]

    @property
    def touched(self):
        return sum(1 for lo, hi in self.ranges if hi > lo)

    def mark(self, address, length):
        start = max(address, self.ram_base)
        end = min(address + length, self.ram_end)
        if start >= end:
            return
        nearest = None
        nearest_distance = None
        for candidate in self.ranges:
            lo, hi = candidate
            if end < lo:
                distance = lo - end
            elif start > hi:
                distance = start - hi
            else:
                distance = 0
            if nearest is None or distance < nearest_distance:
                nearest = candidate
                nearest_distance = distance
        if start < nearest[0]:
            nearest[0] = start
        if end > nearest[1]:
            nearest[1] = end


class Snapshot:
    """
    A restorable copy of an emulator's state. RAM is not copied up front:
    each page is saved the first time it is written while the snapshot is
    tracked.
    """

    def __init__(self, emu):
        self.regs = list(emu.regs)
        self.xpsr = emu.xpsr
        self.instr_count = emu.instr_count
        self.pending = emu._pending
        self.primask = emu.primask
        self.control = emu.control
        self.psp = emu.psp
        self.journal_mark = len(emu.memory.journal)
        self.pages = {}
        self.faults = [(handle, handle.save_state()) for handle in emu.faults]
        ram = emu.memory.ram
        self.tracker = DirtyTracker(ram.base, ram.end, emu.regs[SP])

    def __repr__(self):
        return '%s<pc=0x%08x count=%d>' % (type(self).__name__,
                                           self.regs[PC], self.instr_count)

    def save(self, ram, address, length):
        "Keeps the pages of ``ram`` about to be overwritten at ``address``"
        start = max(address, ram.base) - ram.base
        end = min(address + length, ram.end) - ram.base
        if start >= end:
            return
        pages = self.pages
        for page in range(start // PAGE_SIZE, (end - 1) // PAGE_SIZE + 1):
            if page not in pages:
                offset = page * PAGE_SIZE
                pages[page] = bytes(ram.data[offset:offset + PAGE_SIZE])

    def copy_back(self, ram, lo, hi):
        "Writes the saved bytes of ``lo``-``hi`` back; returns how many"
        start = lo - ram.base
        end = hi - ram.base
        copied = 0
        for page in range(start // PAGE_SIZE, (end - 1) // PAGE_SIZE + 1):
            saved = self.pages.get(page)
            if saved is None:
                continue
            offset = page * PAGE_SIZE
            first = max(start, offset)
            last = min(end, offset + len(saved))
            ram.data[first:last] = saved[first - offset:last - offset]
            copied += last - first
        return copied


# op name -> executor, filled by @executes below
EXECUTORS = {}


def executes(*ops):
    def decorator(func):
        for op in ops:
            EXECUTORS[op] = func
        return func
    return decorator


def add_with_carry(x, y, carry_in):
    "Returns ``(result, carry, overflow)`` of a 32-bit addition"
    unsigned = x + y + carry_in
    result = unsigned & MASK32
    signed = sign_extend(x, 32) + sign_extend(y, 32) + carry_in
    return result, int(unsigned > MASK32), \
        int(sign_extend(result, 32) != signed)


def shift_with_carry(value, shift, amount, carry_in):
    "Applies a register shift. Returns ``(result, carry)``"
    if amount == 0:
        return value, carry_in
    if shift == 'lsl':
        if amount > 32:
            return 0, 0
        return (value << amount) & MASK32, (value >> (32 - amount)) & 1
    if shift == 'lsr':
        if amount > 32:
            return 0, 0
        return value >> amount, (value >> (amount - 1)) & 1
    if shift == 'asr':
        if amount >= 32:
            top = value >> 31
            return (MASK32 if top else 0), top
        return u32(sign_extend(value, 32) >> amount), \
            (value >> (amount - 1)) & 1
    # ror
    amount %= 32
    if amount:
        value = u32((value >> amount) | (value << (32 - amount)))
    return value, value >> 31


def condition_passed(cond, xpsr):
    n = (xpsr >> 31) & 1
    z = (xpsr >> 30) & 1
    c = (xpsr >> 29) & 1
    v = (xpsr >> 28) & 1
    base = cond >> 1
    if base == 0:
        result = z == 1
    elif base == 1:
        result = c == 1
    elif base == 2:
        result = n == 1
    elif base == 3:
        result = v == 1
    elif base == 4:
        result = c == 1 and z == 0
    elif base == 5:
        result = n == v
    elif base == 6:
        result = n == v and z == 0
    else:
        return True
    if cond & 1:
        return not result
    return result


class Emulator:
    """
    One ARMv6-M core with flash and RAM.

    ``arch`` selects the instruction set (``v6m`` or ``v7m-subset``) and
    ``profile`` the :py:class:`~faultscope.profiles.UbProfile` consulted on
    undefined-behavior conditions; both may be given by name.
    """

    def __init__(self, arch=V6M, profile=None,
                 flash_base=DEFAULT_FLASH_BASE, flash_size=DEFAULT_FLASH_SIZE,
                 ram_base=DEFAULT_RAM_BASE, ram_size=DEFAULT_RAM_SIZE):
        if arch not in ARCH_LEVELS:
            raise ConfigError('Invalid architecture level %r' % (arch,))
        self.arch = arch
        self.profile = get_profile(profile)
        self.memory = Memory(
            MemoryRegion('flash', flash_base, flash_size, writable=False),
            MemoryRegion('ram', ram_base, ram_size))
        self.hooks = HookSet()
        self.symbols = {}
        self.faults = []
        self.regs = [0] * 16
        self.xpsr = T_BIT
        self.instr_count = 0
        self.primask = 0
        self.control = 0
        self.psp = 0
        self._pending = None
        self._current = 0
        self._next_pc = 0
        self._in_it = False
        self._snapshots = []
        self._tracker_hook = None

    def __repr__(self):
        return '%s<%s %s pc=0x%08x count=%d>' % (
            type(self).__name__, self.arch, self.profile.name,
            self.regs[PC], self.instr_count)

    # host-side state access
    @property
    def pc(self):
        return self.regs[PC]

    @pc.setter
    def pc(self, value):
        self.regs[PC] = u32(value) & ~1
        self._pending = None

    @property
    def sp(self):
        return self.regs[SP]

    @sp.setter
    def sp(self, value):
        self.regs[SP] = u32(value) & ~3

    @property
    def flags(self):
        return dict((name, (self.xpsr >> bit) & 1)
                    for name, bit in (('n', 31), ('z', 30), ('c', 29),
                                      ('v', 28), ('t', 24)))

    def get_register(self, reg):
        if reg == XPSR:
            return self.xpsr
        return self.regs[reg]

    def set_register(self, reg, value):
        if reg == XPSR:
            self.xpsr = u32(value)
        elif reg == PC:
            self.pc = value
        elif reg == SP:
            self.sp = value
        else:
            self.regs[reg] = u32(value)

    def registers(self):
        "Register name -> value, xPSR included"
        values = dict(zip(REGISTER_NAMES, self.regs))
        values['xpsr'] = self.xpsr
        return values

    def read_memory(self, address, length):
        return self.memory.read_bytes(address, length)

    def write_memory(self, address, data):
        """
        Host-side write. Flash writes are journaled; RAM writes are seen by
        live snapshots.
        """
        data = bytes(data)
        if self.memory.region(address, len(data)) is self.memory.flash:
            self.memory.patch(address, data)
        else:
            self._track_write(self, address, len(data), None)
            self.memory.write_bytes(address, data)

    def resolve(self, location):
        "Turns a symbol name or an address into an address"
        if isinstance(location, str):
            if location in self.symbols:
                return self.symbols[location]
            try:
                return to_int(location)
            except ValueError:
                raise ConfigError('Unknown symbol `%s`' % location)
        return to_int(location)

    def fetch(self, address):
        try:
            return self.memory.read(address, 2)
        except MemoryAccessError:
            raise MemoryAccessError('instruction fetch from unmapped address '
                                    '0x%08x' % address)

    def decode_at(self, address):
        halfwords = (self.fetch(address),)
        if is_wide(halfwords[0]):
            halfwords += (self.fetch(address + 2),)
        return decode(halfwords, self.arch)

    def disassemble(self, address):
        return disassemble(self.decode_at(address), address)

    def machine_state(self):
        return MachineState(
            regs=tuple(self.regs), xpsr=self.xpsr,
            instr_count=self.instr_count,
            flash=bytes(self.memory.flash.data),
            ram=bytes(self.memory.ram.data), primask=self.primask,
            control=self.control, psp=self.psp)

    def clone(self):
        "An independent copy without hooks. Installed faults are not cloned"
        if self.faults:
            raise FaultError('Cannot clone an emulator with installed faults')
        flash = self.memory.flash
        ram = self.memory.ram
        other = type(self)(arch=self.arch, profile=self.profile,
                           flash_base=flash.base, flash_size=flash.size,
                           ram_base=ram.base, ram_size=ram.size)
        other.memory.flash.data[:] = flash.data
        other.memory.ram.data[:] = ram.data
        other.symbols = dict(self.symbols)
        other.regs = list(self.regs)
        other.xpsr = self.xpsr
        other.instr_count = self.instr_count
        other.primask = self.primask
        other.control = self.control
        other.psp = self.psp
        other._pending = self._pending
        return other

    # snapshots
    def snapshot(self):
        snapshot = Snapshot(self)
        self._snapshots.append(snapshot)
        if self._tracker_hook is None:
            self._tracker_hook = self.hooks.add('before_memory_write',
                                                self._track_write)
        return snapshot

    def restore(self, snapshot):
        """
        Returns the machine to ``snapshot``. Only the saved pages inside the
        RAM ranges written since the snapshot are copied back. Returns the
        number of RAM bytes copied.
        """
        ram = self.memory.ram
        tracker = snapshot.tracker
        if not tracker.live or snapshot not in self._snapshots:
            raise SnapshotError('%r is no longer tracked' % snapshot)
        copied = 0
        for lo, hi in tracker.ranges:
            if hi > lo:
                copied += snapshot.copy_back(ram, lo, hi)
        tracker.reset()
        snapshot.pages = {}
        index = self._snapshots.index(snapshot)
        for newer in self._snapshots[index + 1:]:
            newer.tracker.live = False
            newer.pages = {}
        del self._snapshots[index + 1:]
        self.memory.rollback(snapshot.journal_mark)
        self.regs = list(snapshot.regs)
        self.xpsr = snapshot.xpsr
        self.instr_count = snapshot.instr_count
        self._pending = snapshot.pending
        self.primask = snapshot.primask
        self.control = snapshot.control
        self.psp = snapshot.psp
        self._restore_faults(snapshot.faults)
        return copied

    def release(self, snapshot):
        "Stops tracking ``snapshot``; it can no longer be restored"
        if snapshot in self._snapshots:
            self._snapshots.remove(snapshot)
        snapshot.tracker.live = False
        snapshot.pages = {}
        if not self._snapshots and self._tracker_hook is not None:
            self.hooks.remove(self._tracker_hook)
            self._tracker_hook = None

    def _restore_faults(self, saved):
        wanted = [handle for handle, _ in saved]
        for handle in list(self.faults):
            if handle not in wanted:
                handle.detach()
        for handle, state in saved:
            if handle not in self.faults:
                handle.attach(self)
            handle.restore_state(state)

    def _track_write(self, emu, address, size, value):
        ram = self.memory.ram
        for snapshot in self._snapshots:
            snapshot.tracker.mark(address, size)
            snapshot.save(ram, address, size)

    # execution
    def step(self):
        "Executes one instruction and returns a :py:class:`StepOutcome`"
        try:
            self._step()
        except Halted as e:
            if e.address is None:
                e.address = self._current
            return StepOutcome(HALTED, e)
        except EmulatorError as e:
            if e.address is None:
                e.address = self._current
            return StepOutcome(ERROR, e)
        return StepOutcome(EXECUTED)

    def run_until(self, halting_points=(), max_instructions=None):
        """
        Runs until the PC reaches one of ``halting_points`` (before that
        instruction executes), ``max_instructions`` have executed, or an
        error stops the core.
        """
        if max_instructions is None or max_instructions <= 0:
            raise ValueError('max_instructions must be positive')
        halting_points = frozenset(halting_points)
        start = self.instr_count
        while True:
            pc = self.regs[PC]
            executed = self.instr_count - start
            if pc in halting_points:
                return RunOutcome(HALTING_POINT, pc, executed)
            if executed >= max_instructions:
                return RunOutcome(TIMEOUT, pc, executed)
            outcome = self.step()
            if outcome.status != EXECUTED:
                kind = HALTED if outcome.status == HALTED else ERROR
                logger.debug('run stopped at 0x%08x: %s', self._current,
                             outcome.error)
                return RunOutcome(kind, self._current,
                                  self.instr_count - start, outcome.error)

    def _step(self):
        address = self.regs[PC]
        self._current = address
        hooks = self.hooks
        if hooks.before_fetch:
            for callback in tuple(hooks.before_fetch):
                callback(self, address)
        if not self.xpsr & T_BIT:
            self._undefined_behavior(('branch', 't-bit-clear'))

        pending = self._pending
        self._pending = None
        if pending is not None and pending[0] == address:
            halfwords = pending[1]
        else:
            halfwords = (self.fetch(address),)
        if is_wide(halfwords[0]) and len(halfwords) < 2:
            halfwords += (self.fetch(u32(address + 2)),)
        insn = None
        if hooks.before_decode:
            for callback in tuple(hooks.before_decode):
                result = callback(self, address, halfwords)
                if isinstance(result, DecodedInstruction):
                    insn = result
                elif result is not None and insn is None:
                    halfwords = tuple(hw & 0xFFFF for hw in result)
            if is_wide(halfwords[0]) and len(halfwords) < 2:
                halfwords += (self.fetch(u32(address + 2)),)
        try:
            if insn is None:
                insn = decode(halfwords, self.arch)
            if hooks.after_decode:
                for callback in tuple(hooks.after_decode):
                    result = callback(self, address, insn)
                    if result is None:
                        continue
                    if isinstance(result, DecodedInstruction):
                        insn = result
                        continue
                    halfwords = tuple(hw & 0xFFFF for hw in result)
                    if is_wide(halfwords[0]) and len(halfwords) < 2:
                        halfwords += (self.fetch(u32(address + 2)),)
                    insn = decode(halfwords, self.arch)
        except EmulatorError as e:
            e.encoding = halfwords
            raise
        consumed = len(insn.encoding)
        if len(halfwords) > consumed:
            # a replaced wide slot that now holds two narrow instructions
            self._pending = (u32(address + 2 * consumed),
                             halfwords[consumed:])

        self._next_pc = u32(address + 2 * consumed)
        itstate = 0
        execute = True
        if self.arch == V7M:
            itstate = self._itstate()
            if itstate & 0xF and insn.op != 'it':
                execute = condition_passed(itstate >> 4,
                                           self._read(XPSR))
            else:
                itstate = 0
        self._in_it = bool(itstate)
        try:
            if execute:
                EXECUTORS[insn.op](self, insn)
        except EmulatorError as e:
            e.encoding = insn.encoding
            raise
        if itstate:
            if itstate & 7:
                self._set_itstate((itstate & 0xE0) | ((itstate << 1) & 0x1F))
            else:
                self._set_itstate(0)
        self.regs[PC] = self._next_pc
        self.instr_count += 1
        if hooks.after_execute:
            for callback in tuple(hooks.after_execute):
                callback(self, address, insn)

    def _itstate(self):
        xpsr = self.xpsr
        return ((xpsr >> 25) & 3) | (((xpsr >> 10) & 0x3F) << 2)

    def _set_itstate(self, value):
        self.xpsr = (self.xpsr & ~IT_MASK & MASK32) | ((value & 3) << 25) \
            | (((value >> 2) & 0x3F) << 10)

    def _undefined_behavior(self, condition):
        action = self.profile.action(*condition)
        if action == ABORT:
            raise UndefinedBehavior('undefined behavior %s/%s' % condition,
                                    condition=condition)
        if action == HARD_FAULT:
            raise HardFault('%s/%s faults under profile %s'
                            % (condition + (self.profile.name,)))
        if action == MEMORY_ERROR:
            raise UnalignedAccessError('%s/%s' % condition)
        return action

    # register and memory access as seen by instructions
    def _read(self, reg):
        if reg == PC:
            value = u32(self._current + 4)
        elif reg == XPSR:
            value = self.xpsr
        else:
            value = self.regs[reg]
        hooks = self.hooks
        if hooks.before_register_read:
            for callback in tuple(hooks.before_register_read):
                callback(self, reg)
        if hooks.after_register_read:
            for callback in tuple(hooks.after_register_read):
                result = callback(self, reg, value)
                if result is not None:
                    value = result & MASK32
        return value

    def _write(self, reg, value, interworking=False):
        value &= MASK32
        hooks = self.hooks
        if hooks.before_register_write:
            for callback in tuple(hooks.before_register_write):
                result = callback(self, reg, value)
                if result is not None:
                    value = result & MASK32
        if reg == PC:
            if interworking and not value & 1:
                self.xpsr &= ~T_BIT
            self._next_pc = value & ~1
        elif reg == XPSR:
            self.xpsr = value
        elif reg == SP:
            self.regs[SP] = value & ~3
        else:
            self.regs[reg] = value
        if hooks.after_register_write:
            for callback in tuple(hooks.after_register_write):
                callback(self, reg, value)

    def _set_flags(self, result, carry=None, overflow=None):
        kept = 0
        if carry is None or overflow is None:
            kept = self._read(XPSR)
        value = (self.xpsr & 0x0FFFFFFF) | (result & N_FLAG)
        if not result & MASK32:
            value |= Z_FLAG
        if carry is None:
            value |= kept & C_FLAG
        elif carry:
            value |= C_FLAG
        if overflow is None:
            value |= kept & V_FLAG
        elif overflow:
            value |= V_FLAG
        self._write(XPSR, value)

    def _carry(self):
        return (self._read(XPSR) >> 29) & 1

    def _setflags(self, insn):
        return insn.setflags and not (insn.it_sensitive and self._in_it)

    def _check_alignment(self, address, size, strict):
        if strict:
            raise UnalignedAccessError('unaligned multiple access at 0x%08x'
                                       % address)
        if self._undefined_behavior(('memory', 'unaligned')) != EXECUTE:
            raise UnalignedAccessError('unaligned access at 0x%08x'
                                       % address)

    def _load(self, address, size, strict=False):
        address = u32(address)
        if address & (size - 1):
            self._check_alignment(address, size, strict)
        hooks = self.hooks
        if hooks.before_memory_read:
            for callback in tuple(hooks.before_memory_read):
                callback(self, address, size)
        value = self.memory.read(address, size)
        if hooks.after_memory_read:
            for callback in tuple(hooks.after_memory_read):
                result = callback(self, address, size, value)
                if result is not None:
                    value = result & ((1 << (8 * size)) - 1)
        return value

    def _store(self, address, size, value, strict=False):
        address = u32(address)
        value &= (1 << (8 * size)) - 1
        if address & (size - 1):
            self._check_alignment(address, size, strict)
        hooks = self.hooks
        if hooks.before_memory_write:
            for callback in tuple(hooks.before_memory_write):
                result = callback(self, address, size, value)
                if result is not None:
                    value = result & ((1 << (8 * size)) - 1)
        self.memory.write(address, size, value)
        if hooks.after_memory_write:
            for callback in tuple(hooks.after_memory_write):
                callback(self, address, size, value)

    def _write_loaded(self, reg, value):
        if reg == PC:
            self._write(PC, value, interworking=True)
        else:
            self._write(reg, value)

    # data processing
    @executes('mov_reg')
    def _exec_mov_reg(self, insn):
        value = self._read(insn.rm)
        self._write(insn.rd, value)
        if self._setflags(insn):
            self._set_flags(value)

    @executes('shift_imm', 'shift_reg')
    def _exec_shift(self, insn):
        if insn.op == 'shift_imm':
            value = self._read(insn.rm)
            amount = insn.imm
        else:
            value = self._read(insn.rn)
            amount = self._read(insn.rm) & 0xFF
        # the carry flag is only consumed by a zero shift
        carry_in = self._carry() if amount == 0 else 0
        result, carry = shift_with_carry(value, insn.shift, amount, carry_in)
        self._write(insn.rd, result)
        if self._setflags(insn):
            self._set_flags(result, carry)

    @executes('add_reg')
    def _exec_add_reg(self, insn):
        if insn.ub is not None:
            action = self._undefined_behavior(insn.ub)
            if action == NOP:
                return
        result, carry, overflow = add_with_carry(
            self._read(insn.rn), self._read(insn.rm), 0)
        self._write(insn.rd, result)
        if self._setflags(insn):
            self._set_flags(result, carry, overflow)

    @executes('sub_reg')
    def _exec_sub_reg(self, insn):
        result, carry, overflow = add_with_carry(
            self._read(insn.rn), u32(~self._read(insn.rm)), 1)
        self._write(insn.rd, result)
        if self._setflags(insn):
            self._set_flags(result, carry, overflow)

    @executes('add_imm', 'sub_imm', 'adc_imm', 'sbc_imm', 'rsb_imm')
    def _exec_arith_imm(self, insn):
        op = insn.op
        value = self._read(insn.rn)
        if op == 'add_imm':
            result, carry, overflow = add_with_carry(value, insn.imm, 0)
        elif op == 'sub_imm':
            result, carry, overflow = add_with_carry(value, u32(~insn.imm),
                                                     1)
        elif op == 'adc_imm':
            result, carry, overflow = add_with_carry(value, insn.imm,
                                                     self._carry())
        elif op == 'sbc_imm':
            result, carry, overflow = add_with_carry(value, u32(~insn.imm),
                                                     self._carry())
        else:
            result, carry, overflow = add_with_carry(u32(~value), insn.imm, 1)
        self._write(insn.rd, result)
        if self._setflags(insn):
            self._set_flags(result, carry, overflow)

    @executes('adc_reg', 'sbc_reg')
    def _exec_carry_reg(self, insn):
        a = self._read(insn.rn)
        b = self._read(insn.rm)
        if insn.op == 'sbc_reg':
            b = u32(~b)
        result, carry, overflow = add_with_carry(a, b, self._carry())
        self._write(insn.rd, result)
        if self._setflags(insn):
            self._set_flags(result, carry, overflow)

    @executes('mov_imm', 'mvn_imm')
    def _exec_mov_imm(self, insn):
        result = insn.imm if insn.op == 'mov_imm' else u32(~insn.imm)
        self._write(insn.rd, result)
        if self._setflags(insn):
            self._set_flags(result, insn.carry)

    @executes('cmp_imm', 'cmn_imm')
    def _exec_compare_imm(self, insn):
        value = self._read(insn.rn)
        if insn.op == 'cmp_imm':
            result, carry, overflow = add_with_carry(value, u32(~insn.imm),
                                                     1)
        else:
            result, carry, overflow = add_with_carry(value, insn.imm, 0)
        self._set_flags(result, carry, overflow)

    @executes('cmp_reg', 'cmn_reg')
    def _exec_compare_reg(self, insn):
        if insn.ub is not None:
            action = self._undefined_behavior(insn.ub)
            if action == NOP:
                return
        a = self._read(insn.rn)
        b = self._read(insn.rm)
        if insn.op == 'cmp_reg':
            result, carry, overflow = add_with_carry(a, u32(~b), 1)
        else:
            result, carry, overflow = add_with_carry(a, b, 0)
        self._set_flags(result, carry, overflow)

    @executes('and_reg', 'eor_reg', 'orr_reg', 'bic_reg', 'tst_reg')
    def _exec_logical_reg(self, insn):
        a = self._read(insn.rn)
        b = self._read(insn.rm)
        result = _logical(insn.op[:3], a, b)
        if insn.op != 'tst_reg':
            self._write(insn.rd, result)
            if not self._setflags(insn):
                return
        self._set_flags(result)

    @executes('and_imm', 'bic_imm', 'orr_imm', 'orn_imm', 'eor_imm',
              'tst_imm', 'teq_imm')
    def _exec_logical_imm(self, insn):
        result = _logical(insn.op[:3], self._read(insn.rn), insn.imm)
        if insn.op in ('tst_imm', 'teq_imm'):
            self._set_flags(result, insn.carry)
            return
        self._write(insn.rd, result)
        if self._setflags(insn):
            self._set_flags(result, insn.carry)

    @executes('mul')
    def _exec_mul(self, insn):
        result = u32(self._read(insn.rn) * self._read(insn.rm))
        self._write(insn.rd, result)
        if self._setflags(insn):
            self._set_flags(result)

    @executes('mvn_reg')
    def _exec_mvn_reg(self, insn):
        result = u32(~self._read(insn.rm))
        self._write(insn.rd, result)
        if self._setflags(insn):
            self._set_flags(result)

    @executes('extend')
    def _exec_extend(self, insn):
        bits = 8 * insn.size
        value = self._read(insn.rm) & ((1 << bits) - 1)
        if insn.signed:
            value = u32(sign_extend(value, bits))
        self._write(insn.rd, value)

    @executes('rev')
    def _exec_rev(self, insn):
        value = self._read(insn.rm)
        if insn.mnemonic == 'rev':
            result = int.from_bytes(value.to_bytes(4, 'little'), 'big')
        elif insn.mnemonic == 'rev16':
            result = ((value & 0x00FF00FF) << 8) | ((value >> 8) & 0x00FF00FF)
        else:
            result = u32(sign_extend(((value & 0xFF) << 8)
                                     | ((value >> 8) & 0xFF), 16))
        self._write(insn.rd, result)

    @executes('adr')
    def _exec_adr(self, insn):
        self._write(insn.rd, (self._read(PC) & ~3) + insn.imm)

    @executes('movw', 'movt')
    def _exec_movw(self, insn):
        if insn.op == 'movw':
            self._write(insn.rd, insn.imm)
        else:
            low = self._read(insn.rd) & 0xFFFF
            self._write(insn.rd, (insn.imm << 16) | low)

    # loads and stores
    @executes('ldr_lit')
    def _exec_ldr_lit(self, insn):
        address = (self._read(PC) & ~3) + insn.imm
        self._write_loaded(insn.rt, self._load(address, 4))

    @executes('ldr_imm', 'ldr_reg')
    def _exec_load(self, insn):
        base = self._read(insn.rn)
        offset = insn.imm if insn.op == 'ldr_imm' else self._read(insn.rm)
        value = self._load(base + offset, insn.size)
        if insn.signed:
            value = u32(sign_extend(value, 8 * insn.size))
        self._write_loaded(insn.rt, value)

    @executes('str_imm', 'str_reg')
    def _exec_store(self, insn):
        base = self._read(insn.rn)
        offset = insn.imm if insn.op == 'str_imm' else self._read(insn.rm)
        self._store(base + offset, insn.size, self._read(insn.rt))

    @executes('push')
    def _exec_push(self, insn):
        if insn.ub is not None:
            action = self._undefined_behavior(insn.ub)
            if action == STR_LR_SP:
                self._store(self._read(SP), 4, self._read(LR), strict=True)
            return
        sp = self._read(SP)
        address = u32(sp - 4 * len(insn.registers))
        for offset, reg in enumerate(insn.registers):
            self._store(address + 4 * offset, 4, self._read(reg),
                        strict=True)
        self._write(SP, address)

    @executes('pop')
    def _exec_pop(self, insn):
        if insn.ub is not None:
            action = self._undefined_behavior(insn.ub)
            if action == LDR_LR_SP:
                self._write(LR, self._load(self._read(SP), 4, strict=True))
            return
        sp = self._read(SP)
        values = [self._load(sp + 4 * offset, 4, strict=True)
                  for offset in range(len(insn.registers))]
        self._write(SP, sp + 4 * len(insn.registers))
        for reg, value in zip(insn.registers, values):
            self._write_loaded(reg, value)

    @executes('ldm')
    def _exec_ldm(self, insn):
        if insn.ub is not None:
            action = self._undefined_behavior(insn.ub)
            if action == LDR_LR_RN:
                self._write(LR, self._load(self._read(insn.rn), 4,
                                           strict=True))
            return
        base = self._read(insn.rn)
        values = [self._load(base + 4 * offset, 4, strict=True)
                  for offset in range(len(insn.registers))]
        for reg, value in zip(insn.registers, values):
            self._write(reg, value)
        if insn.wback:
            self._write(insn.rn, base + 4 * len(insn.registers))

    @executes('stm')
    def _exec_stm(self, insn):
        if insn.ub is not None:
            action = self._undefined_behavior(insn.ub)
            if action == STR_LR_RN_POSTINC:
                base = self._read(insn.rn)
                self._store(base, 4, self._read(LR), strict=True)
                self._write(insn.rn, base + 4)
                return
            if action != STORE_CURRENT_RN:
                return
        base = self._read(insn.rn)
        for offset, reg in enumerate(insn.registers):
            value = base if reg == insn.rn else self._read(reg)
            self._store(base + 4 * offset, 4, value, strict=True)
        self._write(insn.rn, base + 4 * len(insn.registers))

    # branches
    @executes('b')
    def _exec_b(self, insn):
        if insn.cond is not None and \
                not condition_passed(insn.cond, self._read(XPSR)):
            return
        self._write(PC, self._read(PC) + insn.imm)

    @executes('bl')
    def _exec_bl(self, insn):
        pc = self._read(PC)
        self._write(LR, pc | 1)
        self._write(PC, pc + insn.imm)

    @executes('cbz')
    def _exec_cbz(self, insn):
        value = self._read(insn.rn)
        if (value != 0) == bool(insn.cond):
            self._write(PC, self._read(PC) + insn.imm)

    @executes('bx', 'blx')
    def _exec_bx(self, insn):
        clear_t_bit = False
        if insn.ub is not None:
            action = self._undefined_behavior(insn.ub)
            if action == NOP:
                return
            if action == BRANCH_TO_PC:
                target = self._read(PC) | 1
            else:
                target = self._read(insn.rm)
            clear_t_bit = action == CLEAR_T_BIT
        else:
            target = self._read(insn.rm)
        if insn.op == 'blx':
            self._write(LR, u32(self._current + 2) | 1)
        self._write(PC, target, interworking=True)
        if clear_t_bit:
            self.xpsr &= ~T_BIT

    # system
    @executes('nop', 'skip')
    def _exec_nop(self, insn):
        pass

    @executes('it')
    def _exec_it(self, insn):
        self._set_itstate((insn.cond << 4) | insn.imm)

    @executes('cps')
    def _exec_cps(self, insn):
        self.primask = insn.imm

    @executes('bkpt')
    def _exec_bkpt(self, insn):
        raise Halted('bkpt #%d' % insn.imm)

    @executes('svc')
    def _exec_svc(self, insn):
        raise UnsupportedExceptionEntry('svc #%d' % insn.imm)

    @executes('msr')
    def _exec_msr(self, insn):
        value = self._read(insn.rn)
        sysm = insn.sysm
        if sysm <= 3:
            self._write(XPSR, (self.xpsr & 0x0FFFFFFF)
                        | (value & 0xF0000000))
        elif sysm == 8:
            self._write(SP, value)
        elif sysm == 9:
            self.psp = value & ~3
        elif sysm == 16:
            self.primask = value & 1
        elif sysm == 20:
            self.control = value & 3

    @executes('mrs')
    def _exec_mrs(self, insn):
        sysm = insn.sysm
        if sysm <= 3:
            value = self._read(XPSR) & 0xF0000000
        elif sysm == 8:
            value = self._read(SP)
        elif sysm == 9:
            value = self.psp
        elif sysm == 16:
            value = self.primask
        elif sysm == 20:
            value = self.control
        else:
            # IPSR is zero in thread mode; EPSR reads as zero
            value = 0
        self._write(insn.rd, value)


def _logical(name, a, b):
    if name == 'and' or name == 'tst':
        return a & b
    if name == 'eor' or name == 'teq':
        return a ^ b
    if name == 'orr':
        return a | b
    if name == 'orn':
        return u32(a | ~b)
    return u32(a & ~b)
