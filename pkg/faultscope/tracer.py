"""
Replays a single fault combination and records what every instruction did.

The replay uses the same emulator, fault handles and verdict classification
as a campaign, so a reported combination replays to the verdict it was
reported with. :py:func:`audit_report` checks exactly that for a whole
report.
"""
import logging

from faultscope.campaign import EXPLOITABLE, classify_outcome
from faultscope.decoder import REGISTER_NAMES, XPSR, disassemble
from faultscope.emulator import (
    ERROR,
    EXECUTED,
    HALTED,
    HALTING_POINT,
    TIMEOUT,
    RunOutcome,
)
from faultscope.exceptions import (
    DecodeError,
    FaultError,
    MalformedCombinationError,
    MemoryAccessError,
)
from faultscope.faults import ConcreteFault, install


logger = logging.getLogger(__name__)


class TraceRecord:
    """
    One replayed instruction.

    ``registers`` maps register names to ``(before, after)`` for the
    registers whose value changed; ``memory`` lists ``(address, before,
    after)`` byte strings for changed memory; ``events`` holds the
    :py:class:`~faultscope.faults.FaultEvent` objects fired during the step.
    ``error`` is the classification of an error that ended the run here.
    """

    def __init__(self, time, address, disassembly, registers, memory,
                 events, error=None):
        self.time = time
        self.address = address
        self.disassembly = disassembly
        self.registers = registers
        self.memory = memory
        self.events = events
        self.error = error

    def __repr__(self):
        return '%s<t=%d 0x%08x %s>' % (type(self).__name__, self.time,
                                       self.address, self.disassembly)

    def format(self):
        parts = ['%6d  %08x  %-28s' % (self.time, self.address,
                                       self.disassembly)]
        for name, (before, after) in self.registers.items():
            parts.append('%s: %08x -> %08x' % (name, before, after))
        for address, before, after in self.memory:
            parts.append('[%08x]: %s -> %s' % (address, before.hex(),
                                               after.hex()))
        text = '  '.join(parts).rstrip()
        for event in self.events:
            text += '\n%24s fault %s %s' % ('', event.action,
                                             event.fault.describe())
        if self.error:
            text += '\n%24s stopped: %s' % ('', self.error)
        return text

    def to_dict(self):
        return {
            'time': self.time,
            'address': self.address,
            'disassembly': self.disassembly,
            'registers': dict((name, list(values))
                              for name, values in self.registers.items()),
            'memory': [{'address': address, 'before': before.hex(),
                        'after': after.hex()}
                       for address, before, after in self.memory],
            'events': [event.to_dict() for event in self.events],
            'error': self.error,
        }


class _StepObserver:
    "Collects the memory bytes a step overwrites"

    def __init__(self, emu):
        self.emu = emu
        self.before = {}
        self.executed = None
        self.handles = [emu.hooks.add('before_memory_write', self._write),
                        emu.hooks.add('after_execute', self._executed)]

    def close(self):
        for handle in self.handles:
            self.emu.hooks.remove(handle)

    def begin(self):
        self.before = {}
        self.executed = None
        self.journal_mark = len(self.emu.memory.journal)

    def _executed(self, emu, address, insn):
        self.executed = insn

    def _write(self, emu, address, size, value):
        try:
            old = emu.memory.read_bytes(address, size)
        except MemoryAccessError:
            return
        for i in range(size):
            self.before.setdefault(address + i, old[i])

    def diffs(self):
        memory = self.emu.memory
        before = dict(self.before)
        for address, original in memory.journal[self.journal_mark:]:
            for i, byte in enumerate(original):
                before.setdefault(address + i, byte)
        changed = []
        for address in sorted(before):
            after = memory.read_bytes(address, 1)[0]
            if after != before[address]:
                changed.append((address, before[address], after))
        return _coalesce(changed)


def _coalesce(changed):
    "Groups per-byte changes into runs of adjacent addresses"
    runs = []
    for address, before, after in changed:
        if runs and runs[-1][0] + len(runs[-1][1]) == address:
            runs[-1][1].append(before)
            runs[-1][2].append(after)
        else:
            runs.append((address, bytearray([before]), bytearray([after])))
    return [(address, bytes(before), bytes(after))
            for address, before, after in runs]


def check_combination(combination, start_time=0):
    """
    Raises :py:class:`~faultscope.exceptions.MalformedCombinationError`
    unless the faults are in injection order, start no earlier than
    ``start_time`` and are pairwise distinct.
    """
    combination = tuple(combination)
    if not combination:
        return combination
    for fault in combination:
        if not isinstance(fault, ConcreteFault):
            raise MalformedCombinationError('Not a concrete fault: %r'
                                            % (fault,))
    if combination[0].time < start_time:
        raise MalformedCombinationError(
            'Fault at t=%d precedes the start state (t=%d)'
            % (combination[0].time, start_time))
    for previous, fault in zip(combination, combination[1:]):
        if fault.time < previous.time:
            raise MalformedCombinationError(
                'Fault at t=%d follows a fault at t=%d'
                % (fault.time, previous.time))
    if len(set(combination)) != len(combination):
        raise MalformedCombinationError('Combination repeats a fault')
    return combination


def _registers(emu):
    return list(emu.regs) + [emu.xpsr]


def replay(emu, combination, halting_points, timeout, oracle):
    """
    Replays ``combination`` from a copy of ``emu`` and returns the verdict
    together with one :py:class:`TraceRecord` per executed instruction.

    ``timeout`` counts instructions from the state of ``emu``, like the
    campaign budget. ``emu`` itself is left untouched.
    """
    combination = check_combination(combination, emu.instr_count)
    machine = emu.clone()
    try:
        for fault in combination:
            install(fault, machine)
    except FaultError as e:
        raise MalformedCombinationError(str(e))
    halting_points = frozenset(halting_points)
    deadline = emu.instr_count + timeout
    observer = _StepObserver(machine)
    event_counts = dict((handle, 0) for handle in machine.faults)
    records = []
    try:
        while True:
            pc = machine.pc
            if pc in halting_points:
                outcome = RunOutcome(HALTING_POINT, pc,
                                     machine.instr_count - emu.instr_count)
                break
            if machine.instr_count >= deadline:
                outcome = RunOutcome(TIMEOUT, pc,
                                     machine.instr_count - emu.instr_count)
                break
            time = machine.instr_count
            before = _registers(machine)
            observer.begin()
            step = machine.step()
            after = _registers(machine)
            registers = dict(
                (REGISTER_NAMES[reg], (before[reg], after[reg]))
                for reg in range(XPSR + 1) if before[reg] != after[reg])
            events = []
            for handle in machine.faults:
                seen = event_counts.get(handle, 0)
                events.extend(handle.events[seen:])
                event_counts[handle] = len(handle.events)
            error = None
            if step.status != EXECUTED:
                error = step.error.classification
            if observer.executed is not None:
                text = disassemble(observer.executed, pc)
            else:
                text = _disassemble_at(machine, pc)
            records.append(TraceRecord(time, pc, text, registers,
                                       observer.diffs(), events, error))
            if step.status != EXECUTED:
                kind = HALTED if step.status == HALTED else ERROR
                outcome = RunOutcome(kind, step.error.address,
                                     machine.instr_count - emu.instr_count,
                                     step.error)
                break
    finally:
        observer.close()
    verdict = classify_outcome(outcome, oracle, machine)
    logger.debug('replayed %d faults: %s after %d instructions',
                 len(combination), verdict, len(records))
    return verdict, records


def _disassemble_at(emu, address):
    "The text of the instruction now at ``address`` (faults included)"
    try:
        return disassemble(emu.decode_at(address), address)
    except (DecodeError, MemoryAccessError):
        return '<undecodable>'


def replay_config(config, combination):
    "Replays ``combination`` with the settings of a campaign config"
    return replay(config.emulator, combination, config.halting_points,
                  config.timeout, config.oracle)


class AuditResult:
    "How many reported combinations were replayed, and which disagreed"

    def __init__(self, checked, mismatches):
        self.checked = checked
        self.mismatches = mismatches

    def __repr__(self):
        return '%s<%d checked, %d mismatches>' % (
            type(self).__name__, self.checked, len(self.mismatches))

    def __bool__(self):
        return not self.mismatches

    @property
    def passed(self):
        return not self.mismatches


def audit_report(config, report):
    """
    Replays every combination of ``report`` under ``config`` and returns an
    :py:class:`AuditResult`. Each mismatch is ``(index, reported, got)``.
    """
    mismatches = []
    for index, combination in enumerate(report.exploitable):
        verdict, _ = replay_config(config, combination.faults)
        if verdict != combination.verdict:
            logger.warning('combination %d replayed to %s, reported %s',
                           index, verdict, combination.verdict)
            mismatches.append((index, combination.verdict, verdict))
    logger.info('audit: %d combinations replayed, %d mismatches',
                len(report.exploitable), len(mismatches))
    return AuditResult(len(report.exploitable), mismatches)


def is_exploitable(config, combination):
    return replay_config(config, combination)[0] == EXPLOITABLE
