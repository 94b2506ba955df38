"""
The exhaustive fault simulator.

A campaign starts from a prepared emulator state, records a fault-free dry
run, expands the configured fault models over it and injects every fault
at every injection point. Faults that are not exploitable but leave valid
machine code behind are combined with the next model of each model
sequence, up to ``max_order`` faults per run. Combinations that contain an
already exploitable combination are skipped.

Runs share work through snapshots: the emulator is advanced to an
injection time once, snapshotted, and restored after each fault injected
there. The naive mode restarts emulation from the prepared state for every
run and serves as the reference for that optimisation.
"""
import itertools
import json
import logging
import multiprocessing
import queue
import threading
import time

from faultscope.emulator import HALTING_POINT, TIMEOUT, RunOutcome
from faultscope.exceptions import (
    ConfigError,
    DecodeError,
    MemoryAccessError,
    ModelError,
    ReportError,
)
from faultscope.faults import (
    INSTRUCTION,
    ConcreteFault,
    FaultModelSpec,
    enumerate_injection_points,
    install,
    load_models,
)
from faultscope.oracles import oracle_from_dict


logger = logging.getLogger(__name__)


# verdicts
EXPLOITABLE = 'Exploitable'
ORACLE_REJECTED = 'OracleRejected'
TIMED_OUT = 'Timeout'
INVALID_ASSEMBLY = 'InvalidAssembly'
MEMORY_ERROR = 'MemoryError'
HARD_FAULT = 'HardFault'
VERDICTS = (EXPLOITABLE, ORACLE_REJECTED, TIMED_OUT, INVALID_ASSEMBLY,
            MEMORY_ERROR, HARD_FAULT)

COUNTERS = (
    'points_enumerated', 'runs_executed', 'dry_runs',
    'combinations_executed', 'combinations_pruned', 'timeouts',
    'invalid_assembly', 'memory_errors', 'hard_faults', 'oracle_rejected',
    'exploitable',
)
VERDICT_COUNTERS = {
    EXPLOITABLE: 'exploitable',
    ORACLE_REJECTED: 'oracle_rejected',
    TIMED_OUT: 'timeouts',
    INVALID_ASSEMBLY: 'invalid_assembly',
    MEMORY_ERROR: 'memory_errors',
    HARD_FAULT: 'hard_faults',
}

THREAD = 'thread'
PROCESS = 'process'
BACKENDS = (THREAD, PROCESS)

REPORT_VERSION = 1


def new_counters():
    return dict.fromkeys(COUNTERS, 0)


def classify_outcome(outcome, oracle, emu):
    """
    Turns a :py:class:`~faultscope.emulator.RunOutcome` into a verdict. The
    oracle is only consulted at halting points.
    """
    if outcome.kind == HALTING_POINT:
        if oracle.is_exploitable(emu, outcome.address):
            return EXPLOITABLE
        return ORACLE_REJECTED
    if outcome.kind == TIMEOUT:
        return TIMED_OUT
    error = outcome.error
    if isinstance(error, DecodeError):
        return INVALID_ASSEMBLY
    if isinstance(error, MemoryAccessError):
        return MEMORY_ERROR
    return HARD_FAULT


def bounded_run(emu, halting_points, budget):
    "run_until that reports a timeout instead of failing on a spent budget"
    if budget <= 0:
        return RunOutcome(TIMEOUT, emu.pc, 0)
    return emu.run_until(halting_points, budget)


class TraceEntry:
    "One executed instruction of a dry run"
    __slots__ = ('time', 'address', 'encoding', 'width', 'mnemonic',
                 'reads', 'writes')

    def __init__(self, time, address, encoding, width, mnemonic, reads,
                 writes):
        self.time = time
        self.address = address
        self.encoding = encoding
        self.width = width
        self.mnemonic = mnemonic
        self.reads = reads
        self.writes = writes

    def __repr__(self):
        return '%s<t=%d 0x%08x %s>' % (type(self).__name__, self.time,
                                       self.address, self.mnemonic)

    def registers_used(self):
        return tuple(sorted(self.reads | self.writes))


class DryRunTrace:
    """
    The instructions a run executed, with the registers each one read and
    wrote, and how the run ended.
    """

    def __init__(self, entries, outcome):
        self.entries = entries
        self.outcome = outcome

    def __repr__(self):
        return '%s<%d entries, %s>' % (type(self).__name__,
                                       len(self.entries), self.outcome.kind)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, index):
        return self.entries[index]

    @property
    def complete(self):
        "True when the run reached a halting point"
        return self.outcome.kind == HALTING_POINT

    @property
    def timed_out(self):
        return self.outcome.kind == TIMEOUT

    @property
    def failed(self):
        "True when a classified error ended the run"
        return not (self.complete or self.timed_out)

    def since(self, time):
        return DryRunTrace([e for e in self.entries if e.time >= time],
                           self.outcome)


class TraceRecorder:
    "Collects :py:class:`TraceEntry` objects through the emulator hooks"

    def __init__(self):
        self.entries = []
        self._reads = set()
        self._writes = set()
        self._hooks = []

    def attach(self, emu):
        hooks = emu.hooks
        self._hooks = [
            hooks.add('before_fetch', self._begin),
            hooks.add('after_register_read', self._read),
            hooks.add('after_register_write', self._written),
            hooks.add('after_execute', self._executed),
        ]
        return self

    def detach(self, emu):
        for hook in self._hooks:
            emu.hooks.remove(hook)
        self._hooks = []

    def _begin(self, emu, address):
        self._reads = set()
        self._writes = set()

    def _read(self, emu, reg, value):
        self._reads.add(reg)

    def _written(self, emu, reg, value):
        self._writes.add(reg)

    def _executed(self, emu, address, insn):
        self.entries.append(TraceEntry(
            emu.instr_count - 1, address, insn.encoding, insn.width,
            insn.mnemonic, frozenset(self._reads), frozenset(self._writes)))


def record_run(emu, halting_points, budget):
    "Runs ``emu`` with a :py:class:`TraceRecorder` attached"
    recorder = TraceRecorder().attach(emu)
    try:
        outcome = bounded_run(emu, halting_points, budget)
    finally:
        recorder.detach(emu)
    return DryRunTrace(recorder.entries, outcome)


def dry_run(config, emu=None):
    """
    Runs fault-free from ``emu`` (by default a copy of the campaign's
    prepared state) until a halting point, the campaign timeout or an
    error, and returns the :py:class:`DryRunTrace`.
    """
    if emu is None:
        emu = config.emulator.clone()
    trace = record_run(emu, config.halting_points,
                       config.start_time + config.timeout - emu.instr_count)
    if trace.failed:
        logger.warning('dry run stopped before any halting point: %s',
                       trace.outcome.error)
    return trace


def generate_model_sequences(models, max_order):
    """
    Returns the model id sequences a campaign runs, shortest first.

    Permanent models come first in a sequence, keep their relative order
    (instruction models ahead of register models) and are never permuted.
    Repeated occurrences of one model are not permuted either. Distinct
    non-permanent models appear in every order.
    """
    if not models:
        raise ConfigError('At least one fault model is required')
    if max_order < 1:
        raise ConfigError('Invalid value for `max_order` in campaign config.')
    permanent = [m for m in models if m.permanent]
    permanent.sort(key=lambda m: m.target != INSTRUCTION)
    transient = [m for m in models if not m.permanent]
    sequences = []
    seen = set()
    for order in range(1, max_order + 1):
        for count in range(min(order, len(permanent)), -1, -1):
            for head in itertools.combinations(permanent, count):
                for tail in itertools.permutations(transient, order - count):
                    ids = tuple(m.id for m in head + tail)
                    if ids not in seen:
                        seen.add(ids)
                        sequences.append(ids)
    return sequences


def _item_key(item):
    fault, path = item
    return fault.sort_key(), tuple(str(model_id) for model_id in path)


class CampaignConfig:
    """
    Everything a campaign needs.

    ``emulator`` is the prepared state the campaign starts from. ``models``
    may be a preset name, a path or a list of model dicts or
    :py:class:`~faultscope.faults.FaultModelSpec`. ``oracle`` is an
    :py:class:`~faultscope.oracles.ExploitabilityModel` or its dict form.
    ``timeout`` is the instruction budget of every run counted from the
    prepared state. With ``account_pruned`` set, skipped combinations that
    could be extended are still run (without a verdict) so that their
    extensions are counted as skipped too.
    """

    def __init__(self, emulator, models, oracle, halting_points=(),
                 max_order=1, timeout=10000, excluded_ranges=(), workers=1,
                 backend=THREAD, account_pruned=False,
                 progress_interval=10000, binary=None):
        if not isinstance(max_order, int) or max_order < 1:
            raise ConfigError('Invalid value for `max_order` in campaign '
                              'config.')
        if not isinstance(timeout, int) or timeout <= 0:
            raise ConfigError('Invalid value for `timeout` in campaign '
                              'config.')
        if not isinstance(workers, int) or workers < 1:
            raise ConfigError('Invalid value for `workers` in campaign '
                              'config.')
        if backend not in BACKENDS:
            raise ConfigError('Invalid value for `backend` in campaign '
                              'config.')
        if emulator.faults:
            raise ConfigError('The campaign start state must not carry '
                              'installed faults')
        self.emulator = emulator
        self.binary = binary
        if isinstance(models, (list, tuple)) and \
                all(isinstance(m, FaultModelSpec) for m in models):
            models = list(models)
        else:
            models = load_models(models, emulator.resolve)
        self.excluded_ranges = tuple(
            (emulator.resolve(start), emulator.resolve(end))
            for start, end in excluded_ranges)
        if self.excluded_ranges:
            models = [m.with_excluded_ranges(self.excluded_ranges)
                      for m in models]
        self.models = models
        self.oracle = oracle_from_dict(oracle)
        self.oracle.bind(emulator)
        points = set(emulator.resolve(p) for p in halting_points)
        points.update(self.oracle.halting_points())
        if not points:
            raise ConfigError('At least one halting point is required')
        self.halting_points = frozenset(points)
        self.max_order = max_order
        self.timeout = timeout
        self.workers = workers
        self.backend = backend
        self.account_pruned = account_pruned
        self.progress_interval = progress_interval
        self.start_time = emulator.instr_count
        self.oracle.prepare(emulator, self.halting_points, timeout)

    def __repr__(self):
        return '%s<%d models, order %d, timeout %d>' % (
            type(self).__name__, len(self.models), self.max_order,
            self.timeout)

    @classmethod
    def from_file(cls, path, **overrides):
        """
        Loads a JSON campaign config. Keyword arguments override keys of the
        file; see :py:func:`faultscope.config.load_config`.
        """
        from faultscope.config import load_config
        return cls(**load_config(path, **overrides))


class ExploitableCombination:
    "A reported fault combination with its verdict"

    def __init__(self, faults, verdict, halting_point):
        self.faults = tuple(faults)
        self.verdict = verdict
        self.halting_point = halting_point

    def __repr__(self):
        return '%s<%s>' % (type(self).__name__,
                           '; '.join(f.describe() for f in self.faults))

    def __eq__(self, other):
        return isinstance(other, ExploitableCombination) and \
            self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.faults)

    @property
    def order(self):
        return len(self.faults)

    def sort_key(self):
        return (len(self.faults),
                tuple(f.sort_key() for f in self.faults))

    def to_dict(self):
        return {'faults': [f.to_dict() for f in self.faults],
                'verdict': self.verdict,
                'halting_point': self.halting_point}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls([ConcreteFault.from_dict(f) for f in data['faults']],
                       data['verdict'], data['halting_point'])
        except (KeyError, TypeError, ValueError) as e:
            raise ReportError('Malformed combination in report: %s' % e)


class CampaignReport:
    """
    The result of a campaign: every exploitable combination, sorted by
    order and injection points, plus counters and timing statistics.
    """

    def __init__(self, arch, profile, start_time, run_length, timeout,
                 max_order, models, sequences, exploitable, counters,
                 stats=None, binary=None):
        self.binary = binary
        self.arch = arch
        self.profile = profile
        self.start_time = start_time
        self.run_length = run_length
        self.timeout = timeout
        self.max_order = max_order
        self.models = models
        self.sequences = [tuple(s) for s in sequences]
        self.exploitable = sorted(exploitable,
                                  key=ExploitableCombination.sort_key)
        self.counters = dict(counters)
        self.stats = dict(stats or {})

    def __repr__(self):
        return '%s<%d exploitable of %d runs>' % (
            type(self).__name__, len(self.exploitable),
            self.counters.get('combinations_executed', 0))

    def __eq__(self, other):
        "Reports compare equal when everything but the timing statistics does"
        return isinstance(other, CampaignReport) and \
            self.content() == other.content()

    def __len__(self):
        return len(self.exploitable)

    def content(self):
        data = self.to_dict()
        del data['stats']
        return data

    def per_model_counts(self):
        "Exploitable first-order faults per model id"
        counts = dict((str(m['id']), 0) for m in self.models)
        for combination in self.exploitable:
            if combination.order == 1:
                key = str(combination.faults[0].model_id)
                counts[key] = counts.get(key, 0) + 1
        return counts

    def order(self, order):
        return [c for c in self.exploitable if c.order == order]

    def to_dict(self):
        return {
            'version': REPORT_VERSION,
            'binary': self.binary,
            'arch': self.arch,
            'profile': self.profile,
            'start_time': self.start_time,
            'run_length': self.run_length,
            'timeout': self.timeout,
            'max_order': self.max_order,
            'models': self.models,
            'sequences': [list(s) for s in self.sequences],
            'exploitable': [c.to_dict() for c in self.exploitable],
            'counters': self.counters,
            'stats': self.stats,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def save(self, path):
        with open(path, 'w') as fp:
            fp.write(self.to_json())
            fp.write('\n')

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict) or \
                data.get('version') != REPORT_VERSION:
            raise ReportError('Not a faultscope report (version %r)'
                              % (data.get('version')
                                 if isinstance(data, dict) else None))
        try:
            return cls(
                data['arch'], data['profile'], data['start_time'],
                data['run_length'], data['timeout'], data['max_order'],
                data['models'], data['sequences'],
                [ExploitableCombination.from_dict(c)
                 for c in data['exploitable']],
                data['counters'], data.get('stats'), data.get('binary'))
        except (KeyError, TypeError) as e:
            raise ReportError('Malformed report: missing %s' % e)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except ValueError as e:
            raise ReportError('Report is not valid JSON: %s' % e)
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fp:
                text = fp.read()
        except OSError as e:
            raise ReportError('Cannot read report %s: %s' % (path, e))
        return cls.from_json(text)


class PhaseResult:
    "What the workers of one order produced"

    def __init__(self):
        self.exploitable = []
        self.expandable = set()
        self.counters = new_counters()

    def merge(self, other):
        self.exploitable.extend(other.exploitable)
        self.expandable |= other.expandable
        for key, value in other.counters.items():
            self.counters[key] += value


class _Cursor:
    "Snapshots of one recursion level: its start and the current time"

    def __init__(self, level):
        self.level = level
        self.at = None
        self.at_time = None


class CampaignWorker:
    """
    Works through first-level injection points for one order. Each point
    is expanded through the model sequence tree down to ``depth`` faults;
    only combinations of exactly ``depth`` faults are judged, shallower
    ones are re-entered only when an earlier order marked them expandable.
    """

    def __init__(self, campaign, emu, depth):
        self.campaign = campaign
        self.emu = emu
        self.depth = depth
        self.result = PhaseResult()
        self.counters = self.result.counters

    def process(self, items):
        self._visit((), items)
        return self.result

    def _visit(self, combination, items):
        cursor = self._open_level()
        try:
            for fault, path in items:
                if not self._move_to(cursor, fault.time):
                    logger.warning('could not advance to t=%d; skipping the '
                                   'rest of this level', fault.time)
                    break
                self._handle(combination + (fault,), path)
        finally:
            self._close_level(cursor)

    def _handle(self, candidate, path):
        campaign = self.campaign
        extendable = bool(campaign.children.get(path))
        if len(candidate) < self.depth:
            if candidate in campaign.expandable:
                trace = self._expand(candidate)
                items = campaign.child_items(trace, path)
                if len(candidate) + 1 == self.depth:
                    self.counters['points_enumerated'] += len(items)
                self._visit(candidate, items)
            return
        if campaign.prune and campaign.has_exploitable_subset(candidate):
            self.counters['combinations_pruned'] += 1
            if campaign.account_pruned and extendable:
                outcome, _ = self._run(candidate, judge=False)
                self.counters['runs_executed'] += 1
                if outcome.kind in (HALTING_POINT, TIMEOUT):
                    self.result.expandable.add(candidate)
            return
        outcome, verdict = self._run(candidate)
        self.counters['runs_executed'] += 1
        self.counters['combinations_executed'] += 1
        self.counters[VERDICT_COUNTERS[verdict]] += 1
        self._progress()
        logger.debug('%s -> %s', '; '.join(f.describe() for f in candidate),
                     verdict)
        if verdict == EXPLOITABLE:
            self.result.exploitable.append(
                ExploitableCombination(candidate, verdict, outcome.address))
            expand = not campaign.prune or campaign.account_pruned
        else:
            expand = verdict in (ORACLE_REJECTED, TIMED_OUT)
        if expand and extendable:
            self.result.expandable.add(candidate)

    def _progress(self):
        interval = self.campaign.config.progress_interval
        executed = self.counters['combinations_executed']
        if interval and executed % interval == 0:
            logger.info('%s: %d combinations of order %d run',
                        threading.current_thread().name, executed,
                        self.depth)

    # state handling
    def _open_level(self):
        return _Cursor(self.emu.snapshot())

    def _move_to(self, cursor, time):
        emu = self.emu
        if cursor.at is not None:
            if cursor.at_time == time:
                emu.restore(cursor.at)
                return True
            if cursor.at_time < time:
                emu.restore(cursor.at)
            else:
                emu.restore(cursor.level)
            emu.release(cursor.at)
            cursor.at = None
        steps = time - emu.instr_count
        if steps < 0:
            return False
        if steps:
            outcome = emu.run_until((), steps)
            if outcome.kind != TIMEOUT:
                return False
        cursor.at = emu.snapshot()
        cursor.at_time = time
        return True

    def _close_level(self, cursor):
        emu = self.emu
        emu.restore(cursor.level)
        if cursor.at is not None:
            emu.release(cursor.at)
        emu.release(cursor.level)

    def _budget(self, emu):
        return self.campaign.deadline - emu.instr_count

    def _run(self, candidate, judge=True):
        emu = self.emu
        install(candidate[-1], emu)
        campaign = self.campaign
        outcome = bounded_run(emu, campaign.halting_points, self._budget(emu))
        verdict = None
        if judge:
            verdict = classify_outcome(outcome, campaign.oracle, emu)
        return outcome, verdict

    def _expand(self, candidate):
        emu = self.emu
        install(candidate[-1], emu)
        mark = emu.snapshot()
        trace = record_run(emu, self.campaign.halting_points,
                           self._budget(emu))
        emu.restore(mark)
        emu.release(mark)
        self.counters['dry_runs'] += 1
        self.counters['runs_executed'] += 1
        return trace


class NaiveCampaignWorker(CampaignWorker):
    "Restarts emulation from the prepared state for every run"

    def _open_level(self):
        return None

    def _move_to(self, cursor, time):
        return True

    def _close_level(self, cursor):
        pass

    def _fresh(self, candidate):
        emu = self.campaign.start.clone()
        for fault in candidate:
            install(fault, emu)
        return emu

    def _run(self, candidate, judge=True):
        emu = self._fresh(candidate)
        campaign = self.campaign
        outcome = bounded_run(emu, campaign.halting_points, self._budget(emu))
        verdict = None
        if judge:
            verdict = classify_outcome(outcome, campaign.oracle, emu)
        return outcome, verdict

    def _expand(self, candidate):
        emu = self._fresh(candidate)
        trace = record_run(emu, self.campaign.halting_points,
                           self._budget(emu))
        self.counters['dry_runs'] += 1
        self.counters['runs_executed'] += 1
        return trace.since(candidate[-1].time)


class CampaignWorkerThread(threading.Thread):
    "Runs a :py:class:`CampaignWorker` over a shared queue"

    def __init__(self, worker, items, name=None, daemon=True):
        super().__init__(name=name)
        self.daemon = daemon
        self.worker = worker
        self.items = items
        self.result = None
        self.error = None

    def run(self):
        try:
            self.result = self.worker.process(_drain(self.items))
        except Exception as e:
            logger.exception('campaign worker %s failed', self.name)
            self.error = e


def _drain(items):
    while True:
        try:
            item = items.get_nowait()
        except queue.Empty:
            return
        yield item


class WorkerSchedule:
    """
    The pull queue of first-level injection points shared by the workers
    of one order, and how many workers can be busy with it.
    """

    def __init__(self, items, workers, sequences=None):
        self.items = list(items)
        self.queue = queue.Queue()
        for item in self.items:
            self.queue.put(item)
        self.total = len(self.items)
        self.workers = max(1, min(workers, self.total))
        self.sequences = sequences

    def __repr__(self):
        return '%s<%d items, %d workers>' % (type(self).__name__,
                                             self.total, self.workers)


def schedule_workers(config, items=None):
    """
    Returns the :py:class:`WorkerSchedule` for the first order of a
    campaign. Without ``items`` the first-level injection points are taken
    from a fresh dry run.
    """
    campaign = Campaign(config)
    if items is None:
        items = campaign.child_items(dry_run(config), ())
    return WorkerSchedule(items, config.workers, campaign.sequences)


class Campaign:
    """
    One campaign over ``config``. ``naive`` restarts every run from the
    prepared state; ``prune=False`` disables subset pruning. ``models`` and
    ``max_order`` override the config.
    """

    def __init__(self, config, naive=False, prune=True, models=None,
                 max_order=None):
        self.config = config
        self.naive = naive
        self.prune = prune
        self.account_pruned = config.account_pruned
        models = list(models if models is not None else config.models)
        self.models = {}
        for model in models:
            known = self.models.setdefault(model.id, model)
            if known != model:
                raise ModelError('Fault model id %s is used for two '
                                 'different models' % model.id)
        self.model_list = models
        self.max_order = max_order or config.max_order
        self.sequences = generate_model_sequences(models, self.max_order)
        self.children = {}
        for sequence in self.sequences:
            for i, model_id in enumerate(sequence):
                siblings = self.children.setdefault(sequence[:i], [])
                if model_id not in siblings:
                    siblings.append(model_id)
        self.start = config.emulator
        self.oracle = config.oracle
        self.halting_points = config.halting_points
        self.deadline = config.start_time + config.timeout
        self.base_trace = None
        self.exploitable_sets = set()
        self.expandable = set()

    def child_items(self, trace, path):
        """
        Injection points of every model that may follow ``path``. Permanent
        models act from the start of the run, so their points always come
        from the fault-free trace of the start state.
        """
        base = self.base_trace if self.base_trace is not None else trace
        start = self.config.start_time
        items = []
        for model_id in self.children.get(path, ()):
            model = self.models[model_id]
            points = enumerate_injection_points(
                model, base if model.permanent else trace, start)
            items.extend((point, path + (model_id,)) for point in points)
        items.sort(key=_item_key)
        return items

    def has_exploitable_subset(self, candidate):
        sets = self.exploitable_sets
        if not sets:
            return False
        for size in range(1, len(candidate)):
            for subset in itertools.combinations(candidate, size):
                if frozenset(subset) in sets:
                    return True
        return False

    def new_worker(self, depth, emu=None):
        if emu is None:
            emu = self.start.clone()
        cls = NaiveCampaignWorker if self.naive else CampaignWorker
        return cls(self, emu, depth)

    def run(self):
        config = self.config
        started = time.time()
        total = PhaseResult()
        trace = self.base_trace = dry_run(config)
        total.counters['dry_runs'] += 1
        total.counters['runs_executed'] += 1
        top = self.child_items(trace, ())
        total.counters['points_enumerated'] += len(top)
        logger.info('fault-free run: %d instructions (%s); %d sequences, '
                    '%d first-level injection points', len(trace),
                    trace.outcome.kind, len(self.sequences), len(top))
        busiest = 1
        for depth in range(1, self.max_order + 1):
            if depth == 1:
                items = top
            else:
                items = [item for item in top
                         if (item[0],) in self.expandable]
            if not items:
                break
            schedule = WorkerSchedule(items, config.workers, self.sequences)
            busiest = max(busiest, schedule.workers)
            logger.info('order %d: %d queued points on %d worker(s)',
                        depth, schedule.total, schedule.workers)
            phase = self._run_phase(schedule, depth)
            self.exploitable_sets.update(frozenset(c.faults)
                                         for c in phase.exploitable)
            self.expandable |= phase.expandable
            total.merge(phase)
            logger.info('order %d done: %d exploitable, %d run, %d skipped',
                        depth, len(phase.exploitable),
                        phase.counters['combinations_executed'],
                        phase.counters['combinations_pruned'])
        elapsed = time.time() - started
        emu = self.start
        return CampaignReport(
            emu.arch, emu.profile.name, config.start_time, len(trace),
            config.timeout, self.max_order,
            [m.to_dict() for m in self.model_list], self.sequences,
            total.exploitable, total.counters,
            stats={
                'wall_clock': elapsed,
                'runs_per_second': total.counters['runs_executed'] / elapsed
                if elapsed > 0 else 0.0,
                'workers': busiest,
            },
            binary=config.binary)

    def _run_phase(self, schedule, depth):
        if schedule.workers == 1:
            return self.new_worker(depth).process(_drain(schedule.queue))
        if self.config.backend == PROCESS:
            try:
                multiprocessing.get_context('fork')
            except ValueError:
                logger.warning('fork is unavailable; using threads instead')
            else:
                return self._run_processes(schedule, depth)
        return self._run_threads(schedule, depth)

    def _run_threads(self, schedule, depth):
        threads = [CampaignWorkerThread(self.new_worker(depth),
                                        schedule.queue,
                                        name='faultscope-worker-%d' % i)
                   for i in range(schedule.workers)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        result = PhaseResult()
        for thread in threads:
            if thread.error is not None:
                raise thread.error
            result.merge(thread.result)
        return result

    def _run_processes(self, schedule, depth):
        context = multiprocessing.get_context('fork')
        tasks = context.Queue()
        results = context.Queue()
        for index in range(schedule.total):
            tasks.put(index)
        for _ in range(schedule.workers):
            tasks.put(None)
        processes = [context.Process(target=self._process_main,
                                     args=(schedule.items, tasks, results,
                                           depth),
                                     name='faultscope-worker-%d' % i)
                     for i in range(schedule.workers)]
        for process in processes:
            process.start()
        result = PhaseResult()
        errors = []
        for _ in processes:
            outcome = results.get()
            if isinstance(outcome, PhaseResult):
                result.merge(outcome)
            else:
                errors.append(outcome)
        for process in processes:
            process.join()
        if errors:
            raise RuntimeError('campaign worker failed: %s' % errors[0])
        return result

    def _process_main(self, items, tasks, results, depth):
        def pull():
            while True:
                index = tasks.get()
                if index is None:
                    return
                yield items[index]
        try:
            results.put(self.new_worker(depth).process(pull()))
        except Exception as e:
            logger.exception('campaign worker process failed')
            results.put('%s: %s' % (type(e).__name__, e))


def run_campaign(config, naive=False, prune=True):
    "Runs every model sequence of ``config`` and returns the report"
    return Campaign(config, naive=naive, prune=prune).run()


def sweep_first_order(config, model):
    "First-order campaign of the single ``model``"
    return Campaign(config, models=[model], max_order=1).run()
