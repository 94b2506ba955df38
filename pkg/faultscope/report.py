"""
Views of a :py:class:`~faultscope.campaign.CampaignReport`: first-order
heatmaps over execution time, second-order scatter grids and plain-text
statistics.
"""
import csv
import logging

from faultscope.faults import PERMANENT


logger = logging.getLogger(__name__)


DEFAULT_BINS = 200


def heatmap_bin(time, length, bins=DEFAULT_BINS):
    """
    The bin of instruction index ``time`` in a run of ``length``
    instructions. Bin ``i`` covers ``[i*length/bins, (i+1)*length/bins)``;
    the last bin also takes everything beyond.
    """
    if bins < 1:
        raise ValueError('bins must be positive')
    if length <= 0 or time <= 0:
        return 0
    return min(time * bins // length, bins - 1)


class HeatmapGrid:
    """
    Exploitable first-order faults per model and time bin. Only models
    whose faults have a time of effect (transient and until-overwrite) get
    a row.
    """

    def __init__(self, length, bins=DEFAULT_BINS, models=()):
        if bins < 1:
            raise ValueError('bins must be positive')
        self.length = length
        self.bins = bins
        self.rows = dict((str(m), [0] * bins) for m in models)

    def __repr__(self):
        return '%s<%d rows x %d bins>' % (type(self).__name__,
                                          len(self.rows), self.bins)

    @classmethod
    def from_report(cls, report, bins=DEFAULT_BINS):
        models = [m['id'] for m in report.models
                  if m['lifetime'] != PERMANENT]
        grid = cls(report.run_length, bins, models)
        for combination in report.order(1):
            fault = combination.faults[0]
            if str(fault.model_id) in grid.rows:
                grid.add(fault.model_id, fault.time - report.start_time)
        return grid

    def add(self, model_id, time):
        row = self.rows.setdefault(str(model_id), [0] * self.bins)
        row[heatmap_bin(time, self.length, self.bins)] += 1

    def row_sums(self):
        return dict((model, sum(row)) for model, row in self.rows.items())

    @property
    def peak(self):
        return max([max(row) for row in self.rows.values()] or [0])

    def write_csv(self, path):
        with open(path, 'w', newline='') as fp:
            writer = csv.writer(fp)
            writer.writerow(['model'] + ['bin%d' % i
                                         for i in range(self.bins)])
            for model, row in self.rows.items():
                writer.writerow([model] + row)

    def to_pgm(self):
        """
        A binary portable graymap, one pixel row per model. Brightness is
        proportional to the bin count.
        """
        peak = self.peak
        header = b'P5\n%d %d\n255\n' % (self.bins, max(1, len(self.rows)))
        pixels = bytearray()
        for row in self.rows.values():
            pixels.extend(255 * count // peak if peak else 0
                          for count in row)
        if not self.rows:
            pixels.extend(bytes(self.bins))
        return header + bytes(pixels)

    def write_pgm(self, path):
        with open(path, 'wb') as fp:
            fp.write(self.to_pgm())


class ScatterGrid:
    "``(t1, t2, count)`` of the exploitable second-order combinations"

    def __init__(self):
        self.counts = {}

    def __repr__(self):
        return '%s<%d points>' % (type(self).__name__, len(self.counts))

    def __len__(self):
        return len(self.counts)

    @classmethod
    def from_report(cls, report):
        grid = cls()
        for combination in report.order(2):
            first, second = combination.faults
            grid.add(first.time - report.start_time,
                     second.time - report.start_time)
        return grid

    def add(self, t1, t2):
        self.counts[(t1, t2)] = self.counts.get((t1, t2), 0) + 1

    def triples(self):
        return [(t1, t2, count)
                for (t1, t2), count in sorted(self.counts.items())]

    def write_csv(self, path):
        with open(path, 'w', newline='') as fp:
            writer = csv.writer(fp)
            writer.writerow(['t1', 't2', 'count'])
            writer.writerows(self.triples())


def format_stats(report):
    "The counters, per-model counts and timing of ``report`` as text"
    lines = ['arch: %s  profile: %s  run length: %d  max order: %d'
             % (report.arch, report.profile, report.run_length,
                report.max_order)]
    for name, value in report.counters.items():
        lines.append('%-24s %d' % (name, value))
    lines.append('exploitable per model:')
    for model, count in report.per_model_counts().items():
        lines.append('  %-22s %d' % (model, count))
    stats = report.stats
    if stats:
        lines.append('wall clock: %.2fs  runs/s: %.1f  workers: %s'
                     % (stats.get('wall_clock', 0.0),
                        stats.get('runs_per_second', 0.0),
                        stats.get('workers')))
    return '\n'.join(lines)


def format_combination(index, combination):
    return '#%d order %d at 0x%08x: %s' % (
        index, combination.order, combination.halting_point,
        '; '.join(f.describe() for f in combination.faults))
