import csv

import pytest

from faultscope.campaign import run_campaign, sweep_first_order
from faultscope.faults import PERMANENT, REGISTER, FaultModelSpec
from faultscope.report import (
    DEFAULT_BINS,
    HeatmapGrid,
    ScatterGrid,
    format_combination,
    format_stats,
    heatmap_bin,
)


@pytest.fixture()
def skip_report(straight_line):
    return run_campaign(straight_line.config())


class TestHeatmapBin:
    def test_proportional(self):
        assert heatmap_bin(500, 1000, 200) == 100
        assert heatmap_bin(999, 1000, 200) == 199
        assert heatmap_bin(1, 1000, 200) == 0

    def test_clamped(self):
        assert heatmap_bin(0, 1000) == 0
        assert heatmap_bin(-3, 1000) == 0
        assert heatmap_bin(5000, 1000, 200) == 199

    def test_empty_run(self):
        assert heatmap_bin(10, 0) == 0

    def test_more_bins_than_instructions(self):
        assert [heatmap_bin(t, 5, 200) for t in range(5)] == [0, 40, 80, 120,
                                                              160]

    def test_bins_must_be_positive(self):
        with pytest.raises(ValueError):
            heatmap_bin(1, 10, 0)
        with pytest.raises(ValueError):
            HeatmapGrid(10, bins=0)


class TestHeatmapGrid:
    def test_from_report(self, skip_report):
        grid = HeatmapGrid.from_report(skip_report, bins=5)
        assert grid.rows == {'5': [0, 0, 1, 1, 1]}
        assert grid.row_sums() == {'5': 3}
        assert grid.peak == 1

    def test_default_bins(self, skip_report):
        grid = HeatmapGrid.from_report(skip_report)
        row = grid.rows['5']
        assert len(row) == DEFAULT_BINS
        assert [i for i, count in enumerate(row) if count] == [80, 120, 160]

    def test_permanent_models_have_no_row(self, straight_line):
        model = FaultModelSpec(9, REGISTER, PERMANENT, 'clear',
                               registers=['r1'])
        report = sweep_first_order(straight_line.config(), model)
        assert len(report) == 1
        grid = HeatmapGrid.from_report(report, bins=5)
        assert grid.rows == {}
        assert grid.peak == 0

    def test_add(self):
        grid = HeatmapGrid(100, bins=10, models=[20])
        grid.add(20, 15)
        grid.add(20, 19)
        grid.add('21', 99)
        assert grid.rows['20'][1] == 2
        assert grid.rows['21'][9] == 1
        assert grid.row_sums() == {'20': 2, '21': 1}

    def test_write_csv(self, tmpdir, skip_report):
        path = str(tmpdir.join('heatmap.csv'))
        HeatmapGrid.from_report(skip_report, bins=5).write_csv(path)
        with open(path, newline='') as fp:
            rows = list(csv.reader(fp))
        assert rows == [['model', 'bin0', 'bin1', 'bin2', 'bin3', 'bin4'],
                        ['5', '0', '0', '1', '1', '1']]

    def test_to_pgm(self):
        grid = HeatmapGrid(4, bins=4, models=['a', 'b'])
        grid.add('a', 1)
        grid.add('a', 1)
        grid.add('b', 3)
        assert grid.to_pgm() == b'P5\n4 2\n255\n' + bytes(
            [0, 255, 0, 0, 0, 0, 0, 127])

    def test_empty_pgm(self):
        assert HeatmapGrid(4, bins=3).to_pgm() == b'P5\n3 1\n255\n' + \
            bytes(3)

    def test_write_pgm(self, tmpdir, skip_report):
        path = tmpdir.join('heatmap.pgm')
        HeatmapGrid.from_report(skip_report, bins=5).write_pgm(str(path))
        assert path.read_binary() == b'P5\n5 1\n255\n' + bytes(
            [0, 0, 255, 255, 255])


class TestScatterGrid:
    def test_double_fault(self, double_fault):
        report = run_campaign(double_fault.config(max_order=2))
        grid = ScatterGrid.from_report(report)
        assert len(grid) == 1
        start = report.start_time
        assert grid.triples() == [(1 - start, 2 - start, 1)]

    def test_first_order_only(self, skip_report):
        assert len(ScatterGrid.from_report(skip_report)) == 0

    def test_counts_and_csv(self, tmpdir):
        grid = ScatterGrid()
        grid.add(3, 7)
        grid.add(1, 2)
        grid.add(3, 7)
        assert grid.triples() == [(1, 2, 1), (3, 7, 2)]
        path = str(tmpdir.join('scatter.csv'))
        grid.write_csv(path)
        with open(path, newline='') as fp:
            assert list(csv.reader(fp)) == [['t1', 't2', 'count'],
                                            ['1', '2', '1'], ['3', '7', '2']]


class TestFormatting:
    def test_stats(self, skip_report):
        text = format_stats(skip_report)
        lines = text.splitlines()
        assert lines[0].startswith('arch: v6m')
        assert 'run length: 5' in lines[0]
        assert any(line.split() == ['exploitable', '3'] for line in lines)
        assert any(line.split() == ['memory_errors', '1'] for line in lines)
        assert 'exploitable per model:' in lines
        assert '  5' in text
        assert 'workers:' in lines[-1]

    def test_combination(self, skip_report):
        text = format_combination(0, skip_report.exploitable[0])
        assert text == ('#0 order 1 at 0x0000800a: t=2 '
                        'instruction@0x00008004 transient skip (model 5)')
