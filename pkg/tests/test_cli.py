import json
import os

import pytest

from faultscope import __version__
from faultscope.campaign import CampaignReport
from faultscope.cli import (
    EXIT_CONFIG,
    EXIT_EXPLOITABLE,
    EXIT_OK,
    _oracle,
    build_parser,
    config_from_args,
    main,
)
from faultscope.config import WORKERS_ENV
from faultscope.exceptions import ConfigError


@pytest.fixture()
def workspace(tmpdir, straight_line):
    "A flat binary, its symbol map and a campaign config on disk"
    program = straight_line.program
    tmpdir.join('firmware.bin').write_binary(program.image)
    tmpdir.join('symbols.json').write(json.dumps(program.symbols))
    tmpdir.join('campaign.json').write(json.dumps({
        'binary': 'firmware.bin',
        'symbols': 'symbols.json',
        'boot': {'pc': '0x8000', 'sp': '0x20010000'},
        'models': 'skip',
        'oracle': dict(straight_line.oracle),
        'timeout': 100,
    }))
    return tmpdir


@pytest.fixture()
def simulated(workspace):
    out = str(workspace.join('out'))
    assert main(['simulate', '--config', str(workspace.join('campaign.json')),
                 '--out', out]) == EXIT_EXPLOITABLE
    return os.path.join(out, 'report.json')


class TestRun:
    def test_fault_free_run(self, workspace, capsys):
        assert main(['run', '--config',
                     str(workspace.join('campaign.json'))]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == 'halting-point at 0x0000800a after 5 instructions'
        assert 'r2    00000003' in lines


class TestSimulate:
    def test_writes_the_report(self, workspace, simulated, capsys):
        report = CampaignReport.load(simulated)
        assert len(report) == 3
        assert report.binary == 'firmware.bin'
        assert '3 exploitable combinations in 5 runs' in \
            capsys.readouterr().out

    def test_audit(self, workspace, capsys):
        assert main(['simulate', '--config',
                     str(workspace.join('campaign.json')),
                     '--out', str(workspace), '--audit']) == EXIT_EXPLOITABLE
        assert 'audit: 3 replayed, 0 mismatches' in capsys.readouterr().out

    def test_naive_and_unpruned(self, workspace):
        assert main(['simulate', '--config',
                     str(workspace.join('campaign.json')),
                     '--out', str(workspace), '--naive',
                     '--no-prune']) == EXIT_EXPLOITABLE

    def test_nothing_exploitable(self, workspace):
        # r3 is never read
        workspace.join('models.json').write(json.dumps({'models': [
            {'id': 30, 'target': 'register', 'lifetime': 'transient',
             'effect': 'clear', 'registers': ['r3']}]}))
        assert main(['simulate', '--config',
                     str(workspace.join('campaign.json')),
                     '--out', str(workspace),
                     '--models', 'models.json']) == EXIT_OK
        report = CampaignReport.load(str(workspace.join('report.json')))
        assert [m['id'] for m in report.models] == [30]

    def test_unknown_preset(self, workspace):
        assert main(['simulate', '--config',
                     str(workspace.join('campaign.json')),
                     '--models', 'everything']) == EXIT_CONFIG

    def test_missing_config_and_binary(self, capsys):
        assert main(['simulate']) == EXIT_CONFIG
        assert 'Either --config or --binary' in capsys.readouterr().err

    def test_unreadable_config(self, tmpdir):
        assert main(['simulate', '--config',
                     str(tmpdir.join('missing.json'))]) == EXIT_CONFIG

    def test_unknown_config_key(self, workspace, capsys):
        path = workspace.join('campaign.json')
        data = json.loads(path.read())
        data['colour'] = 'blue'
        path.write(json.dumps(data))
        assert main(['simulate', '--config', str(path)]) == EXIT_CONFIG
        assert 'colour' in capsys.readouterr().err


class TestWorkersFromEnvironment:
    def args(self, workspace, *extra):
        return build_parser().parse_args(
            ['simulate', '--config', str(workspace.join('campaign.json'))]
            + list(extra))

    def test_environment(self, workspace, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, '2')
        assert config_from_args(self.args(workspace)).workers == 2

    def test_flag_wins(self, workspace, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, '2')
        config = config_from_args(self.args(workspace, '--workers', '3'))
        assert config.workers == 3

    def test_default(self, workspace, monkeypatch):
        monkeypatch.delenv(WORKERS_ENV, raising=False)
        assert config_from_args(self.args(workspace)).workers == 1

    def test_invalid_environment(self, workspace, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, 'zero')
        with pytest.raises(ConfigError):
            config_from_args(self.args(workspace))
        assert main(['simulate', '--config',
                     str(workspace.join('campaign.json'))]) == EXIT_CONFIG


class TestTrace:
    def test_text(self, workspace, simulated, capsys):
        capsys.readouterr()
        assert main(['trace', '--config',
                     str(workspace.join('campaign.json')),
                     simulated]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith('#0 order 1 at 0x0000800a: t=2 ')
        assert 'fault inject' in out
        assert out.rstrip().endswith('verdict: Exploitable')

    def test_json(self, workspace, simulated, capsys):
        capsys.readouterr()
        assert main(['trace', '--config',
                     str(workspace.join('campaign.json')), simulated,
                     '--index', '2', '--json']) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data['verdict'] == 'Exploitable'
        assert data['combination']['faults'][0]['time'] == 4
        assert len(data['trace']) == 5

    def test_index_out_of_range(self, workspace, simulated, capsys):
        assert main(['trace', '--config',
                     str(workspace.join('campaign.json')), simulated,
                     '--index', '9']) == EXIT_CONFIG
        assert 'no combination #9' in capsys.readouterr().err


class TestReport:
    def test_lists_combinations(self, simulated, capsys):
        capsys.readouterr()
        assert main(['report', simulated]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 3
        assert lines[0].startswith('#0 order 1')

    def test_stats(self, simulated, capsys):
        capsys.readouterr()
        assert main(['report', simulated, '--stats']) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith('arch: v6m')
        assert 'combinations_executed' in out

    def test_heatmap_and_scatter(self, tmpdir, simulated):
        out = tmpdir.join('views')
        assert main(['report', simulated, '--heatmap', '--scatter',
                     '--bins', '5', '--out', str(out)]) == EXIT_OK
        assert out.join('heatmap.csv').read().splitlines()[1] == \
            '5,0,0,1,1,1'
        assert out.join('heatmap.pgm').read_binary().startswith(
            b'P5\n5 1\n255\n')
        assert out.join('scatter.csv').read().splitlines() == [
            't1,t2,count']

    def test_bad_bins(self, simulated):
        assert main(['report', simulated, '--bins', '0']) == EXIT_CONFIG

    def test_not_a_report(self, tmpdir, capsys):
        path = tmpdir.join('report.json')
        path.write('{"version": 99}')
        assert main(['report', str(path)]) == EXIT_CONFIG
        assert main(['report', str(tmpdir.join('missing.json'))]) == \
            EXIT_CONFIG


class TestParser:
    def test_command_is_required(self, capsys):
        with pytest.raises(SystemExit) as e:
            main([])
        assert e.value.code == 2

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(['--version'])
        assert e.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_oracle_argument(self, tmpdir):
        assert _oracle('address-reached') == {'name': 'address-reached'}
        assert _oracle(' {"name": "dfa-aes"} ') == {'name': 'dfa-aes'}
        path = tmpdir.join('oracle.json')
        path.write('{"name": "address-reached", "target": "grant"}')
        assert _oracle(str(path))['target'] == 'grant'
