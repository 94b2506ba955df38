"""
The ``faultscope`` command.

Subcommands:

``run``       fault-free execution of the configured binary
``simulate``  a fault campaign; writes ``report.json``
``trace``     replays one combination of a report instruction by instruction
``report``    statistics, heatmaps and scatter grids of a report

Exit codes: 0 on success, 1 when a campaign found exploitable faults, 2 on
configuration or report errors.
"""
import argparse
import json
import logging
import os
import sys

from faultscope import __version__
from faultscope.campaign import (
    BACKENDS,
    CampaignConfig,
    CampaignReport,
    bounded_run,
    run_campaign,
)
from faultscope.config import parse_config, workers_from_env
from faultscope.decoder import V6M, V7M
from faultscope.exceptions import (
    ConfigError,
    MalformedCombinationError,
    ReportError,
)
from faultscope.report import (
    DEFAULT_BINS,
    HeatmapGrid,
    ScatterGrid,
    format_combination,
    format_stats,
)
from faultscope.tracer import audit_report, replay_config


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_EXPLOITABLE = 1
EXIT_CONFIG = 2

REPORT_FILE = 'report.json'


def _oracle(value):
    "A JSON object, the path of a JSON file, or a bare oracle name"
    text = value.strip()
    if text.startswith('{'):
        try:
            return json.loads(text)
        except ValueError as e:
            raise argparse.ArgumentTypeError('invalid oracle JSON: %s' % e)
    if os.path.exists(text):
        try:
            with open(text) as fp:
                return json.load(fp)
        except (OSError, ValueError) as e:
            raise argparse.ArgumentTypeError('cannot read oracle: %s' % e)
    return {'name': text}


def _campaign_arguments(parser):
    group = parser.add_argument_group('campaign')
    group.add_argument('--config', help='campaign config (JSON)')
    group.add_argument('--binary', help='flat binary or ELF file')
    group.add_argument('--symbols', help='symbol map (JSON or nm output)')
    group.add_argument('--workers', type=int,
                       help='worker count (default: $FAULTSCOPE_WORKERS '
                       'or 1)')
    group.add_argument('--backend', choices=BACKENDS)
    group.add_argument('--max-order', type=int, dest='max_order')
    group.add_argument('--timeout', type=int,
                       help='instruction budget per run')
    group.add_argument('--models', help='preset name or JSON file')
    group.add_argument('--oracle', type=_oracle,
                       help='oracle name, JSON object or JSON file')
    group.add_argument('--halting-point', action='append',
                       dest='halting_points', metavar='ADDRESS',
                       help='symbol or address; may be repeated')
    group.add_argument('--arch', choices=(V6M, V7M))
    group.add_argument('--profile', help='profile name or JSON file')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='faultscope',
        description='Exhaustive fault injection simulation for ARMv6-M '
                    'firmware.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    parser.add_argument('-v', '--verbose', action='count', default=0)
    parser.add_argument('-q', '--quiet', action='store_true')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    run = commands.add_parser('run', help='fault-free execution')
    _campaign_arguments(run)
    run.set_defaults(handler=cmd_run)

    simulate = commands.add_parser('simulate', help='run a fault campaign')
    _campaign_arguments(simulate)
    simulate.add_argument('--out', default='.',
                          help='directory for report.json')
    simulate.add_argument('--audit', action='store_true',
                          help='replay every reported combination')
    simulate.add_argument('--naive', action='store_true',
                          help='restart emulation for every run')
    simulate.add_argument('--no-prune', action='store_false', dest='prune',
                          help='do not skip supersets of exploitable '
                               'combinations')
    simulate.set_defaults(handler=cmd_simulate)

    trace = commands.add_parser('trace', help='replay one combination')
    _campaign_arguments(trace)
    trace.add_argument('report', help='report JSON')
    trace.add_argument('--index', type=int, default=0,
                       help='combination index in the report')
    trace.add_argument('--json', action='store_true')
    trace.set_defaults(handler=cmd_trace)

    report = commands.add_parser('report', help='inspect a report')
    report.add_argument('report', help='report JSON')
    report.add_argument('--stats', action='store_true')
    report.add_argument('--heatmap', action='store_true',
                        help='write heatmap.csv and heatmap.pgm')
    report.add_argument('--scatter', action='store_true',
                        help='write scatter.csv')
    report.add_argument('--bins', type=int, default=DEFAULT_BINS)
    report.add_argument('--out', default='.')
    report.set_defaults(handler=cmd_report)
    return parser


def configure_logging(args):
    if args.quiet:
        level = logging.ERROR
    elif args.verbose >= 2:
        level = logging.DEBUG
    elif args.verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format='%(asctime)s %(name)s %(levelname)s '
                               '%(message)s')


def config_from_args(args):
    """
    Builds the :py:class:`~faultscope.campaign.CampaignConfig` from
    ``--config`` and the flags overriding it.
    """
    workers = args.workers
    if workers is None:
        workers = workers_from_env(default=None)
    overrides = {
        'binary': args.binary,
        'symbols': args.symbols,
        'workers': workers,
        'backend': args.backend,
        'max_order': args.max_order,
        'timeout': args.timeout,
        'models': args.models,
        'oracle': args.oracle,
        'halting_points': args.halting_points,
        'arch': args.arch,
        'profile': args.profile,
    }
    if args.config:
        return CampaignConfig.from_file(args.config, **overrides)
    data = dict((name, value) for name, value in overrides.items()
                if value is not None)
    if 'binary' not in data:
        raise ConfigError('Either --config or --binary is required')
    return CampaignConfig(**parse_config(data))


def _mkdir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ConfigError('Cannot create %s: %s' % (path, e))


def cmd_run(args):
    config = config_from_args(args)
    emu = config.emulator.clone()
    outcome = bounded_run(emu, config.halting_points,
                          config.start_time + config.timeout - emu.instr_count)
    print('%s at 0x%08x after %d instructions'
          % (outcome.classification, outcome.address, outcome.executed))
    for name, value in emu.registers().items():
        print('%-5s %08x' % (name, value))
    return EXIT_OK


def cmd_simulate(args):
    config = config_from_args(args)
    report = run_campaign(config, naive=args.naive, prune=args.prune)
    _mkdir(args.out)
    path = os.path.join(args.out, REPORT_FILE)
    report.save(path)
    print('%d exploitable combinations in %d runs; report written to %s'
          % (len(report), report.counters['combinations_executed'], path))
    if args.audit:
        audit = audit_report(config, report)
        print('audit: %d replayed, %d mismatches'
              % (audit.checked, len(audit.mismatches)))
        for index, reported, got in audit.mismatches:
            print('  #%d reported %s, replayed %s' % (index, reported, got))
    return EXIT_EXPLOITABLE if report.exploitable else EXIT_OK


def cmd_trace(args):
    report = CampaignReport.load(args.report)
    try:
        combination = report.exploitable[args.index]
    except IndexError:
        raise ReportError('Report has no combination #%d (%d available)'
                          % (args.index, len(report)))
    config = config_from_args(args)
    verdict, records = replay_config(config, combination.faults)
    if args.json:
        print(json.dumps({'verdict': verdict,
                          'combination': combination.to_dict(),
                          'trace': [r.to_dict() for r in records]},
                         indent=2))
    else:
        print(format_combination(args.index, combination))
        for record in records:
            print(record.format())
        print('verdict: %s' % verdict)
    return EXIT_OK


def cmd_report(args):
    report = CampaignReport.load(args.report)
    if args.bins < 1:
        raise ConfigError('Invalid value for `bins`.')
    if args.stats:
        print(format_stats(report))
    if args.heatmap or args.scatter:
        _mkdir(args.out)
    if args.heatmap:
        grid = HeatmapGrid.from_report(report, args.bins)
        grid.write_csv(os.path.join(args.out, 'heatmap.csv'))
        grid.write_pgm(os.path.join(args.out, 'heatmap.pgm'))
    if args.scatter:
        ScatterGrid.from_report(report).write_csv(
            os.path.join(args.out, 'scatter.csv'))
    if not (args.stats or args.heatmap or args.scatter):
        for index, combination in enumerate(report.exploitable):
            print(format_combination(index, combination))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args)
    try:
        return args.handler(args)
    except (ConfigError, MalformedCombinationError, ReportError) as e:
        sys.stderr.write('faultscope: %s\n' % e)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
