"""
The "manet" module is the command line front door of the simulator.

Commands:
    scen gen   Generate the movement and traffic files of a scenario.
    run        Simulate one protocol over a scenario directory and write the trace.
    metrics    Compute the four metrics of a trace into a CSV file.
    sweep      Run the whole pause/speed matrix, optionally checking the expected trends.
    plot       Aggregate a results CSV into pivot tables and SVG charts.

Exit codes: 0 success, 1 bad arguments or configuration, 2 runtime failure,
3 acceptance check failure.

Functions:
    - build_parser: The argparse parser of every command.
    - main: Entry point.
"""

import argparse
import logging
import os
import sys

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))

from app.src.errors import ConfigError, ManetError, ScenarioError
from app.src.harness import acceptance, plot, runner
from app.src.harness.scenario import generate_scenario, write_scenario
from app.src.settings import settings
from app.src.settings.config import load_config

logger = logging.getLogger('manet')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2
EXIT_CHECK = 3


class CliParser(argparse.ArgumentParser):
    """Argument parser that exits with the bad-arguments code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')


def _protocol_list(text):
    names = [name.strip().lower() for name in text.split(',') if name.strip()]
    unknown = [name for name in names if name not in settings.protocols]
    if not names or unknown:
        raise argparse.ArgumentTypeError(f'expected a comma separated subset of {",".join(settings.protocols)}')
    return names


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value < 1:
            raise argparse.ArgumentTypeError(f'must be at least 1, got {text}')
        return value
    return parse


def build_parser():
    parser = CliParser(prog='manet', description='MANET routing protocol simulator and benchmark harness.')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for progress, -vv for debug output')
    commands = parser.add_subparsers(dest='command', required=True)

    scen = commands.add_parser('scen', help='scenario files')
    scen_commands = scen.add_subparsers(dest='action', required=True)
    gen = scen_commands.add_parser('gen', help='generate a random waypoint scenario')
    gen.add_argument('--nodes', type=_positive(int), required=True)
    gen.add_argument('--pause', type=float, required=True)
    gen.add_argument('--speed-max', type=float, required=True)
    gen.add_argument('--speed-min', type=float, default=settings.speed_min)
    gen.add_argument('--seed', type=int, required=True)
    gen.add_argument('--duration', type=float, default=settings.duration_s)
    gen.add_argument('--connections', type=_positive(int), default=None,
                     help='number of CBR connections (20 up to 30 nodes, 40 above by default)')
    gen.add_argument('--out', required=True)

    run = commands.add_parser('run', help='simulate one protocol over a scenario')
    run.add_argument('--protocol', choices=settings.protocols, type=str.lower, required=True)
    run.add_argument('--scenario', required=True)
    run.add_argument('--out', required=True)
    run.add_argument('--config', default=None, help='overrides file with "section.field = value" lines')
    run.add_argument('--warmup', type=float, default=0.0)

    metrics = commands.add_parser('metrics', help='compute the metrics of a trace')
    metrics.add_argument('--trace', required=True)
    metrics.add_argument('--out', required=True)
    metrics.add_argument('--warmup', type=float, default=0.0)

    sweep = commands.add_parser('sweep', help='run the full scenario matrix')
    sweep.add_argument('--seeds', type=_positive(int), default=settings.default_seeds)
    sweep.add_argument('--out', required=True)
    sweep.add_argument('--protocols', type=_protocol_list, default=list(settings.protocols))
    sweep.add_argument('--jobs', type=_positive(int), default=None)
    sweep.add_argument('--config', default=None)
    sweep.add_argument('--check', action='store_true', help='evaluate the acceptance checks, exit 3 on failure')

    charts = commands.add_parser('plot', help='aggregate results into pivots and SVG charts')
    charts.add_argument('--results', required=True)
    charts.add_argument('--out', required=True)
    return parser


def _configure_logging(verbosity):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def _scen_gen(args):
    scenario = generate_scenario(args.nodes, args.pause, args.speed_max, args.seed, speed_min=args.speed_min,
                                 duration_s=args.duration, connections=args.connections)
    write_scenario(scenario, args.out)
    print(f'scenario written to {args.out}')
    return EXIT_OK


def _run(args):
    config = load_config(args.config)
    outcome = runner.run_directory(args.protocol, args.scenario, args.out, config, args.warmup)
    print(f'{outcome.result.records} records, sha256 {outcome.result.digest}')
    return EXIT_OK


def _metrics(args):
    row = runner.trace_metrics(args.trace, args.warmup)
    runner.write_rows([row], args.out)
    print(', '.join(f'{key}={row[key]}' for key in ('throughput', 'avg_delay_s', 'dropped', 'overhead')))
    return EXIT_OK


def _sweep(args):
    config = load_config(args.config)
    results = runner.sweep(args.out, args.seeds, args.protocols, args.jobs, config)
    print(f'{len(results)} runs written to {os.path.join(args.out, "metrics.csv")}')
    if not args.check:
        return EXIT_OK
    checks = acceptance.evaluate(results)
    for check in checks:
        print(check)
    return EXIT_CHECK if acceptance.failures(checks) else EXIT_OK


def _plot(args):
    charts = plot.plot_results(args.results, args.out)
    print(f'{len(charts)} charts written to {args.out}')
    return EXIT_OK


def main(argv=None):
    """Parse the command line, run the command and return the exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        match args.command:
            case 'scen':
                return _scen_gen(args)
            case 'run':
                return _run(args)
            case 'metrics':
                return _metrics(args)
            case 'sweep':
                return _sweep(args)
            case 'plot':
                return _plot(args)
    except (ConfigError, ScenarioError) as error:
        logger.error('%s', error)
        return EXIT_USAGE
    except ManetError as error:
        logger.error('%s', error)
        return EXIT_FAILURE
    return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
