"""
Command-line driver for counting sweeps, exponent fits and certified checks.

Reports go to stdout or to --output; logs go to stderr, so CSV and JSON
output can be piped safely.
"""

import argparse
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from popcorn_dimension import __version__
from popcorn_dimension.analysis import (
    ScalingSample,
    VerificationResult,
    estimate_spectrum,
    fit_box_dimension,
    theoretical_spectrum,
    verify_chung_erdos_chain,
    verify_duffin_schaeffer,
    verify_horizontal_gap,
    verify_local_ds,
    verify_square_estimate,
    verify_strip_lemma,
    verify_totient,
    verify_upper_bound,
)
from popcorn_dimension.config import load_config
from popcorn_dimension.covering import (
    CostGuardError,
    MeshError,
    OracleTooLargeError,
    Region,
    ScaleOrderError,
    brute_force_count,
    grid_count_full_set,
    grid_count_reciprocal_set,
    grid_count_strip,
)
from popcorn_dimension.numtheory import EmptyStripError, RangeError
from popcorn_dimension.popcorn import DomainError
from popcorn_dimension.utils import (
    CSV_FIELDS,
    ReportWriteError,
    format_csv,
    format_json,
    parse_rational,
    parse_rational_list,
    save_loglog_plot,
    write_text_report,
)

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VERIFICATION = 2
EXIT_COST_GUARD = 3
EXIT_USAGE = 64

COMMANDS = ('count', 'boxdim', 'spectrum', 'verify', 'oracle')
FORMATS = ('csv', 'json', 'svg', 'png')
SUITES = ('duffin-schaeffer', 'local-ds', 'strip-lemma', 'totient', 'chung-erdos',
          'square-estimate', 'horizontal-gap', 'upper-bound')
DEFAULT_FORMAT = {'count': 'csv', 'boxdim': 'json', 'spectrum': 'json', 'verify': 'json', 'oracle': 'csv'}
DEFAULT_THETAS = tuple(Fraction(k, 10) for k in range(2, 9))

SUITE_DEFAULTS = {
    'duffin-schaeffer': {'nmax': 300, 'delta': Fraction(1, 10 ** 7)},
    'local-ds': {'lmax': 200, 'n': 100, 'delta': Fraction(1, 10 ** 8)},
    'strip-lemma': {'delta': Fraction(1, 10 ** 6), 'kmax': 99},
    'totient': {'lo': 3, 'hi': 10_000},
    'chung-erdos': {'meshes': (Fraction(1, 2 ** 10), Fraction(1, 2 ** 12))},
    'square-estimate': {'trials': 10_000, 'seed': 0},
    'horizontal-gap': {'lmax': 200, 'n': 100},
    'upper-bound': {'meshes': tuple(Fraction(1, 2 ** k) for k in range(4, 11))},
}


class UsageError(Exception):
    """Raised for command lines that parse but cannot be run."""
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _rational_list(text: str) -> List[Fraction]:
    try:
        return parse_rational_list(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _echo_value(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, tuple):
        return [_echo_value(item) for item in value]
    return value


@dataclass(frozen=True)
class RunConfig:
    """A fully parsed command; everything run() needs and nothing else."""

    command: str
    meshes: Tuple[Fraction, ...] = ()
    preset: Optional[str] = None
    q_max: Optional[int] = None
    thetas: Tuple[Fraction, ...] = ()
    n_range: Tuple[int, int] = (3, 12)
    output_format: str = 'csv'
    workers: int = 1
    cost_guard: Optional[int] = None
    output: Optional[str] = None
    mode: str = 'full'
    point_set: str = 'popcorn'
    strip: Optional[int] = None
    suites: Tuple[str, ...] = ()
    suite_options: Dict[str, dict] = field(default_factory=dict)
    epsilon: Optional[Fraction] = None
    timing: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"Unknown command {self.command!r}")
        if self.output_format not in FORMATS:
            raise UsageError(f"Unknown format {self.output_format!r}")
        if any(later >= earlier for earlier, later in zip(self.meshes, self.meshes[1:])):
            raise UsageError("Mesh values must be strictly decreasing")
        if any(not 0 < theta < 1 for theta in self.thetas):
            raise UsageError("theta values must lie in (0, 1)")

    def echo(self) -> dict:
        """Config fields that determine the report; worker count and output path are left out."""
        return {
            'command': self.command,
            'meshes': [str(mesh) for mesh in self.meshes],
            'preset': self.preset,
            'q_max': self.q_max,
            'thetas': [str(theta) for theta in self.thetas],
            'n_range': list(self.n_range),
            'format': self.output_format,
            'cost_guard': self.cost_guard,
            'mode': self.mode,
            'set': self.point_set,
            'strip': self.strip,
            'suites': list(self.suites),
            'suite_options': {
                suite: {key: _echo_value(value) for key, value in sorted(options.items())}
                for suite, options in self.suite_options.items()
            },
            'epsilon': None if self.epsilon is None else str(self.epsilon),
        }


@dataclass
class RunResult:
    status: int
    rows: List[dict] = field(default_factory=list)
    fields: Sequence[str] = CSV_FIELDS
    data: dict = field(default_factory=dict)
    plot: Optional[dict] = None


def preset_meshes(preset: str, kmin: int = 4, kmax: int = 12, nmax: int = 2) -> Tuple[Fraction, ...]:
    """
    Named mesh sequences.

    pow2 gives 2^-k for kmin <= k <= kmax; proof gives (1/(n(n+1)))^6 for
    1 <= n <= nmax, whose square and cube roots are unit fractions.
    """
    if preset == 'pow2':
        if not 1 <= kmin <= kmax:
            raise UsageError(f"pow2 preset needs 1 <= kmin <= kmax, got {kmin}..{kmax}")
        return tuple(Fraction(1, 2 ** k) for k in range(kmin, kmax + 1))
    if preset == 'proof':
        if nmax < 1:
            raise UsageError(f"proof preset needs nmax >= 1, got {nmax}")
        return tuple(Fraction(1, n * (n + 1)) ** 6 for n in range(1, nmax + 1))
    raise UsageError(f"Unknown preset {preset!r}")


def _log_ratio(value: Fraction) -> float:
    return math.log(value.numerator) - math.log(value.denominator)


def _count_reports(config: RunConfig):
    reports = []
    for mesh in config.meshes:
        if config.point_set == 'reciprocal':
            reports.append(grid_count_reciprocal_set(mesh))
        elif config.strip is not None:
            reports.append(grid_count_strip(config.strip, mesh, mode=config.mode, workers=config.workers))
        else:
            reports.append(grid_count_full_set(mesh, mode=config.mode, workers=config.workers,
                                               cost_guard=config.cost_guard))
    return reports


def _run_count(config: RunConfig) -> RunResult:
    reports = _count_reports(config)
    rows = [report.as_row() for report in reports]
    plot = {
        'x': [_log_ratio(1 / report.mesh) for report in reports],
        'y': [math.log(max(report.count, 1)) for report in reports],
        'title': f"Occupied cells ({config.point_set})",
    }
    return RunResult(EXIT_OK, rows, CSV_FIELDS, {'counts': rows}, plot)


def _run_boxdim(config: RunConfig) -> RunResult:
    reports = _count_reports(config)
    fit = fit_box_dimension([ScalingSample.from_report(report) for report in reports])
    rows = [report.as_row() for report in reports]
    data = {
        'counts': rows,
        'fit': {
            'slope': fit.slope,
            'stderr': fit.stderr,
            'intercept': fit.intercept,
            'residuals': list(fit.residuals),
            'pair_slopes': list(fit.pair_slopes),
            'sequence_criterion': fit.criterion_ok,
        },
    }
    plot = {
        'x': [_log_ratio(1 / report.mesh) for report in reports],
        'y': [math.log(report.count) for report in reports],
        'slope': fit.slope,
        'intercept': fit.intercept,
        'title': f"Box counting ({config.point_set})",
    }
    return RunResult(EXIT_OK, rows, CSV_FIELDS, data, plot)


SPECTRUM_FIELDS = ('theta', 'n', 'size', 'mesh', 'count', 'q_max')


def _run_spectrum(config: RunConfig) -> RunResult:
    n_lo, n_hi = config.n_range
    rows, points = [], []
    for theta in config.thetas:
        point = estimate_spectrum(theta, n_lo, n_hi, workers=config.workers, cost_guard=config.cost_guard)
        for sample in point.samples:
            rows.append({'theta': str(theta), 'n': sample.n, 'size': str(sample.size),
                         'mesh': str(sample.mesh), 'count': sample.count, 'q_max': sample.q_max})
        points.append({
            'theta': str(theta),
            'fitted_s': point.fitted_s,
            'stderr': point.stderr,
            'closed_form': str(theoretical_spectrum(theta)),
            'closed_form_value': float(theoretical_spectrum(theta)),
        })
    plot = {
        'x': [float(theta) for theta in config.thetas],
        'y': [point['fitted_s'] for point in points],
        'title': 'Assouad spectrum estimates',
        'xlabel': 'theta',
        'ylabel': 'fitted exponent',
    }
    return RunResult(EXIT_OK, rows, SPECTRUM_FIELDS, {'spectrum': points, 'windows': rows}, plot)


VERIFY_FIELDS = ('suite', 'passed', 'worst', 'witness', 'checks')


def _verify_suite(suite: str, options: dict, config: RunConfig) -> List[VerificationResult]:
    if suite == 'duffin-schaeffer':
        return [verify_duffin_schaeffer(options['nmax'], options['delta'], workers=config.workers)]
    if suite == 'local-ds':
        return [verify_local_ds(options['lmax'], options['n'], options['delta'], workers=config.workers)]
    if suite == 'strip-lemma':
        return [verify_strip_lemma(options['delta'], options['kmax'], epsilon=config.epsilon)]
    if suite == 'totient':
        return [verify_totient(options['lo'], options['hi'])]
    if suite == 'chung-erdos':
        return [verify_chung_erdos_chain(delta, epsilon=config.epsilon) for delta in options['meshes']]
    if suite == 'square-estimate':
        return [verify_square_estimate(options['trials'], options['seed'])]
    if suite == 'horizontal-gap':
        return [verify_horizontal_gap(options['lmax'], options['n'])]
    if suite == 'upper-bound':
        return [verify_upper_bound(options['meshes'], workers=config.workers)]
    raise UsageError(f"Unknown suite {suite!r}")


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ' '.join(_format_value(item) for item in value)
    return str(value)


def _run_verify(config: RunConfig) -> RunResult:
    rows = []
    status = EXIT_OK
    for suite in config.suites:
        for result in _verify_suite(suite, config.suite_options[suite], config):
            rows.append({
                'suite': result.suite,
                'passed': result.passed,
                'worst': _format_value(result.worst),
                'witness': _format_value(result.witness),
                'checks': result.checks,
            })
            if not result.passed:
                logger.warning(f"Verification {result.suite} failed at {_format_value(result.witness)}")
                status = EXIT_VERIFICATION
    return RunResult(status, rows, VERIFY_FIELDS, {'results': rows})


ORACLE_FIELDS = CSV_FIELDS + ('oracle_count', 'agree')


def _run_oracle(config: RunConfig) -> RunResult:
    rows = []
    status = EXIT_OK
    for mesh in config.meshes:
        fast = grid_count_full_set(mesh, mode=config.mode, workers=config.workers, cost_guard=config.cost_guard)
        q_max = config.q_max if config.q_max is not None else fast.q_max
        oracle = brute_force_count(mesh, q_max, Region.full_square())
        row = fast.as_row()
        row.update({'oracle_count': oracle.count, 'agree': fast.count == oracle.count})
        rows.append(row)
        if fast.count != oracle.count:
            logger.warning(f"Mesh {mesh}: strip-fast {fast.count} != brute-oracle {oracle.count} (q_max={q_max})")
            status = EXIT_VERIFICATION
    return RunResult(status, rows, ORACLE_FIELDS, {'oracle': rows})


def run(config: RunConfig) -> RunResult:
    """
    Execute one command.

    Returns:
        RunResult: Exit status plus the rows, JSON data and plot data of the report
    """
    handlers = {
        'count': _run_count,
        'boxdim': _run_boxdim,
        'spectrum': _run_spectrum,
        'verify': _run_verify,
        'oracle': _run_oracle,
    }
    return handlers[config.command](config)


def render(config: RunConfig, result: RunResult, elapsed: Optional[float] = None) -> Optional[str]:
    """Serialize a result as CSV or JSON text, or write its plot and return None."""
    if config.output_format == 'csv':
        return format_csv(result.rows, result.fields)
    if config.output_format == 'json':
        meta = {'version': __version__, 'config': config.echo()}
        if elapsed is not None:
            meta['wall_time_seconds'] = round(elapsed, 3)
        payload = dict(result.data)
        payload['meta'] = meta
        payload['exit_status'] = result.status
        return format_json(payload)

    if result.plot is None:
        raise UsageError(f"The {config.command} command has no plot; use csv or json")
    path = config.output or os.path.join(load_config()['output_dir'], f"{config.command}.{config.output_format}")
    if not path.lower().endswith(f".{config.output_format}"):
        raise UsageError(f"Plot path {path} does not end in .{config.output_format}")
    plot = result.plot
    save_loglog_plot(path, plot['x'], plot['y'], plot.get('slope'), plot.get('intercept'),
                     title=plot.get('title', ''), xlabel=plot.get('xlabel', 'log(1/mesh)'),
                     ylabel=plot.get('ylabel', 'log(count)'))
    return None


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--format', choices=FORMATS, help='Report format (default depends on the command)')
    parser.add_argument('--output', '-o', help='Write the report to this file instead of stdout')
    parser.add_argument('--workers', type=int, help='Worker processes (default: POPCORN_WORKERS or CPU count)')
    parser.add_argument('--cost-guard', type=int, help='Enumeration ceiling overriding the configured guard')
    parser.add_argument('--timing', action='store_true', help='Include wall time in JSON output')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help='Log at DEBUG level')
    verbosity.add_argument('--quiet', '-q', action='store_true', help='Log warnings and errors only')


def _add_meshes(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--mesh', type=_rational_list, action='extend', help='Meshes as p/q, comma separated')
    parser.add_argument('--preset', choices=('pow2', 'proof'), help='Named mesh sequence')
    parser.add_argument('--kmin', type=int, default=4, help='pow2 preset: first exponent')
    parser.add_argument('--kmax', type=int, default=12, help='pow2 preset: last exponent')
    parser.add_argument('--nmax-preset', dest='preset_nmax', type=int, default=2,
                        help='proof preset: largest n')
    parser.add_argument('--mode', choices=('full', 'graph'), default='full', help='Count the full set or the graph')
    parser.add_argument('--set', dest='point_set', choices=('popcorn', 'reciprocal'), default='popcorn',
                        help='Point set to count')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='popcorn-dim', description='Box and Assouad-spectrum dimensions of the popcorn graph')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    subparsers = parser.add_subparsers(dest='command', required=True)

    count = subparsers.add_parser('count', help='Exact grid counts per mesh')
    _add_meshes(count)
    count.add_argument('--strip', type=int, help='Count a single row band k instead of the whole square')
    _add_common(count)

    boxdim = subparsers.add_parser('boxdim', help='Fit the box-counting dimension')
    _add_meshes(boxdim)
    _add_common(boxdim)

    spectrum = subparsers.add_parser('spectrum', help='Estimate the Assouad spectrum')
    spectrum.add_argument('--theta', type=_rational_list, action='extend', help='theta values as p/q')
    spectrum.add_argument('--nmin', type=int, default=3, help='First window index')
    spectrum.add_argument('--nmax', type=int, default=12, help='Last window index')
    _add_common(spectrum)

    verify = subparsers.add_parser('verify', help='Run certified inequality checks')
    verify.add_argument('--suite', choices=SUITES + ('all',), default='all', help='Check to run')
    verify.add_argument('--delta', type=_rational, help='Mesh or half-width for the suite')
    verify.add_argument('--mesh', type=_rational_list, action='extend', help='Meshes for mesh-sweep suites')
    verify.add_argument('--nmax', type=int, help='Largest denominator (duffin-schaeffer)')
    verify.add_argument('--lmax', type=int, help='Largest line index (local-ds, horizontal-gap)')
    verify.add_argument('--n', type=int, help='Column index n (local-ds, horizontal-gap)')
    verify.add_argument('--kmax', type=int, help='Largest strip index (strip-lemma)')
    verify.add_argument('--lo', type=int, help='Range start (totient)')
    verify.add_argument('--hi', type=int, help='Range end (totient)')
    verify.add_argument('--trials', type=int, help='Random pairs (square-estimate)')
    verify.add_argument('--seed', type=int, help='Random seed (square-estimate)')
    verify.add_argument('--epsilon', type=_rational, help='Strip range exponent slack (default POPCORN_STRIP_EPSILON)')
    _add_common(verify)

    oracle = subparsers.add_parser('oracle', help='Cross-check fast counts against brute force')
    _add_meshes(oracle)
    oracle.add_argument('--qmax', type=int, help='Truncation level for the brute-force side')
    _add_common(oracle)
    return parser


def _suite_options(args: argparse.Namespace, suite: str) -> dict:
    options = dict(SUITE_DEFAULTS[suite])
    for key in ('nmax', 'lmax', 'n', 'kmax', 'lo', 'hi', 'trials', 'seed', 'delta'):
        value = getattr(args, key, None)
        if value is not None and key in options:
            options[key] = value
    if 'meshes' in options:
        if args.mesh:
            options['meshes'] = tuple(args.mesh)
        elif args.delta is not None:
            options['meshes'] = (args.delta,)
    return options


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Turn parsed flags into a RunConfig, filling gaps from load_config()."""
    settings = load_config()
    workers = args.workers if args.workers is not None else settings['workers']
    if workers < 1:
        raise UsageError(f"--workers must be at least 1, got {workers}")
    output_format = args.format or DEFAULT_FORMAT[args.command]

    meshes: Tuple[Fraction, ...] = ()
    preset = getattr(args, 'preset', None)
    if args.command in ('count', 'boxdim', 'oracle'):
        if args.mesh and preset:
            raise UsageError("Use either --mesh or --preset, not both")
        if args.mesh:
            meshes = tuple(args.mesh)
        elif preset:
            meshes = preset_meshes(preset, args.kmin, args.kmax, args.preset_nmax)
        else:
            raise UsageError(f"{args.command} needs --mesh or --preset")

    thetas: Tuple[Fraction, ...] = ()
    n_range = (3, 12)
    if args.command == 'spectrum':
        thetas = tuple(args.theta) if args.theta else DEFAULT_THETAS
        n_range = (args.nmin, args.nmax)

    suites: Tuple[str, ...] = ()
    suite_options: Dict[str, dict] = {}
    if args.command == 'verify':
        suites = SUITES if args.suite == 'all' else (args.suite,)
        suite_options = {suite: _suite_options(args, suite) for suite in suites}

    return RunConfig(
        command=args.command,
        meshes=meshes,
        preset=preset,
        q_max=getattr(args, 'qmax', None),
        thetas=thetas,
        n_range=n_range,
        output_format=output_format,
        workers=workers,
        cost_guard=args.cost_guard,
        output=args.output,
        mode=getattr(args, 'mode', 'full'),
        point_set=getattr(args, 'point_set', 'popcorn'),
        strip=getattr(args, 'strip', None),
        suites=suites,
        suite_options=suite_options,
        epsilon=getattr(args, 'epsilon', None),
        timing=args.timing,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point for the popcorn-dim console script."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        config = config_from_args(args)
        started = time.perf_counter()
        result = run(config)
        elapsed = time.perf_counter() - started if config.timing else None
        text = render(config, result, elapsed)
    except (CostGuardError, OracleTooLargeError) as e:
        parameter = getattr(e, 'parameter', 'q_max')
        print(f"Error: cost guard exceeded ({parameter}): {str(e)}", file=sys.stderr)
        return EXIT_COST_GUARD
    except (UsageError, MeshError, ScaleOrderError, RangeError, EmptyStripError, DomainError, ValueError) as e:
        parser.print_usage(sys.stderr)
        print(f"Error: {str(e)}", file=sys.stderr)
        return EXIT_USAGE
    except ReportWriteError as e:
        print(f"Error: {str(e)}", file=sys.stderr)
        return EXIT_FAILURE

    if text is not None:
        if config.output:
            try:
                write_text_report(text, config.output)
            except ReportWriteError as e:
                print(f"Error: {str(e)}", file=sys.stderr)
                return EXIT_FAILURE
        else:
            sys.stdout.write(text)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
