#!/usr/bin/env python3
"""
Torus Strichartz toolkit: command-line entry point.

Subcommands: enumerate, strichartz, extremizer-scan, incidence, decompose,
bins, nls, selftest. CSV goes to --output (default stdout); logs go to stderr.
Exit codes: 0 ok, 2 validation, 3 cap exceeded, 4 numerical failure.
"""
import argparse
import csv
import io
import json
import math
import sys
import time
from typing import Iterable, List, Optional, Sequence

from console_log import clear_console, get_console_lines, log_to_console, set_verbosity
from experiment_config import (
    CALIBRATION_FILE,
    ConfigError,
    ExperimentConfig,
    get_default_params,
    load_calibration,
    load_run_config,
    save_calibration,
)
from incidence_geometry import (
    bins_csv_rows,
    calibrate_default_c,
    calibration_suite,
    decompose,
    max_bound_ratios,
    rectangle_bins,
    rich_lines,
    rich_lines_csv_rows,
    szemeredi_trotter_scan,
    type_sums,
)
from nls_integrator import (
    NLSField,
    NumericalFailure,
    integrate,
    plane_wave,
    plane_wave_exact,
    random_smooth_data,
    window_growth_experiment,
)
from quadruple_sum import (
    DYADIC_HEADER,
    HISTOGRAM_HEADER,
    additive_energy,
    count_parallelograms,
    histogram_csv_rows,
    tau_histogram,
)
from schrodinger_propagator import (
    extremizer_scan,
    resolve_time,
    strichartz_ratio,
)
from scan_manager import run_scan
from spectrum_core import (
    CapExceededError,
    SpectrumError,
    TWO_PI,
    WeightedSpectrum,
    box_points,
    build_levels,
    load_spectrum,
    log_max1,
    make_rng,
    random_spectrum,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAP = 3
EXIT_NUMERICAL = 4

STRICHARTZ_HEADER = ('N', 'T', 'l4', 'l2', 'ratio', 'ratio4_over_logS', 'method', 'seconds')
SCAN_HEADER = ('N', 'T', 'l4', 'l2', 'ratio', 'ratio4_over_logN', 'method', 'seconds')
RICH_LINES_HEADER = ('n', 'k', 'm', 'ratio')
BINS_HEADER = ('j1', 'j2', 'j3', 'j4', 'a1', 'a2', 'a3', 'a4', 'count', 'gcd_weighted', 'type2_corner')
TYPE_SUMS_HEADER = ('alpha', 'beta', 'count', 'weighted_sum', 'ratio', 'ratio_with_m')
DECOMPOSITION_HEADER = ('n', 'l2_norm', 'halved')
TRAJECTORY_HEADER = ('t', 'mass', 'hamiltonian', 'hs_norm', 'window_index', 'growth_factor')


# -------------------------------
# Output helpers
# -------------------------------
def format_cell(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if value is None:
        return ''
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()


def emit(text: str, output: Optional[str]):
    if output:
        with open(output, 'w', newline='') as fh:
            fh.write(text)
        log_to_console(f"Wrote {output}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


# -------------------------------
# Set descriptors
# -------------------------------
def parse_set(descriptor: str, seed: int = 0) -> WeightedSpectrum:
    """grid:N | box:x0:x1:y0:y1 | file:PATH | random:SIZE:RADIUS"""
    kind, _, rest = descriptor.partition(':')
    try:
        if kind == 'grid':
            N = int(rest)
            if N < 0:
                raise ConfigError(f"grid radius must be nonnegative in {descriptor!r}")
            return WeightedSpectrum.box(N)
        if kind == 'box':
            x0, x1, y0, y1 = (int(v) for v in rest.split(':'))
            if x1 < x0 or y1 < y0:
                raise ConfigError(f"empty box in {descriptor!r}")
            return WeightedSpectrum.indicator(box_points(x0, x1, y0, y1))
        if kind == 'file':
            return load_spectrum(rest)
        if kind == 'random':
            size, radius = (int(v) for v in rest.split(':'))
            return random_spectrum(make_rng(seed), radius, size)
    except ValueError as e:
        if isinstance(e, (ConfigError, SpectrumError)):
            raise
        raise ConfigError(f"malformed set descriptor {descriptor!r}: {e}", 'bad_set')
    raise ConfigError(f"unknown set descriptor {descriptor!r} (grid:N, box:x0:x1:y0:y1, file:PATH, random:SIZE:RADIUS)",
                      'bad_set')


def set_radius(descriptor: str, f: WeightedSpectrum) -> int:
    if descriptor.startswith('grid:'):
        return int(descriptor.split(':', 1)[1])
    return f.max_abs_coordinate()


def resolve_c(value: Optional[int]) -> int:
    if value is not None:
        return value
    return load_calibration()['C']


# -------------------------------
# Subcommands
# -------------------------------
def cmd_enumerate(args, config: ExperimentConfig) -> int:
    f = load_spectrum(args.spectrum)
    started = time.perf_counter()
    hist = tau_histogram(f, backend=args.backend, cap=args.cap)
    log_to_console(f"Enumerated {hist.total_count()} parallelograms over {len(f)} frequencies "
                   f"({args.backend}, {time.perf_counter() - started:.2f}s)")
    header = DYADIC_HEADER if args.dyadic else HISTOGRAM_HEADER
    emit(render_csv(header, histogram_csv_rows(hist, dyadic=args.dyadic)), config.output)
    if args.plot:
        from plot_generator import plot_tau_histogram
        plot_tau_histogram(hist, args.plot)
    return EXIT_OK


def _report_row(desc: str, f: WeightedSpectrum, report) -> tuple:
    return (set_radius(desc, f), report.T, report.l4, report.l2, report.ratio,
            report.ratio ** 4 / log_max1(len(f)), report.method, report.seconds)


def cmd_strichartz(args, config: ExperimentConfig) -> int:
    sets = args.set or ['grid:1']

    def job(desc):
        f = parse_set(desc, config.seed)
        T = resolve_time(args.T, len(f))
        report = strichartz_ratio(f, T, args.method, descriptor=desc, timing=args.timing)
        return _report_row(desc, f, report), report

    results = run_scan(job, sets, threads=config.threads, desc='strichartz')
    emit(render_csv(STRICHARTZ_HEADER, [row for row, _ in results]), config.output)
    if args.plot:
        from plot_generator import plot_strichartz_scan
        plot_strichartz_scan([report for _, report in results], args.plot)
    return EXIT_OK


def cmd_extremizer_scan(args, config: ExperimentConfig) -> int:
    rows = extremizer_scan(args.N, threads=config.threads, timing=args.timing)
    out = []
    for r in rows:
        n = (2 * r.N + 1) ** 2
        l4_4 = TWO_PI ** 3 * r.rectangles
        out.append((r.N, TWO_PI, l4_4 ** 0.25, TWO_PI * math.sqrt(n), r.ratio, r.ratio4_over_log,
                    'exact-sigma', r.seconds))
    if len(rows) > 1:
        values = [r.ratio4_over_log for r in rows]
        log_to_console(f"R(N)^4/log N spread max/min = {max(values) / min(values):.4f}")
    emit(render_csv(SCAN_HEADER, out), config.output)
    if args.plot:
        from plot_generator import plot_extremizer_scan
        plot_extremizer_scan(rows, args.plot)
    return EXIT_OK


def _decomposition_csv(f: WeightedSpectrum, C: int, config: ExperimentConfig, max_steps: int) -> str:
    trace = decompose(f, C, max_steps=max_steps)
    log_to_console(f"Decomposition with C={C}: {len(trace.steps)} step(s), stop={trace.stop_reason}, "
                   f"halving {'held' if trace.halving_held else 'FAILED'}")
    return render_csv(DECOMPOSITION_HEADER, trace.csv_rows())


def cmd_incidence(args, config: ExperimentConfig) -> int:
    f = parse_set(args.set, config.seed)
    if args.decompose:
        emit(_decomposition_csv(f, resolve_c(args.C), config, args.max_steps), config.output)
        return EXIT_OK
    if args.scan:
        reports = szemeredi_trotter_scan(f)
    else:
        reports = [rich_lines(f, args.k)]
    for r in reports:
        if r.ratio > 8.0:
            log_to_console(f"rich-line ratio {r.ratio:.3f} above 8 at k={r.k}", 'WARN')
    emit(render_csv(RICH_LINES_HEADER, rich_lines_csv_rows(reports)), config.output)
    return EXIT_OK


def cmd_decompose(args, config: ExperimentConfig) -> int:
    if args.calibrate:
        data = load_calibration()
        suite_cfg = data['suite']
        suite = calibration_suite(suite_cfg['grid_radii'], suite_cfg['random_count'], suite_cfg['seed'],
                                  suite_cfg['random_size'], suite_cfg['random_radius'])
        result = calibrate_default_c(suite, c_max=data.get('c_max', 8))
        if result.C is None:
            raise NumericalFailure(f"no C up to {data.get('c_max', 8)} halves the calibration suite")
        data['C'] = result.C
        save_calibration(data)
        emit(render_csv(('C', 'passed'), sorted(result.passed.items())), config.output)
        return EXIT_OK
    f = parse_set(args.set, config.seed)
    emit(_decomposition_csv(f, resolve_c(args.C), config, args.max_steps), config.output)
    return EXIT_OK


def cmd_bins(args, config: ExperimentConfig) -> int:
    f = parse_set(args.set, config.seed)
    levels = build_levels(f, resolve_c(args.C))
    if args.type_sums:
        sums = type_sums(levels, cap=args.cap)
        log_to_console(f"Type sums: m={sums.m}, gcd-weighted (2,2)={sums.gcd_weighted_22:.6g}, "
                       f"mixed={sums.mixed:.6g} over {sums.mixed_count} rectangles")
        emit(render_csv(TYPE_SUMS_HEADER, sums.rows()), config.output)
        return EXIT_OK
    bins = rectangle_bins(levels, cap=args.cap)
    flagged = sum(1 for b in bins if b.type2_corner)
    log_to_console(f"{len(bins)} bins, {flagged} with a type-2 corner at xi1")
    ratios = max_bound_ratios(bins)
    log_to_console("Max bound ratios: " + ", ".join(f"{k}={v:.4g}" for k, v in ratios.items()))
    emit(render_csv(BINS_HEADER, bins_csv_rows(bins)), config.output)
    return EXIT_OK


def cmd_nls(args, config: ExperimentConfig) -> int:
    params = load_run_config(args.config)
    clear_console()
    summary = {'config': params}
    wave = params.get('plane_wave')
    if wave is not None:
        amplitude = complex(wave.get('amplitude', 0.1))
        xi = tuple(wave.get('xi', [1, 0]))
        T = float(wave.get('T', 1.0))
        u0 = plane_wave(amplitude, xi, params['N0'], params['sign'])
        final, rows = integrate(u0, T, params['dt'], params['s'])
        exact = plane_wave_exact(amplitude, xi, final.t, final.n_x, params['sign'])
        summary['plane_wave_max_error'] = float(abs(final.samples - exact).max())
        csv_rows = [(r.t, r.mass, r.hamiltonian, r.hs_norm, r.window_index, r.growth_factor) for r in rows]
        log_to_console(f"Plane wave max pointwise error {summary['plane_wave_max_error']:.3e} at T={T}")
    else:
        rng = make_rng(params['seed'])
        f = random_smooth_data(rng, params['band'], params['delta'])
        u0 = NLSField.from_spectrum(f, params['N0'], params['sign'])
        report = window_growth_experiment(u0, params['s'], params['delta'], params['windows'], params['N0'],
                                          params['K_probe'], params['dt'], strict=False)
        summary.update({
            'K_obs': report.K_obs,
            'cumulative_time': report.cumulative_time,
            'ladder_sum': report.ladder_sum,
            'mass_drift': report.mass_drift,
            'hamiltonian_drift': report.hamiltonian_drift,
            'ball_N': report.ball_N,
            'flagged': report.flagged,
        })
        csv_rows = report.csv_rows()
        log_to_console(f"Window experiment: K_obs={report.K_obs:.9g}, mass drift={report.mass_drift:.3e}")
        if args.plot:
            from plot_generator import plot_field_heatmap, plot_trajectory
            plot_trajectory(report, args.plot)
            base = args.plot.rsplit('.', 1)
            field_path = f"{base[0]}_field.{base[1]}" if len(base) == 2 else f"{args.plot}_field"
            plot_field_heatmap(u0, field_path)
    emit(render_csv(TRAJECTORY_HEADER, csv_rows), config.output)
    summary['log_tail'] = get_console_lines(last=10, timestamps=False)
    text = json.dumps(summary, sort_keys=True, default=str)
    if args.summary:
        with open(args.summary, 'w') as fh:
            fh.write(text + "\n")
    else:
        print(text, file=sys.stderr)
    return EXIT_OK


def cmd_selftest(args, config: ExperimentConfig) -> int:
    checks = []

    def check(name, expected, observed, ok):
        checks.append((name, expected, observed, ok))
        mark = '✓' if ok else '✗'
        log_to_console(f"{mark} {name}: expected {expected}, observed {observed}", 'INFO' if ok else 'ERROR')

    grid2 = [(0, 0), (0, 1), (1, 0), (1, 1)]
    check('parallelograms_2x2', 36, count_parallelograms(grid2), count_parallelograms(grid2) == 36)
    collinear = [(-1, 0), (0, 0), (1, 0)]
    check('additive_energy_collinear', 19, additive_energy(collinear), additive_energy(collinear) == 19)
    grid3 = box_points(-1, 1, -1, 1)
    m = rich_lines(grid3, 3).m
    check('rich_lines_3x3', 8, m, m == 8)
    expected = TWO_PI ** -0.25
    r = strichartz_ratio(WeightedSpectrum({(0, 0): 1.0}), TWO_PI).ratio
    check('single_point_ratio', expected, r, abs(r - expected) <= 1e-12 * expected)
    emit(render_csv(('check', 'expected', 'observed', 'ok'), checks), config.output)
    return EXIT_OK if all(c[3] for c in checks) else EXIT_NUMERICAL


# -------------------------------
# Argument parsing
# -------------------------------
def build_parser() -> argparse.ArgumentParser:
    defaults = get_default_params()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--threads', type=int, default=1, help='Worker threads (capped by TORUS_STRI_THREADS).')
    common.add_argument('-v', '--verbose', action='count', default=0, help='More log output (repeat for debug).')
    common.add_argument('-q', '--quiet', action='store_true', help='Only log errors.')
    common.add_argument('--output', type=str, default=None, help='CSV output path (default: stdout).')
    common.add_argument('--seed', type=int, default=0, help='Seed for random set descriptors.')
    common.add_argument('--plot', type=str, default=None, help='Also render a plot to this path.')
    common.add_argument('--timing', action='store_true', help='Fill the seconds column (otherwise 0).')

    parser = argparse.ArgumentParser(prog='app.py', description='Torus Strichartz toolkit')
    sub = parser.add_subparsers(dest='subcommand', required=True)

    p = sub.add_parser('enumerate', parents=[common], help='tau histogram of a spectrum file')
    p.add_argument('spectrum', help="Spectrum file ('x y re [im]' per line)")
    p.add_argument('--tau-histogram', action='store_true', help='Emit the tau histogram (default output).')
    p.add_argument('--dyadic', action='store_true', help='Group tau into dyadic bins [M, 2M).')
    p.add_argument('--backend', choices=['generic', 'grid-fast'], default=defaults['enumerate']['backend'])
    p.add_argument('--cap', type=int, default=defaults['enumerate']['cap'])
    p.set_defaults(handler=cmd_enumerate)

    p = sub.add_parser('strichartz', parents=[common], help='L4/L2 ratio of free evolutions')
    p.add_argument('--set', action='append', help='Set descriptor (repeatable).')
    p.add_argument('--T', default=defaults['strichartz']['T'], help='full | local | positive number')
    p.add_argument('--method', choices=['auto', 'exact', 'quadrature'], default=defaults['strichartz']['method'])
    p.set_defaults(handler=cmd_strichartz)

    p = sub.add_parser('extremizer-scan', parents=[common], help='R(N) for box extremizers at T = 2 pi')
    p.add_argument('--N', type=int, nargs='+', default=defaults['extremizer-scan']['N_list'])
    p.set_defaults(handler=cmd_extremizer_scan)

    p = sub.add_parser('incidence', parents=[common], help='Rich lines and decomposition')
    p.add_argument('--set', required=True)
    p.add_argument('--k', type=int, default=defaults['incidence']['k'])
    p.add_argument('--scan', action='store_true', help='Report m(k) for every k in [2, n].')
    p.add_argument('--decompose', action='store_true', help='Run the exceptional-set decomposition instead.')
    p.add_argument('--C', type=int, default=None, help='Richness constant (default: calibration.json).')
    p.add_argument('--max-steps', type=int, default=defaults['decompose']['max_steps'], dest='max_steps')
    p.set_defaults(handler=cmd_incidence)

    p = sub.add_parser('decompose', parents=[common], help='Exceptional-set decomposition')
    p.add_argument('--set', default='grid:8')
    p.add_argument('--C', type=int, default=None)
    p.add_argument('--max-steps', type=int, default=defaults['decompose']['max_steps'], dest='max_steps')
    p.add_argument('--calibrate', action='store_true', help=f'Recompute C and rewrite {CALIBRATION_FILE}.')
    p.set_defaults(handler=cmd_decompose)

    p = sub.add_parser('bins', parents=[common], help='Rectangle counting bins of the level sets')
    p.add_argument('--set', required=True)
    p.add_argument('--C', type=int, default=None)
    p.add_argument('--cap', type=int, default=defaults['bins']['cap'])
    p.add_argument('--type-sums', action='store_true',
                   help='Emit the per type-pair rectangle sums instead of the bins.')
    p.set_defaults(handler=cmd_bins)

    p = sub.add_parser('nls', parents=[common], help='Window growth experiment for cubic NLS')
    p.add_argument('config', help='JSON run config')
    p.add_argument('--summary', type=str, default=None, help='Summary JSON path (default: stderr).')
    p.set_defaults(handler=cmd_nls)

    p = sub.add_parser('selftest', parents=[common], help='Pinned-value battery')
    p.set_defaults(handler=cmd_selftest)
    return parser


def make_config(args) -> ExperimentConfig:
    params = {key: value for key, value in vars(args).items()
              if key in ('cap', 'k', 'C', 'max_steps') and value is not None}
    if args.subcommand == 'extremizer-scan':
        params['N_list'] = args.N
    verbosity = 0 if args.quiet else 1 + args.verbose
    return ExperimentConfig(args.subcommand, params, args.threads, verbosity, args.seed, args.output).validate()


def fail(exc: BaseException, code: int) -> int:
    error_code = getattr(exc, 'error_code', type(exc).__name__)
    log_to_console(str(exc), 'ERROR')
    message = str(exc).replace('\n', ' ')
    print(f"error_code={error_code} exit={code} message={message}", file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    set_verbosity(0 if args.quiet else 1 + args.verbose)
    try:
        config = make_config(args)
        return args.handler(args, config)
    except (ConfigError, SpectrumError) as e:
        return fail(e, EXIT_VALIDATION)
    except CapExceededError as e:
        return fail(e, EXIT_CAP)
    except NumericalFailure as e:
        return fail(e, EXIT_NUMERICAL)


if __name__ == '__main__':
    sys.exit(main())
