"""
Schrodinger Propagator Module
Free Schrodinger flow on spectra, physical-space sampling on T^2, a
Gauss-Legendre quadrature oracle for space-time L^4 norms and the
Strichartz ratio experiments built on them.
"""
import math
import sys
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from tqdm import tqdm

import console_log
from console_log import log_to_console
from quadruple_sum import DEFAULT_ENUMERATION_CAP, l4_full_period, l4_time_integral
from spectrum_core import (
    CubeProjection,
    FreqPoint,
    SpectrumError,
    TWO_PI,
    WeightedSpectrum,
    log_max1,
    project,
)

NODES_PER_PANEL = 16
EXACT_SUPPORT_LIMIT = 1024  # 'auto' switches to quadrature above this support size
_CHUNK_ELEMENTS = 1 << 22


@dataclass
class PhysicalGrid:
    """Samples u(x) at x = 2 pi (i, j) / n_x, i, j = 0..n_x-1."""

    n_x: int
    samples: np.ndarray

    def mean_abs_pow(self, p: int) -> float:
        return float(np.mean(np.abs(self.samples) ** p))


@dataclass
class QuadratureResult:
    value: float
    error_estimate: float
    panels: int
    nodes_per_panel: int
    n_x: int


@dataclass
class StrichartzReport:
    descriptor: str
    T: float
    l4: float
    l2: float
    method: str
    support: int = 0
    seconds: float = 0.0

    @property
    def ratio(self) -> float:
        return self.l4 / self.l2 if self.l2 > 0 else 0.0

    @property
    def ratio4_over_log(self) -> float:
        return self.ratio ** 4 / log_max1(max(self.support, 1))


# -------------------------------
# Flow and sampling
# -------------------------------
def _norm2_array(f: WeightedSpectrum) -> np.ndarray:
    c = f.coords
    return (c[:, 0] * c[:, 0] + c[:, 1] * c[:, 1]).astype(np.float64)


def evolve(f: WeightedSpectrum, t: float) -> WeightedSpectrum:
    """e^{it Lap}: amplitude at xi multiplied by e^{-it|xi|^2}."""
    if t == 0:
        return f
    return f.with_values(np.asarray(f.values) * np.exp(-1j * t * _norm2_array(f)))


def _check_grid(f: WeightedSpectrum, n_x: int):
    if n_x < 1 or n_x % 2 == 0:
        raise SpectrumError(f"grid size must be odd, got {n_x}", 'bad_grid')
    if len(f) and 2 * f.max_abs_coordinate() + 1 > n_x:
        raise SpectrumError(f"grid n_x={n_x} aliases frequencies up to {f.max_abs_coordinate()}", 'aliasing')


def _scatter_indices(f: WeightedSpectrum, n_x: int) -> Tuple[np.ndarray, np.ndarray]:
    c = f.coords
    return np.mod(c[:, 0], n_x), np.mod(c[:, 1], n_x)


def sample_physical(f: WeightedSpectrum, n_x: int) -> PhysicalGrid:
    """u(x) = sum_xi f(xi) e^{i xi.x} on the n_x by n_x grid, via an inverse FFT."""
    _check_grid(f, n_x)
    coeffs = np.zeros((n_x, n_x), dtype=np.complex128)
    ix, iy = _scatter_indices(f, n_x)
    coeffs[ix, iy] = f.values
    return PhysicalGrid(n_x, np.fft.ifft2(coeffs) * (n_x * n_x))


def sample_physical_direct(f: WeightedSpectrum, n_x: int) -> PhysicalGrid:
    """Direct summation counterpart of sample_physical."""
    _check_grid(f, n_x)
    x = TWO_PI * np.arange(n_x) / n_x
    samples = np.zeros((n_x, n_x), dtype=np.complex128)
    for p, v in f:
        samples += v * np.exp(1j * p.x * x)[:, None] * np.exp(1j * p.y * x)[None, :]
    return PhysicalGrid(n_x, samples)


def analyze_physical(grid: PhysicalGrid, tolerance: float = 1e-12) -> WeightedSpectrum:
    """Recover the spectrum of a sampled trigonometric polynomial; coefficients below tolerance * max are dropped."""
    n = grid.n_x
    coeffs = np.fft.fft2(grid.samples) / (n * n)
    mags = np.abs(coeffs)
    peak = mags.max() if mags.size else 0.0
    if peak == 0:
        return WeightedSpectrum()
    ix, iy = np.nonzero(mags > tolerance * peak)
    half = (n - 1) // 2
    xs = np.where(ix > half, ix - n, ix)
    ys = np.where(iy > half, iy - n, iy)
    return WeightedSpectrum({(int(x), int(y)): complex(coeffs[i, j]) for x, y, i, j in zip(xs, ys, ix, iy)})


# -------------------------------
# Quadrature oracle
# -------------------------------
def _centered(f: WeightedSpectrum) -> WeightedSpectrum:
    """Shift the support to the lattice point nearest its box center (the L^4 integral is unchanged)."""
    if not len(f):
        return f
    c = f.coords
    cx = int((int(c[:, 0].min()) + int(c[:, 0].max())) // 2)
    cy = int((int(c[:, 1].min()) + int(c[:, 1].max())) // 2)
    if cx == 0 and cy == 0:
        return f
    return WeightedSpectrum({(p.x - cx, p.y - cy): v for p, v in f})


def spatial_l4(f: WeightedSpectrum, t: float = 0.0, n_x: Optional[int] = None) -> float:
    """int_{T^2} |e^{it Lap} phi|^4 dx, exact for n_x >= 4 max|xi| + 1."""
    if n_x is None:
        n_x = 4 * f.max_abs_coordinate() + 1
    grid = sample_physical(evolve(f, t), n_x)
    return TWO_PI ** 2 * grid.mean_abs_pow(4)


def _time_rule(t_start: float, T: float, panels: int, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(nodes)
    edges = t_start + T * np.arange(panels + 1) / panels
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return t, weights


def _integrate_rule(f: WeightedSpectrum, n_x: int, t: np.ndarray, weights: np.ndarray) -> float:
    norm2 = _norm2_array(f)
    values = np.asarray(f.values)
    ix, iy = _scatter_indices(f, n_x)
    chunk = max(1, _CHUNK_ELEMENTS // (n_x * n_x))
    partials = []
    starts = range(0, len(t), chunk)
    for start in tqdm(starts, desc='quadrature', file=sys.stderr,
                      disable=not (console_log.verbosity >= 1 and len(t) * n_x * n_x > 1 << 28)):
        tc = t[start:start + chunk]
        coeffs = np.zeros((len(tc), n_x, n_x), dtype=np.complex128)
        coeffs[:, ix, iy] = values[None, :] * np.exp(-1j * tc[:, None] * norm2[None, :])
        u = np.fft.ifft2(coeffs, axes=(-2, -1)) * (n_x * n_x)
        per_time = np.mean(np.abs(u) ** 4, axis=(-2, -1))
        partials.append(math.fsum((weights[start:start + chunk] * per_time).tolist()))
    return TWO_PI ** 2 * math.fsum(partials)


def default_panels(f: WeightedSpectrum, T: float) -> int:
    """One panel per period of the fastest resonance |sigma| <= 8 max|xi|^2."""
    sigma_max = 8.0 * max(f.max_norm2(), 1)
    return max(1, int(math.ceil(T * sigma_max / TWO_PI)))


def l4_quadrature(f: WeightedSpectrum, T: float, panels: Optional[int] = None, t_start: float = 0.0,
                  nodes_per_panel: int = NODES_PER_PANEL, n_x: Optional[int] = None) -> QuadratureResult:
    """
    Composite Gauss-Legendre approximation of int_{t_start}^{t_start+T} int |u|^4 dx dt.
    The spatial integral is exact on the 4K+1 grid; the error estimate
    compares against the same rule on half as many panels.
    """
    if not T > 0:
        raise SpectrumError(f"time length must be positive, got {T}", 'bad_time')
    g = _centered(f)
    if panels is None:
        panels = default_panels(g, T)
    if n_x is None:
        n_x = 4 * g.max_abs_coordinate() + 1
    if not len(g):
        return QuadratureResult(0.0, 0.0, panels, nodes_per_panel, n_x)
    t, w = _time_rule(t_start, T, panels, nodes_per_panel)
    value = _integrate_rule(g, n_x, t, w)
    coarse_panels = max(1, panels // 2)
    if coarse_panels == panels:
        error = 0.0
    else:
        tc, wc = _time_rule(t_start, T, coarse_panels, nodes_per_panel)
        error = abs(value - _integrate_rule(g, n_x, tc, wc))
    log_to_console(f"l4_quadrature: support={len(f)}, T={T:.6g}, panels={panels}, n_x={n_x}, "
                   f"value={value:.12g}, err~{error:.3g}", 'DEBUG')
    return QuadratureResult(value, error, panels, nodes_per_panel, n_x)


# -------------------------------
# Strichartz ratios
# -------------------------------
def _full_periods(T: float) -> Optional[int]:
    k = T / TWO_PI
    r = round(k)
    if r >= 1 and abs(k - r) <= 1e-12 * r:
        return int(r)
    return None


def space_time_l4(f: WeightedSpectrum, T: float, method: str = 'auto',
                  cap: int = DEFAULT_ENUMERATION_CAP) -> Tuple[float, str]:
    """(int_0^T int |u|^4, method used) with method in {'exact-sigma', 'quadrature'}."""
    if method not in ('auto', 'exact', 'quadrature'):
        raise SpectrumError(f"unknown method {method!r}", 'bad_method')
    if method == 'quadrature':
        return l4_quadrature(f, T).value, 'quadrature'
    periods = _full_periods(T)
    if periods is not None and f.is_nonnegative():
        return l4_full_period(f, periods), 'exact-sigma'
    if method == 'exact' or len(f) <= EXACT_SUPPORT_LIMIT:
        return l4_time_integral(f, T, cap=cap), 'exact-sigma'
    return l4_quadrature(f, T).value, 'quadrature'


def strichartz_ratio(f: WeightedSpectrum, T: Optional[float] = None, method: str = 'auto',
                     descriptor: str = '', cap: int = DEFAULT_ENUMERATION_CAP,
                     timing: bool = False) -> StrichartzReport:
    """
    R = ||e^{it Lap} phi||_{L^4([0,T] x T^2)} / ||phi||_{L^2(T^2)};
    T defaults to 1 / log #supp.
    """
    if not len(f):
        raise SpectrumError("empty spectrum", 'empty_spectrum')
    if T is None:
        T = 1.0 / log_max1(len(f))
    started = time.perf_counter()
    value, used = space_time_l4(f, T, method, cap)
    seconds = time.perf_counter() - started if timing else 0.0
    return StrichartzReport(descriptor, T, value ** 0.25, f.l2_torus_norm(), used, len(f), seconds)


def resolve_time(mode: str, support: int) -> float:
    """'full' -> 2 pi, 'local' -> 1 / log #S, otherwise a positive number."""
    if mode == 'full':
        return TWO_PI
    if mode == 'local':
        return 1.0 / log_max1(support)
    try:
        T = float(mode)
    except ValueError:
        raise SpectrumError(f"cannot read time {mode!r} (use full, local or a number)", 'bad_time')
    if not T > 0 or not math.isfinite(T):
        raise SpectrumError(f"time must be positive, got {mode}", 'bad_time')
    return T


def strichartz_scan(N_list: Sequence[int], T_mode: str = 'local', method: str = 'quadrature',
                    threads: int = 1, timing: bool = False) -> List[StrichartzReport]:
    """strichartz_ratio on the boxes [-N, N]^2, rows in the order of N_list."""
    from scan_manager import run_scan

    def job(N: int) -> StrichartzReport:
        f = WeightedSpectrum.box(N)
        return strichartz_ratio(f, resolve_time(T_mode, len(f)), method, descriptor=f"grid:{N}", timing=timing)

    return run_scan(job, list(N_list), threads=threads, desc='strichartz')


@dataclass
class ExtremizerRow:
    N: int
    ratio: float
    ratio4_over_log: float
    rectangles: int
    seconds: float = 0.0


def extremizer_row(N: int, timing: bool = False) -> ExtremizerRow:
    """R(N) at T = 2 pi for phi^ = chi_{[-N, N]^2}: R^4 = Q0 / (2 pi n^2)."""
    from quadruple_sum import count_rectangles_box
    from spectrum_core import BoxRegion

    started = time.perf_counter()
    n = (2 * N + 1) ** 2
    q0 = count_rectangles_box(BoxRegion.centered(N))
    r4 = q0 / (TWO_PI * n * n)
    seconds = time.perf_counter() - started if timing else 0.0
    return ExtremizerRow(N, r4 ** 0.25, r4 / log_max1(N), q0, seconds)


def extremizer_scan(N_list: Sequence[int], threads: int = 1, timing: bool = False) -> List[ExtremizerRow]:
    from scan_manager import run_scan

    return run_scan(lambda N: extremizer_row(N, timing), list(N_list), threads=threads, desc='extremizer')


# -------------------------------
# Cube-localized piecewise-free check
# -------------------------------
@dataclass
class CubeCheck:
    N: int
    anchor: FreqPoint
    interval: Tuple[float, float]
    l4_4: float
    atom_norm: float

    @property
    def l4(self) -> float:
        return self.l4_4 ** 0.25

    @property
    def ratio(self) -> float:
        return self.l4 / self.atom_norm if self.atom_norm > 0 else 0.0


def cube_local_check(pieces: Sequence[Tuple[float, float, WeightedSpectrum]], N: int,
                     cube: CubeProjection, interval: Tuple[float, float],
                     cap: int = DEFAULT_ENUMERATION_CAP) -> CubeCheck:
    """
    ||P_C u||_{L^4(I x T^2)} / (sum_j ||phi_j||_{L^2}^4)^{1/4} for
    u(t) = sum_j 1_{[t_{j-1}, t_j)}(t) e^{it Lap} phi_j.
    """
    a, b = interval
    if not b > a:
        raise SpectrumError(f"empty interval [{a}, {b}]", 'bad_interval')
    if (b - a) > 1.0 / log_max1(N) * (1 + 1e-12):
        raise SpectrumError(f"|I| = {b - a:.6g} exceeds 1/log N = {1.0 / log_max1(N):.6g}", 'bad_interval')
    if cube.N != N:
        raise SpectrumError(f"cube size {cube.N} does not match N={N}", 'bad_interval')
    previous_end = -math.inf
    total = []
    for start, end, phi in pieces:
        if not end > start or start < previous_end:
            raise SpectrumError("pieces must be ordered, nonempty and non-overlapping", 'bad_interval')
        previous_end = end
        lo, hi = max(a, start), min(b, end)
        localized = project(phi, cube)
        if hi > lo and len(localized):
            total.append(l4_time_integral(localized, hi - lo, t_start=lo, cap=cap))
    norm4 = math.fsum(phi.l2_torus_norm() ** 4 for _, _, phi in pieces)
    return CubeCheck(N, cube.anchor, (a, b), math.fsum(total), norm4 ** 0.25)
