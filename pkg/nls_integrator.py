"""
NLS Integrator Module
Strang split-step spectral solver for the cubic NLS on T^2,

    i u_t + Lap u = sign |u|^2 u,   sign = +1 defocusing, -1 focusing,

with mass / Hamiltonian / H^s tracking and the logarithmic-window growth
experiment.
"""
import math
import sys
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

import console_log
from console_log import log_to_console
from spectrum_core import SpectrumError, TWO_PI, WeightedSpectrum, is_dyadic, log_max1
from schrodinger_propagator import analyze_physical, sample_physical

BLOWUP_FACTOR = 1e6


class NumericalFailure(RuntimeError):
    """Non-finite field values or a flagged norm blow-up."""

    error_code = 'numerical_failure'

    def __init__(self, message: str, t: Optional[float] = None):
        super().__init__(message if t is None else f"{message} (t={t:.6g})")
        self.t = t


def grid_size(N: int) -> int:
    """Smallest odd n_x >= max(3N, 2N + 1)."""
    n = max(3 * N, 2 * N + 1)
    return n if n % 2 == 1 else n + 1


def _wavenumbers(n_x: int) -> Tuple[np.ndarray, np.ndarray]:
    k = np.rint(np.fft.fftfreq(n_x, d=1.0 / n_x)).astype(np.int64)
    kx, ky = np.meshgrid(k, k, indexing='ij')
    return kx, ky


@dataclass
class NLSField:
    """Field samples on the n_x grid at time t; modes up to (n_x - 1) / 2 are carried."""

    N: int
    n_x: int
    samples: np.ndarray
    sign: int = 1
    t: float = 0.0

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise SpectrumError(f"sign must be +1 or -1, got {self.sign}", 'bad_sign')
        if self.samples.shape != (self.n_x, self.n_x):
            raise SpectrumError("sample array does not match the grid", 'bad_grid')

    @classmethod
    def from_spectrum(cls, f: WeightedSpectrum, N: int, sign: int = 1) -> 'NLSField':
        if len(f) and f.max_abs_coordinate() > N:
            raise SpectrumError(f"initial spectrum leaves [-{N}, {N}]^2", 'spectrum_outside_band')
        n_x = grid_size(N)
        return cls(N, n_x, sample_physical(f, n_x).samples, sign)

    @classmethod
    def from_samples(cls, samples: np.ndarray, N: int, sign: int = 1, t: float = 0.0) -> 'NLSField':
        samples = np.asarray(samples, dtype=np.complex128)
        return cls(N, samples.shape[0], samples.copy(), sign, t)

    def coefficients(self) -> np.ndarray:
        """Fourier coefficients in the sum_xi f(xi) e^{i xi.x} convention (FFT layout)."""
        return np.fft.fft2(self.samples) / (self.n_x * self.n_x)

    def to_spectrum(self, tolerance: float = 1e-14) -> WeightedSpectrum:
        from schrodinger_propagator import PhysicalGrid
        return analyze_physical(PhysicalGrid(self.n_x, self.samples), tolerance)

    def with_samples(self, samples: np.ndarray, t: float) -> 'NLSField':
        return replace(self, samples=samples, t=t)


# -------------------------------
# Conserved quantities and norms
# -------------------------------
def mass(state: NLSField) -> float:
    """int |u|^2 = (2 pi)^2 mean |u|^2."""
    return TWO_PI ** 2 * float(np.mean(np.abs(state.samples) ** 2))


def hamiltonian(state: NLSField) -> float:
    """int |grad u|^2 + sign * 1/2 int |u|^4."""
    kx, ky = _wavenumbers(state.n_x)
    c = state.coefficients()
    kinetic = TWO_PI ** 2 * math.fsum(((kx * kx + ky * ky) * np.abs(c) ** 2).ravel().tolist())
    quartic = TWO_PI ** 2 * float(np.mean(np.abs(state.samples) ** 4))
    return kinetic + state.sign * 0.5 * quartic


def sobolev_norm(state, s: float) -> float:
    """2 pi (sum_xi (1 + |xi|^2)^s |f(xi)|^2)^{1/2} for a field or a spectrum."""
    if not 0 < s <= 1:
        raise SpectrumError(f"Sobolev index must lie in (0, 1], got {s}", 'bad_sobolev_index')
    if isinstance(state, WeightedSpectrum):
        c = state.coords
        weights = (1.0 + c[:, 0] ** 2 + c[:, 1] ** 2) ** s
        return TWO_PI * math.sqrt(math.fsum((weights * np.abs(state.values) ** 2).tolist()))
    kx, ky = _wavenumbers(state.n_x)
    weights = (1.0 + kx * kx + ky * ky) ** s
    return TWO_PI * math.sqrt(math.fsum((weights * np.abs(state.coefficients()) ** 2).ravel().tolist()))


def l2_norm(state: NLSField) -> float:
    return math.sqrt(mass(state))


def band_mask(state: NLSField) -> np.ndarray:
    """True on the modes of [-N, N]^2, in FFT layout."""
    kx, ky = _wavenumbers(state.n_x)
    return (np.abs(kx) <= state.N) & (np.abs(ky) <= state.N)


def spectral_tail(state: NLSField) -> float:
    """Fraction of the mass carried by modes outside [-N, N]^2."""
    power = np.abs(state.coefficients()) ** 2
    total = power.sum()
    if total == 0:
        return 0.0
    return float(power[~band_mask(state)].sum() / total)


# -------------------------------
# Split-step propagation
# -------------------------------
def linear_step(state: NLSField, dt: float) -> NLSField:
    """Exact free flow: Fourier coefficient at k times e^{-i|k|^2 dt}."""
    if dt == 0:
        return state
    kx, ky = _wavenumbers(state.n_x)
    phase = np.exp(-1j * dt * (kx * kx + ky * ky).astype(np.float64))
    samples = np.fft.ifft2(np.fft.fft2(state.samples) * phase)
    return state.with_samples(samples, state.t + dt)


def nonlinear_step(state: NLSField, dt: float) -> NLSField:
    """Exact flow of i u_t = sign |u|^2 u: u <- u e^{-i sign |u|^2 dt}; |u| is unchanged pointwise."""
    if dt == 0:
        return state
    u = state.samples
    # |u|^2 u spills past [-N, N]^2 into the padding band |k| <= (n_x - 1) / 2
    # and is kept there; see band_projection for the truncated variant.
    return state.with_samples(u * np.exp(-1j * state.sign * dt * np.abs(u) ** 2), state.t)


def band_projection(state: NLSField) -> NLSField:
    """Zero every Fourier mode outside [-N, N]^2."""
    c = np.fft.fft2(state.samples)
    c[~band_mask(state)] = 0.0
    return state.with_samples(np.fft.ifft2(c), state.t)


def strang_step(state: NLSField, dt: float, truncate: bool = False) -> NLSField:
    """L(dt/2) N(dt) L(dt/2), optionally projecting onto [-N, N]^2 after N(dt)."""
    half = linear_step(state, 0.5 * dt)
    mid = nonlinear_step(half, dt)
    if truncate:
        mid = band_projection(mid)
    return linear_step(mid, 0.5 * dt)


def _check_finite(state: NLSField):
    if not np.all(np.isfinite(state.samples)):
        raise NumericalFailure("non-finite field values", state.t)


def _step_count(T: float, dt: float) -> int:
    if not dt > 0:
        raise SpectrumError(f"time step must be positive, got {dt}", 'bad_time')
    return max(1, int(math.ceil(T / dt - 1e-9)))


@dataclass
class TrajectoryRow:
    t: float
    mass: float
    hamiltonian: float
    hs_norm: float
    window_index: int = 0
    growth_factor: float = 1.0


def _row(state: NLSField, s: float, window_index: int = 0, growth: float = 1.0) -> TrajectoryRow:
    return TrajectoryRow(state.t, mass(state), hamiltonian(state), sobolev_norm(state, s), window_index, growth)


def integrate(u0: NLSField, T: float, dt: float, s: float = 1.0,
              record_every: int = 0, truncate: bool = False) -> Tuple[NLSField, List[TrajectoryRow]]:
    """
    Strang steps of size T / ceil(T / dt) from u0 to u0.t + T. Rows are
    recorded at the start, every ``record_every`` steps and at the end.
    With ``truncate`` the field stays inside [-N, N]^2 and the mass is no
    longer conserved exactly.
    """
    if T == 0:
        return u0, [_row(u0, s)]
    n_steps = _step_count(abs(T), dt)
    h = T / n_steps
    state = u0
    rows = [_row(state, s)]
    for k in tqdm(range(1, n_steps + 1), desc='nls', file=sys.stderr,
                  disable=not (console_log.verbosity >= 2 and n_steps >= 1000)):
        state = strang_step(state, h, truncate)
        if record_every and k % record_every == 0 and k != n_steps:
            _check_finite(state)
            rows.append(_row(state, s))
    _check_finite(state)
    rows.append(_row(state, s))
    return state, rows


def evolve_field(u0: NLSField, T: float, dt: float, truncate: bool = False) -> NLSField:
    """Strang propagation without row bookkeeping."""
    n_steps = _step_count(abs(T), dt)
    h = T / n_steps
    state = u0
    for _ in range(n_steps):
        state = strang_step(state, h, truncate)
    _check_finite(state)
    return state


# -------------------------------
# Closed forms and test data
# -------------------------------
def plane_wave(amplitude: complex, xi: Tuple[int, int], N: int, sign: int = 1) -> NLSField:
    f = WeightedSpectrum({xi: amplitude})
    return NLSField.from_spectrum(f, N, sign)


def plane_wave_exact(amplitude: complex, xi: Tuple[int, int], t: float, n_x: int, sign: int = 1) -> np.ndarray:
    """A e^{i(xi.x - (|xi|^2 + sign |A|^2) t)} on the n_x grid."""
    x = TWO_PI * np.arange(n_x) / n_x
    X, Y = np.meshgrid(x, x, indexing='ij')
    omega = xi[0] ** 2 + xi[1] ** 2 + sign * abs(amplitude) ** 2
    return amplitude * np.exp(1j * (xi[0] * X + xi[1] * Y - omega * t))


def random_smooth_data(rng: np.random.Generator, N: int, l2_target: float, width: float = 2.0) -> WeightedSpectrum:
    """Gaussian-damped random coefficients on [-N, N]^2 scaled to ||u||_{L^2} = l2_target."""
    k = np.arange(-N, N + 1)
    kx, ky = np.meshgrid(k, k, indexing='ij')
    damp = np.exp(-(kx * kx + ky * ky) / (2.0 * width * width))
    coeffs = (rng.standard_normal(kx.shape) + 1j * rng.standard_normal(kx.shape)) * damp
    f = WeightedSpectrum({(int(a), int(b)): complex(c) for a, b, c in zip(kx.ravel(), ky.ravel(), coeffs.ravel())})
    norm = f.l2_torus_norm()
    if norm == 0 or l2_target == 0:
        return WeightedSpectrum()
    return f.scaled(l2_target / norm)


def convergence_order(u0: NLSField, T: float, dt: float) -> float:
    """log2 of the ratio of successive L^2 differences at dt, dt/2, dt/4."""
    u1 = evolve_field(u0, T, dt).samples
    u2 = evolve_field(u0, T, dt / 2).samples
    u4 = evolve_field(u0, T, dt / 4).samples
    e1 = np.sqrt(np.mean(np.abs(u1 - u2) ** 2))
    e2 = np.sqrt(np.mean(np.abs(u2 - u4) ** 2))
    if e2 == 0:
        return math.inf
    return math.log2(e1 / e2)


# -------------------------------
# Window experiment
# -------------------------------
@dataclass
class WindowReport:
    rows: List[TrajectoryRow]
    s: float
    delta: float
    ladder: List[int]
    tau_windows: List[float]
    cumulative_times: List[float]
    growth_factors: List[float]
    ball_N: List[Optional[int]]
    mass_drift: float
    hamiltonian_drift: float
    flagged: bool = False

    @property
    def K_obs(self) -> float:
        return max(self.growth_factors) if self.growth_factors else 1.0

    @property
    def cumulative_time(self) -> float:
        return self.cumulative_times[-1] if self.cumulative_times else 0.0

    @property
    def ladder_sum(self) -> float:
        """sum_j 1 / log N_j over the windows run (the series diverges)."""
        return math.fsum(1.0 / log_max1(N) for N in self.ladder)

    def csv_rows(self) -> List[Tuple]:
        return [(r.t, r.mass, r.hamiltonian, r.hs_norm, r.window_index, r.growth_factor) for r in self.rows]


def ball_membership(l2: float, hs: float, s: float, delta: float, limit: int = 1 << 62) -> Optional[int]:
    """Smallest dyadic N with ||u||_{L^2} + N^{-s} ||u||_{H^s} <= 2 delta (None if none up to limit)."""
    if l2 > 2 * delta:
        return None
    N = 1
    while N <= limit:
        if l2 + N ** (-s) * hs <= 2 * delta:
            return N
        N *= 2
    return None


def window_growth_experiment(u0: NLSField, s: float, delta: float, windows: int, N0: int,
                             K_probe: int = 2, dt: float = 1e-3, strict: bool = True) -> WindowReport:
    """
    Integrate over windows of length 1 / (2 log N_j), N_j = K_probe^j N0,
    recording the H^s growth factor of every window.
    """
    if not is_dyadic(N0) or not is_dyadic(K_probe) or K_probe < 2:
        raise SpectrumError("N0 and K_probe must be dyadic (K_probe >= 2)", 'bad_ladder')
    if l2_norm(u0) > delta * (1 + 1e-12):
        raise SpectrumError(f"||u0||_L2 = {l2_norm(u0):.6g} exceeds delta = {delta}", 'not_small_data')
    state = u0
    first = _row(state, s)
    rows = [first]
    ladder, taus, cumulative, factors, balls = [], [], [], [], []
    elapsed = 0.0
    flagged = False
    for j in range(windows):
        N_j = K_probe ** j * N0
        tau = 1.0 / (2.0 * log_max1(N_j))
        before = sobolev_norm(state, s)
        state = evolve_field(state, tau, dt)
        after = sobolev_norm(state, s)
        factor = after / before if before > 0 else 1.0
        if not math.isfinite(factor) or factor > BLOWUP_FACTOR:
            flagged = True
            if strict:
                raise NumericalFailure(f"H^s norm blew up in window {j}", state.t)
            log_to_console(f"window {j}: H^s growth factor {factor:.3g} flagged", 'WARN')
        elapsed += tau
        ladder.append(N_j)
        taus.append(tau)
        cumulative.append(elapsed)
        factors.append(factor)
        balls.append(ball_membership(l2_norm(state), after, s, delta))
        rows.append(_row(state, s, j + 1, factor))
        log_to_console(f"window {j}: N_j={N_j}, tau={tau:.6g}, growth={factor:.9g}", 'DEBUG')
    m0 = first.mass
    mass_drift = max(abs(r.mass - m0) for r in rows) / m0 if m0 > 0 else 0.0
    h0 = first.hamiltonian
    ham_drift = max(abs(r.hamiltonian - h0) for r in rows) / abs(h0) if h0 != 0 else 0.0
    return WindowReport(rows, s, delta, ladder, taus, cumulative, factors, balls, mass_drift, ham_drift, flagged)
