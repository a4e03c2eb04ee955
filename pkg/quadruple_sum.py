"""
Quadruple Sum Module
Enumeration of parallelograms xi1 + xi3 = xi2 + xi4 over finite spectra and
exact evaluation of the resonance sums they represent.

The space-time L^4 norm of a free solution reduces to a finite sum:

    int_a^b int_{T^2} |e^{it Lap} phi|^4 dx dt
        = (2 pi)^2 Re sum_Q f(xi1) conj f(xi2) f(xi3) conj f(xi4) K(sigma_Q; a, b)

with sigma_Q = |xi1|^2 - |xi2|^2 + |xi3|^2 - |xi4|^2 = 2 (xi1 - xi2).(xi1 - xi4)
and K(sigma; a, b) = (e^{-i sigma a} - e^{-i sigma b}) / (i sigma), K(0; a, b) = b - a.
"""
import math
import sys
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

import console_log
from console_log import log_to_console
from spectrum_core import (
    BoxRegion,
    CapExceededError,
    FreqPoint,
    SpectrumError,
    TWO_PI,
    WeightedSpectrum,
    as_point,
    is_dyadic,
)

DEFAULT_ENUMERATION_CAP = 4096
DEFAULT_RECTANGLE_CAP = 20000
RECTANGLE_PAIR_CAP = 1 << 26  # ordered pairs, and output quadruples, rectangle_quadruples may hold
_INT64_SAFE_SPAN = 2 ** 30  # 2 * (dx*dx' + dy*dy') stays below 2^63
_BLOCK_ELEMENTS = 1 << 20  # candidate pairs handled per numpy block


# -------------------------------
# Domain types
# -------------------------------
@dataclass(frozen=True)
class Parallelogram:
    """Ordered quadruple with xi1 + xi3 = xi2 + xi4 and its signed phase sigma."""

    xi1: FreqPoint
    xi2: FreqPoint
    xi3: FreqPoint
    xi4: FreqPoint
    sigma: int = field(init=False)

    def __post_init__(self):
        a, b, c, d = self.xi1, self.xi2, self.xi3, self.xi4
        if a.x + c.x != b.x + d.x or a.y + c.y != b.y + d.y:
            raise SpectrumError("xi1 + xi3 != xi2 + xi4: not a parallelogram", 'not_parallelogram')
        dx1, dy1 = a.x - b.x, a.y - b.y
        dx4, dy4 = a.x - d.x, a.y - d.y
        object.__setattr__(self, 'sigma', 2 * (dx1 * dx4 + dy1 * dy4))

    @property
    def tau(self) -> int:
        return abs(self.sigma)

    def is_rectangle(self) -> bool:
        return self.sigma == 0

    def has_distinct_vertices(self) -> bool:
        return len({self.xi1, self.xi2, self.xi3, self.xi4}) == 4

    def diagonal_gcd(self) -> Optional[int]:
        """gcd(xi1 - xi4); None for xi1 = xi4."""
        dx, dy = self.xi1.x - self.xi4.x, self.xi1.y - self.xi4.y
        if dx == 0 and dy == 0:
            return None
        return math.gcd(abs(dx), abs(dy))

    def swapped(self) -> 'Parallelogram':
        """(xi2, xi1, xi4, xi3): the pairing with opposite sigma."""
        return Parallelogram(self.xi2, self.xi1, self.xi4, self.xi3)


class TauHistogram:
    """tau -> (count, weighted sum of f(Q)), with a signed-sigma count table."""

    def __init__(self):
        self.counts: Dict[int, int] = {}
        self.signed_counts: Dict[int, int] = {}
        self._partials: Dict[int, List[float]] = {}

    def add_block(self, sigma: np.ndarray, weights: np.ndarray, multiplicity: Optional[np.ndarray] = None):
        """Accumulate one batch; ``multiplicity`` counts repeated sigma entries (weights already scaled)."""
        if len(sigma) == 0:
            return
        sigma = np.asarray(sigma)
        if sigma.dtype == object:
            sigma_keys = [int(s) for s in sigma]
            uniq, inverse = np.unique(np.array(sigma_keys, dtype=object), return_inverse=True)
        else:
            uniq, inverse = np.unique(sigma, return_inverse=True)
        if multiplicity is None:
            counts = np.bincount(inverse, minlength=len(uniq))
        else:
            counts = np.zeros(len(uniq), dtype=np.int64)
            np.add.at(counts, inverse, np.asarray(multiplicity, dtype=np.int64))
        sums = np.bincount(inverse, weights=weights, minlength=len(uniq))
        for s, c, w in zip(uniq.tolist(), counts.tolist(), sums.tolist()):
            s = int(s)
            self.signed_counts[s] = self.signed_counts.get(s, 0) + int(c)
            self.counts[abs(s)] = self.counts.get(abs(s), 0) + int(c)
            self._partials.setdefault(abs(s), []).append(float(w))

    def add(self, tau: int, count: int, weighted: float, sigma: Optional[int] = None):
        self.counts[tau] = self.counts.get(tau, 0) + count
        key = tau if sigma is None else sigma
        self.signed_counts[key] = self.signed_counts.get(key, 0) + count
        self._partials.setdefault(tau, []).append(weighted)

    def weighted(self, tau: int) -> float:
        return math.fsum(self._partials.get(tau, ()))

    def taus(self) -> List[int]:
        return sorted(self.counts)

    def total_count(self) -> int:
        return sum(self.counts.values())

    def total_weighted(self) -> float:
        return math.fsum(w for parts in self._partials.values() for w in parts)

    def is_sign_symmetric(self) -> bool:
        return all(self.signed_counts.get(-s, 0) == c for s, c in self.signed_counts.items())

    def rows(self) -> List[Tuple[int, int, float]]:
        """(tau, count, weighted_sum), ascending in tau."""
        return [(tau, self.counts[tau], self.weighted(tau)) for tau in self.taus()]

    def dyadic(self) -> List[Tuple[int, int, float]]:
        """
        (M, count, weighted_sum) over the dyadic bins tau in [M, 2M).
        The rectangles (tau = 0) are kept in an extra M = 0 row.
        """
        bins: Dict[int, Tuple[int, List[float]]] = {}
        for tau in self.taus():
            M = 0 if tau == 0 else 1 << (tau.bit_length() - 1)
            count, parts = bins.get(M, (0, []))
            bins[M] = (count + self.counts[tau], parts + self._partials[tau])
        return [(M, bins[M][0], math.fsum(bins[M][1])) for M in sorted(bins)]

    def bin_weighted(self, M: int) -> float:
        return math.fsum(w for tau in self.taus() if M <= tau < 2 * M for w in self._partials[tau])

    def to_csv_rows(self, dyadic: bool = False) -> List[Tuple[int, int, float]]:
        return self.dyadic() if dyadic else self.rows()


@dataclass
class QuadrupleBlock:
    """Index arrays of one batch of enumerated quadruples (all sharing xi1)."""

    i1: int
    i2: np.ndarray
    i3: np.ndarray
    i4: np.ndarray
    sigma: np.ndarray


# -------------------------------
# Point-set helpers
# -------------------------------
def point_coords(points: Union[WeightedSpectrum, Iterable]) -> np.ndarray:
    """Coordinates of a point set (or of a spectrum's support) as an (n, 2) int64 array."""
    if isinstance(points, WeightedSpectrum):
        return np.array(points.coords)
    seen = set()
    rows = []
    for p in points:
        p = as_point(p)
        if p in seen:
            raise SpectrumError(f"duplicate frequency {p.as_tuple()}", 'duplicate_frequency')
        seen.add(p)
        rows.append((p.x, p.y))
    rows.sort()
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def _spectrum_values(points) -> np.ndarray:
    if isinstance(points, WeightedSpectrum):
        return np.array(points.values)
    return np.ones(len(point_coords(points)), dtype=np.complex128)


class _PointIndex:
    """Sorted integer keys for exact membership tests inside the bounding box."""

    def __init__(self, coords: np.ndarray):
        self.lo = coords.min(axis=0)
        self.hi = coords.max(axis=0)
        self.span_y = int(self.hi[1] - self.lo[1] + 1)
        keys = self._encode(coords)
        self.order = np.argsort(keys, kind='stable')
        self.sorted_keys = keys[self.order]

    def _encode(self, coords: np.ndarray) -> np.ndarray:
        return (coords[..., 0] - self.lo[0]) * self.span_y + (coords[..., 1] - self.lo[1])

    def lookup(self, coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(found mask, index) for each candidate row."""
        inside = np.all((coords >= self.lo) & (coords <= self.hi), axis=-1)
        keys = np.where(inside, self._encode(np.where(inside[..., None], coords, self.lo)), -1)
        pos = np.searchsorted(self.sorted_keys, keys)
        pos = np.minimum(pos, len(self.sorted_keys) - 1)
        found = inside & (self.sorted_keys[pos] == keys)
        return found, self.order[pos]


def _needs_exact_ints(coords: np.ndarray) -> bool:
    if len(coords) == 0:
        return False
    return int((coords.max(axis=0) - coords.min(axis=0)).max()) > _INT64_SAFE_SPAN


def _sigma(d1: np.ndarray, d4: np.ndarray, exact: bool) -> np.ndarray:
    if exact:
        d1 = d1.astype(object)
        d4 = d4.astype(object)
    return 2 * (d1[..., 0] * d4[..., 0] + d1[..., 1] * d4[..., 1])


def _show_progress(n: int) -> bool:
    return console_log.verbosity >= 1 and n >= 512


# -------------------------------
# Enumeration backends
# -------------------------------
def iter_quadruple_blocks(coords: np.ndarray, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[QuadrupleBlock]:
    """
    Generic backend: xi1 outer (lexicographic), then xi2, then xi4; xi3 is
    found by an indexed lookup of xi2 + xi4 - xi1.
    """
    n = len(coords)
    if n > cap:
        raise CapExceededError('enumeration_cap', cap, n)
    if n == 0:
        return
    index = _PointIndex(coords)
    exact = _needs_exact_ints(coords)
    rows_per_block = max(1, _BLOCK_ELEMENTS // n)
    for i1 in tqdm(range(n), desc='enumerate', file=sys.stderr, disable=not _show_progress(n)):
        xi1 = coords[i1]
        for start in range(0, n, rows_per_block):
            stop = min(n, start + rows_per_block)
            cand = coords[start:stop, None, :] + coords[None, :, :] - xi1
            found, i3 = index.lookup(cand)
            r2, r4 = np.nonzero(found)
            if len(r2) == 0:
                continue
            i2 = r2 + start
            d1 = xi1 - coords[i2]
            d4 = xi1 - coords[r4]
            yield QuadrupleBlock(i1, i2, i3[r2, r4], r4, _sigma(d1, d4, exact))


def _box_translates(lengths: Tuple[int, int], v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Number of xi1 with xi1 + {0, v, w, v+w} inside a box of the given side lengths."""
    total = np.ones(np.broadcast(v[..., 0], w[..., 0]).shape, dtype=np.int64)
    for axis, length in enumerate(lengths):
        a, b = v[..., axis], w[..., axis]
        zero = np.zeros_like(a + b)
        hi = np.maximum(np.maximum(zero, a), np.maximum(b, a + b))
        lo = np.minimum(np.minimum(zero, a), np.minimum(b, a + b))
        total = total * np.maximum(0, length - (hi - lo))
    return total


def detect_box(f: Union[WeightedSpectrum, Iterable]) -> Optional[BoxRegion]:
    """The product box the support fills exactly, or None."""
    coords = point_coords(f)
    if len(coords) == 0:
        return None
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    box = BoxRegion(int(lo[0]), int(hi[0]), int(lo[1]), int(hi[1]))
    if box.size != len(coords):
        return None
    return box


def _require_indicator_box(f) -> Tuple[BoxRegion, float]:
    box = detect_box(f)
    if box is None:
        raise SpectrumError("grid-fast backend requires a full product box", 'grid_fast_not_box')
    values = _spectrum_values(f)
    if not np.all(values == values[0]):
        raise SpectrumError("grid-fast backend requires a constant amplitude on the box", 'grid_fast_not_box')
    return box, float(abs(values[0]) ** 4)


def enumerate_parallelograms(points, backend: str = 'generic',
                             cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[Parallelogram]:
    """Stream every ordered parallelogram of the point set exactly once."""
    coords = point_coords(points)
    if backend == 'generic':
        for block in iter_quadruple_blocks(coords, cap):
            p1 = FreqPoint(*coords[block.i1].tolist())
            for i2, i3, i4 in zip(block.i2.tolist(), block.i3.tolist(), block.i4.tolist()):
                yield Parallelogram(p1, FreqPoint(*coords[i2].tolist()),
                                    FreqPoint(*coords[i3].tolist()), FreqPoint(*coords[i4].tolist()))
    elif backend == 'grid-fast':
        box, _ = _require_indicator_box(points)
        lengths = (box.x1 - box.x0 + 1, box.y1 - box.y0 + 1)
        diffs = _difference_vectors(lengths)
        for v in diffs:
            counts = _box_translates(lengths, v[None, :], diffs)
            for w, c in zip(diffs[counts > 0].tolist(), counts[counts > 0].tolist()):
                wx, wy = w
                for x in range(box.x0 - min(0, v[0], wx, v[0] + wx), box.x1 - max(0, v[0], wx, v[0] + wx) + 1):
                    for y in range(box.y0 - min(0, v[1], wy, v[1] + wy), box.y1 - max(0, v[1], wy, v[1] + wy) + 1):
                        yield Parallelogram(FreqPoint(x, y), FreqPoint(x + int(v[0]), y + int(v[1])),
                                            FreqPoint(x + int(v[0]) + wx, y + int(v[1]) + wy),
                                            FreqPoint(x + wx, y + wy))
    else:
        raise SpectrumError(f"unknown enumeration backend {backend!r}", 'bad_backend')


def _difference_vectors(lengths: Tuple[int, int]) -> np.ndarray:
    lx, ly = lengths
    xs, ys = np.meshgrid(np.arange(-(lx - 1), lx), np.arange(-(ly - 1), ly), indexing='ij')
    return np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.int64)


def tau_histogram(f, backend: str = 'generic', cap: int = DEFAULT_ENUMERATION_CAP) -> TauHistogram:
    """
    Histogram of tau_Q over all parallelograms with weights
    f(Q) = f(xi1) conj f(xi2) f(xi3) conj f(xi4) (real part).
    """
    hist = TauHistogram()
    if backend == 'grid-fast':
        box, weight = _require_indicator_box(f)
        lengths = (box.x1 - box.x0 + 1, box.y1 - box.y0 + 1)
        diffs = _difference_vectors(lengths)
        for v in tqdm(diffs, desc='grid-fast', file=sys.stderr, disable=not _show_progress(len(diffs))):
            counts = _box_translates(lengths, v[None, :], diffs)
            keep = counts > 0
            sigma = 2 * (diffs[keep] @ v)
            hist.add_block(sigma, counts[keep] * weight, multiplicity=counts[keep])
        return hist
    coords = point_coords(f)
    values = _spectrum_values(f)
    for block in iter_quadruple_blocks(coords, cap):
        hist.add_block(block.sigma, _quadruple_weights(values, block).real)
    return hist


def _quadruple_weights(values: np.ndarray, block: QuadrupleBlock) -> np.ndarray:
    return values[block.i1] * np.conj(values[block.i2]) * values[block.i3] * np.conj(values[block.i4])


# -------------------------------
# Counting
# -------------------------------
def additive_energy(points) -> int:
    """sum_eta r(eta)^2 with r(eta) = #{(a, b) in S^2 : a + b = eta}."""
    coords = point_coords(points)
    if len(coords) == 0:
        return 0
    sums = (coords[:, None, :] + coords[None, :, :]).reshape(-1, 2)
    _, r = np.unique(sums, axis=0, return_counts=True)
    return int(sum(int(c) * int(c) for c in r.tolist()))


def count_parallelograms(points, backend: str = 'generic', cap: int = DEFAULT_ENUMERATION_CAP) -> int:
    if backend == 'grid-fast':
        box, _ = _require_indicator_box(points)
        lengths = (box.x1 - box.x0 + 1, box.y1 - box.y0 + 1)
        diffs = _difference_vectors(lengths)
        return sum(int(_box_translates(lengths, v[None, :], diffs).sum()) for v in diffs)
    return sum(len(block.i2) for block in iter_quadruple_blocks(point_coords(points), cap))


@dataclass
class RectangleSet:
    """Index arrays (into ``coords``) of every sigma = 0 parallelogram."""

    coords: np.ndarray
    i1: np.ndarray
    i2: np.ndarray
    i3: np.ndarray
    i4: np.ndarray

    def __len__(self) -> int:
        return len(self.i1)

    def distinct_vertices(self) -> 'RectangleSet':
        keep = (self.i1 != self.i3) & (self.i2 != self.i1) & (self.i2 != self.i3)
        return RectangleSet(self.coords, self.i1[keep], self.i2[keep], self.i3[keep], self.i4[keep])


def rectangle_quadruples(points, cap: int = DEFAULT_RECTANGLE_CAP,
                         pair_cap: int = RECTANGLE_PAIR_CAP) -> RectangleSet:
    """
    All ordered sigma = 0 quadruples. Diagonals (xi1, xi3) and (xi2, xi4) of a
    rectangle share midpoint and length, so ordered pairs are grouped by
    (a + b, |a - b|^2) and every group of size r contributes r^2 quadruples.

    Both the n^2 pair keys and the sum of r^2 output rows are checked
    against ``pair_cap`` before anything of that size is allocated.
    """
    coords = point_coords(points)
    n = len(coords)
    if n > cap:
        raise CapExceededError('rectangle_cap', cap, n)
    empty = np.zeros(0, dtype=np.int64)
    if n == 0:
        return RectangleSet(coords, empty, empty, empty, empty)
    pairs = n * n
    if pairs > pair_cap:
        raise CapExceededError('rectangle_pair_cap', pair_cap, pairs)
    if _needs_exact_ints(coords):
        a_idx, b_idx = np.divmod(np.arange(pairs), n)
        s = coords[a_idx] + coords[b_idx]
        d = coords[a_idx] - coords[b_idx]
        length = np.array([int(x) * int(x) + int(y) * int(y) for x, y in d.tolist()], dtype=object)
        order = sorted(range(pairs), key=lambda k: (int(s[k, 0]), int(s[k, 1]), length[k]))
        order = np.array(order, dtype=np.int64)
        keys = [(int(s[k, 0]), int(s[k, 1]), length[k]) for k in order]
        boundary = np.array([True] + [keys[k] != keys[k - 1] for k in range(1, len(keys))])
    else:
        s0 = np.empty(pairs, dtype=np.int64)
        s1 = np.empty(pairs, dtype=np.int64)
        length = np.empty(pairs, dtype=np.int64)
        rows = max(1, _BLOCK_ELEMENTS // n)
        for start in range(0, n, rows):
            stop = min(n, start + rows)
            block = slice(start * n, stop * n)
            s = coords[start:stop, None, :] + coords[None, :, :]
            d = coords[start:stop, None, :] - coords[None, :, :]
            s0[block] = s[..., 0].ravel()
            s1[block] = s[..., 1].ravel()
            length[block] = (d * d).sum(axis=2).ravel()
        order = np.lexsort((length, s1, s0))
        ks0, ks1, kl = s0[order], s1[order], length[order]
        boundary = np.ones(pairs, dtype=bool)
        boundary[1:] = (ks0[1:] != ks0[:-1]) | (ks1[1:] != ks1[:-1]) | (kl[1:] != kl[:-1])
    starts = np.flatnonzero(boundary)
    sizes = np.diff(np.append(starts, pairs))
    squares = sizes * sizes
    total = int(squares.sum())
    if total > pair_cap:
        raise CapExceededError('rectangle_pair_cap', pair_cap, total)
    gid = np.repeat(np.arange(len(starts)), squares)
    offsets = np.cumsum(squares) - squares
    k = np.arange(total) - offsets[gid]
    first = order[starts[gid] + k // sizes[gid]]
    second = order[starts[gid] + k % sizes[gid]]
    return RectangleSet(coords, first // n, second // n, first % n, second % n)


def count_rectangles_box(box: BoxRegion) -> int:
    """
    Grid-fast sigma = 0 count on a product box: v = 0 admits any w; v != 0
    admits w = k perp(v) / gcd(v). Translates are counted in closed form.
    """
    lengths = (box.x1 - box.x0 + 1, box.y1 - box.y0 + 1)
    if lengths[0] <= 0 or lengths[1] <= 0:
        return 0
    diffs = _difference_vectors(lengths)
    zero = np.zeros((1, 2), dtype=np.int64)
    total = int(_box_translates(lengths, zero, diffs).sum())
    kmax = max(lengths)
    ks = np.arange(-kmax, kmax + 1, dtype=np.int64)
    for vx, vy in diffs.tolist():
        if vx == 0 and vy == 0:
            continue
        g = math.gcd(abs(vx), abs(vy))
        step = np.array([-vy // g, vx // g], dtype=np.int64)
        w = ks[:, None] * step[None, :]
        total += int(_box_translates(lengths, np.array([[vx, vy]], dtype=np.int64), w).sum())
    return total


# -------------------------------
# Time integrals
# -------------------------------
def time_kernel(sigma: np.ndarray, t_start: float, T: float) -> np.ndarray:
    """(e^{-i sigma a} - e^{-i sigma b}) / (i sigma) on [a, b] = [t_start, t_start + T]; b - a at sigma = 0."""
    s = np.asarray(sigma, dtype=np.float64)
    out = np.full(s.shape, complex(T), dtype=np.complex128)
    nz = s != 0
    sn = s[nz]
    out[nz] = (np.exp(-1j * sn * t_start) - np.exp(-1j * sn * (t_start + T))) / (1j * sn)
    return out


def sine_kernel(sigma: np.ndarray, T: float) -> np.ndarray:
    """K(sigma, T) = sin(sigma T) / sigma with K(0, T) = T."""
    s = np.asarray(sigma, dtype=np.float64)
    out = np.full(s.shape, float(T))
    nz = s != 0
    out[nz] = np.sin(s[nz] * T) / s[nz]
    return out


def l4_time_integral(f: WeightedSpectrum, T: float, t_start: float = 0.0,
                     cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """
    Exact value of int_{t_start}^{t_start+T} int_{T^2} |e^{it Lap} phi|^4 dx dt.

    Nonnegative spectra starting at t = 0 go through the real kernel
    sin(sigma T)/sigma; everything else through the complex kernel.
    """
    if not T > 0:
        raise SpectrumError(f"time length must be positive, got {T}", 'bad_time')
    coords = f.coords
    values = np.array(f.values)
    real_path = f.is_nonnegative() and t_start == 0
    partials = []
    for block in iter_quadruple_blocks(coords, cap):
        weights = _quadruple_weights(values, block)
        if real_path:
            terms = weights.real * sine_kernel(block.sigma, T)
        else:
            terms = (weights * time_kernel(block.sigma, t_start, T)).real
        partials.append(math.fsum(terms.tolist()))
    value = (TWO_PI ** 2) * math.fsum(partials)
    log_to_console(f"l4_time_integral: support={len(f)}, T={T:.6g}, t0={t_start:.6g}, value={value:.12g}", 'DEBUG')
    return max(value, 0.0)


def l4_full_period(f: WeightedSpectrum, periods: int = 1, backend: str = 'auto',
                   cap: int = DEFAULT_RECTANGLE_CAP) -> float:
    """
    int_0^{2 pi k} int |e^{it Lap} phi|^4 = (2 pi)^2 * 2 pi k * sum_{sigma_Q = 0} f(Q).

    backend: 'grid-fast' (indicator boxes), 'rectangles' (diagonal grouping),
    'generic' (full enumeration filtered to sigma = 0), or 'auto'.
    """
    if periods < 1:
        raise SpectrumError(f"periods must be a positive integer, got {periods}", 'bad_time')
    if backend == 'auto':
        backend = 'grid-fast' if _is_indicator_box(f) else 'rectangles'
    if backend == 'grid-fast':
        box, weight = _require_indicator_box(f)
        resonant = count_rectangles_box(box) * weight
    elif backend == 'rectangles':
        rects = rectangle_quadruples(f, cap)
        values = np.array(f.values)
        w = values[rects.i1] * np.conj(values[rects.i2]) * values[rects.i3] * np.conj(values[rects.i4])
        resonant = math.fsum(w.real.tolist())
    elif backend == 'generic':
        values = np.array(f.values)
        parts = []
        for block in iter_quadruple_blocks(f.coords, DEFAULT_ENUMERATION_CAP):
            zero = block.sigma == 0
            sub = QuadrupleBlock(block.i1, block.i2[zero], block.i3[zero], block.i4[zero], block.sigma[zero])
            parts.append(math.fsum(_quadruple_weights(values, sub).real.tolist()))
        resonant = math.fsum(parts)
    else:
        raise SpectrumError(f"unknown backend {backend!r}", 'bad_backend')
    return (TWO_PI ** 2) * TWO_PI * periods * resonant


def _is_indicator_box(f) -> bool:
    try:
        _require_indicator_box(f)
    except SpectrumError:
        return False
    return True


def averaged_kernel(tau: np.ndarray, T0: float) -> np.ndarray:
    """kappa(tau, T0) = (1 - cos(2 T0 tau)) / (T0 tau^2), kappa(0, T0) = 2 T0."""
    t = np.asarray(tau, dtype=np.float64)
    out = np.full(t.shape, 2.0 * T0)
    nz = t != 0
    out[nz] = (1.0 - np.cos(2.0 * T0 * t[nz])) / (T0 * t[nz] ** 2)
    return out


def averaged_kernel_sum(f: WeightedSpectrum, T0: float, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """sum_Q f(Q) kappa(tau_Q, T0) for a nonnegative spectrum."""
    if not T0 > 0:
        raise SpectrumError(f"T0 must be positive, got {T0}", 'bad_time')
    f.require_nonnegative('averaged_kernel_sum')
    hist = tau_histogram(f, cap=cap)
    taus = np.array(hist.taus(), dtype=np.float64)
    kappa = averaged_kernel(taus, T0)
    return math.fsum(k * hist.weighted(tau) for k, tau in zip(kappa.tolist(), hist.taus()))


# -------------------------------
# gcd filtering
# -------------------------------
def divisor_density(g: int, M: int) -> float:
    """(1/M) #{tau in [M, 2M) : g | tau}."""
    if g < 1 or M < 1:
        raise ValueError(f"divisor_density needs g, M >= 1, got g={g}, M={M}")
    return ((2 * M - 1) // g - (M - 1) // g) / M


@dataclass
class GcdAverage:
    """
    Dyadic bin average next to its rectangle bound.

    direct is (1/M) sum_{tau in [M, 2M)} sum_{Q : tau_Q = tau} f(Q). Each
    quadruple with xi1 - xi4 = v and tau_Q = tau pairs two chords of
    direction v, so by Cauchy-Schwarz the bin is dominated by twice the
    rectangles with the same v, counted once for every tau in the bin that
    g = gcd(v) divides:

        direct <= bound = 2 sum_{rect Q, xi1 != xi4} f(Q) divisor_density(g_Q, M)
                        <= 4 sum_{rect Q, xi1 != xi4} f(Q) / g_Q = 4 gcd_weighted
    """

    M: int
    direct: float
    bound: float
    gcd_weighted: float
    by_gcd: Dict[int, Tuple[int, float]]

    @property
    def holds(self) -> bool:
        slack = 1e-12 * max(self.bound, 1e-300)
        return self.direct <= self.bound + slack and self.bound <= 4.0 * self.gcd_weighted + slack

    @property
    def ratio(self) -> float:
        return self.direct / self.bound if self.bound > 0 else 0.0


def gcd_filtered_average(f: WeightedSpectrum, M: int, cap: int = DEFAULT_ENUMERATION_CAP) -> GcdAverage:
    """
    One enumeration pass: the tau histogram gives the direct bin average,
    the resonant quadruples with xi1 != xi4 are grouped by
    g = gcd(xi1 - xi4) and weighted by the share of the bin that g divides.
    """
    if not is_dyadic(M):
        raise SpectrumError(f"M must be dyadic, got {M}", 'bad_dyadic')
    f.require_nonnegative('gcd_filtered_average')
    coords = f.coords
    values = np.array(f.values)
    hist = TauHistogram()
    counts: Dict[int, int] = {}
    parts: Dict[int, List[float]] = {}
    for block in iter_quadruple_blocks(coords, cap):
        weights = _quadruple_weights(values, block).real
        hist.add_block(block.sigma, weights)
        resonant = (block.sigma == 0) & (block.i1 != block.i4)
        if not np.any(resonant):
            continue
        d = coords[block.i1] - coords[block.i4[resonant]]
        g = np.gcd(np.abs(d[:, 0]), np.abs(d[:, 1]))
        for gi, wi in zip(g.tolist(), weights[resonant].tolist()):
            counts[gi] = counts.get(gi, 0) + 1
            parts.setdefault(gi, []).append(wi)
    by_gcd = {g: (counts[g], math.fsum(parts[g])) for g in sorted(counts)}
    direct = hist.bin_weighted(M) / M
    bound = 2.0 * math.fsum(w * divisor_density(g, M) for g, (_, w) in by_gcd.items())
    gcd_weighted = math.fsum(w / g for g, (_, w) in by_gcd.items())
    log_to_console(f"gcd average M={M}: direct={direct:.6g} bound={bound:.6g} "
                   f"sum f/g={gcd_weighted:.6g}", 'DEBUG')
    return GcdAverage(M, direct, bound, gcd_weighted, by_gcd)


# -------------------------------
# CSV rows
# -------------------------------
HISTOGRAM_HEADER = ('tau', 'count', 'weighted_sum')
DYADIC_HEADER = ('M', 'count', 'weighted_sum')


def histogram_csv_rows(hist: TauHistogram, dyadic: bool = False) -> List[Tuple]:
    return list(hist.to_csv_rows(dyadic))
