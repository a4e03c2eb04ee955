"""
Incidence Geometry Module
Rich-line counting on lattice point sets, cross classification, the
exceptional-set decomposition of nonnegative spectra and the rectangle
counting bins used to check the level-set counting bounds.
"""
import math
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

import console_log
from console_log import log_to_console
from quadruple_sum import point_coords, rectangle_quadruples
from spectrum_core import (
    CapExceededError,
    DyadicLevels,
    FreqPoint,
    Level,
    SpectrumError,
    WeightedSpectrum,
    build_levels,
    make_rng,
    random_spectrum,
)

DEFAULT_LINE_CAP = 100000
DEFAULT_BIN_CAP = 2000
DEFAULT_MAX_STEPS = 64
DEFAULT_TOLERANCE = 1e-12
ST_RATIO_BOUND = 8.0


# -------------------------------
# Lines
# -------------------------------
@dataclass(frozen=True, order=True)
class Line:
    """
    Lattice line {p : perp(direction) . p = offset}; the direction is
    primitive with x > 0, or x = 0 and y > 0.
    """

    dx: int
    dy: int
    offset: int

    def __post_init__(self):
        if self.dx == 0 and self.dy == 0:
            raise SpectrumError("line direction must be nonzero", 'bad_line')
        if math.gcd(abs(self.dx), abs(self.dy)) != 1 or not (self.dx > 0 or (self.dx == 0 and self.dy > 0)):
            raise SpectrumError(f"line direction ({self.dx}, {self.dy}) is not primitive and normalized",
                                'bad_line')

    @classmethod
    def through(cls, p: FreqPoint, direction: Tuple[int, int]) -> 'Line':
        dx, dy = normalize_direction(*direction)
        return cls(dx, dy, -dy * p.x + dx * p.y)

    @property
    def direction(self) -> FreqPoint:
        return FreqPoint(self.dx, self.dy)

    def contains(self, p: FreqPoint) -> bool:
        return -self.dy * p.x + self.dx * p.y == self.offset

    def is_perpendicular(self, other: 'Line') -> bool:
        return self.dx * other.dx + self.dy * other.dy == 0


def normalize_direction(dx: int, dy: int) -> Tuple[int, int]:
    g = math.gcd(abs(dx), abs(dy))
    if g == 0:
        raise SpectrumError("line direction must be nonzero", 'bad_line')
    dx, dy = dx // g, dy // g
    if dx < 0 or (dx == 0 and dy < 0):
        dx, dy = -dx, -dy
    return dx, dy


def _normalize_directions(d: np.ndarray) -> np.ndarray:
    g = np.gcd(np.abs(d[:, 0]), np.abs(d[:, 1]))
    out = d // g[:, None]
    flip = (out[:, 0] < 0) | ((out[:, 0] == 0) & (out[:, 1] < 0))
    out[flip] *= -1
    return out


def _line_groups(coords: np.ndarray, min_points: int = 2,
                 cap: int = DEFAULT_LINE_CAP) -> List[Tuple[Line, np.ndarray]]:
    """
    Every line with at least ``min_points`` points of ``coords`` with its
    incident indices. Each line is recorded from its lowest-index point,
    where the pairs to later points carry the full incidence list.
    """
    n = len(coords)
    if n > cap:
        raise CapExceededError('line_cap', cap, n)
    min_points = max(2, min_points)
    seen = set()
    groups: List[Tuple[Line, np.ndarray]] = []
    for i in tqdm(range(n - 1), desc='lines', file=sys.stderr,
                  disable=not (console_log.verbosity >= 1 and n >= 2048)):
        others = np.arange(i + 1, n)
        dirs = _normalize_directions(coords[i + 1:] - coords[i])
        uniq, inverse, counts = np.unique(dirs, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        px, py = int(coords[i, 0]), int(coords[i, 1])
        for g in np.flatnonzero(counts >= min_points - 1).tolist():
            dx, dy = int(uniq[g, 0]), int(uniq[g, 1])
            key = (dx, dy, -dy * px + dx * py)
            if key in seen:
                continue
            seen.add(key)
            members = np.concatenate(([i], others[inverse == g]))
            groups.append((Line(*key), members))
    groups.sort(key=lambda item: item[0])
    return groups


def collect_lines(points, min_points: int = 2, cap: int = DEFAULT_LINE_CAP) -> Dict[Line, Tuple[FreqPoint, ...]]:
    """Every line through at least two points of the set, with its full incidence list."""
    coords = point_coords(points)
    return {line: tuple(FreqPoint(int(coords[k, 0]), int(coords[k, 1])) for k in sorted(members.tolist()))
            for line, members in _line_groups(coords, min_points, cap)}


def line_incidence_counts(points, cap: int = DEFAULT_LINE_CAP) -> Dict[Line, int]:
    return {line: len(members) for line, members in _line_groups(point_coords(points), 2, cap)}


@dataclass
class RichLineReport:
    """m = #lines with >= k points of an n-point set, against n^2/k^3 + n/k."""

    n: int
    k: int
    lines: List[Line]

    @property
    def m(self) -> int:
        return len(self.lines)

    @property
    def ratio(self) -> float:
        return self.m / szemeredi_trotter_bound(self.n, self.k)


def szemeredi_trotter_bound(n: int, k: int) -> float:
    return n * n / k ** 3 + n / k


def rich_lines(points, k: int, cap: int = DEFAULT_LINE_CAP) -> RichLineReport:
    if k < 2:
        raise SpectrumError(f"richness k must be >= 2, got {k}", 'bad_richness')
    coords = point_coords(points)
    n = len(coords)
    if k > n:
        return RichLineReport(n, k, [])
    return RichLineReport(n, k, [line for line, _ in _line_groups(coords, k, cap)])


def szemeredi_trotter_scan(points, cap: int = DEFAULT_LINE_CAP) -> List[RichLineReport]:
    """m(k) for every k in [2, n] from a single line collection."""
    coords = point_coords(points)
    n = len(coords)
    groups = _line_groups(coords, 2, cap)
    reports = []
    for k in range(2, n + 1):
        reports.append(RichLineReport(n, k, [line for line, members in groups if len(members) >= k]))
    return reports


def rich_lines_csv_rows(reports: Sequence[RichLineReport]) -> List[Tuple]:
    return [(r.n, r.k, r.m, r.ratio) for r in reports]


# -------------------------------
# Richness on level sets
# -------------------------------
def _is_rich(count: int, j: int, C: int) -> bool:
    """count >= 2^{j/2 + C}, compared as count^2 >= 2^{j + 2C}."""
    return count * count >= 2 ** (j + 2 * C)


def _every_line_rich(j: int, C: int) -> bool:
    return j + 2 * C == 0


class _LevelLines:
    """Line incidence counts of one level set S_j, looked up by (direction, point)."""

    def __init__(self, level: Level):
        self.level = level
        coords = level.coords
        self.counts: Dict[Tuple[int, int, int], int] = {}
        self.through: Dict[FreqPoint, List[Tuple[Line, int]]] = {p: [] for p in level.points}
        if len(coords) >= 2:
            for line, members in _line_groups(coords, 2):
                count = len(members)
                self.counts[(line.dx, line.dy, line.offset)] = count
                for k in members.tolist():
                    self.through[FreqPoint(int(coords[k, 0]), int(coords[k, 1]))].append((line, count))

    def count(self, p: FreqPoint, direction: Tuple[int, int]) -> int:
        dx, dy = normalize_direction(*direction)
        return self.counts.get((dx, dy, -dy * p.x + dx * p.y), 1)


# -------------------------------
# Crosses
# -------------------------------
@dataclass(frozen=True)
class Cross:
    """Point xi with two orthogonal lines through it, typed by their richness in S_j."""

    xi: FreqPoint
    line1: Line
    line2: Line
    count: int
    j: int
    ctype: int

    @property
    def richness(self) -> float:
        """a = log2 max{#(l1 cap S_j), #(l2 cap S_j)}."""
        return math.log2(self.count)


def cross_type(count: int, j: int, C: int) -> int:
    """1 if a >= j/2 + C, 3 if a = 0, otherwise 2."""
    if _is_rich(count, j, C):
        return 1
    if count == 1:
        return 3
    return 2


def classify_crosses(levels: DyadicLevels) -> Dict[FreqPoint, List[Cross]]:
    """
    Crosses at every point of every level: one per orthogonal direction pair
    carrying a line with a second point of S_j, plus the axis cross.
    """
    result: Dict[FreqPoint, List[Cross]] = {}
    for level in levels.levels:
        if not level.points:
            continue
        lines = _LevelLines(level)
        for p in level.points:
            pairs = {(0, 1)}  # axis cross: canonical form of {(1, 0), (0, 1)}
            for line, _ in lines.through[p]:
                d = (line.dx, line.dy)
                q = normalize_direction(-line.dy, line.dx)
                pairs.add(min(d, q))
            crosses = []
            for d in sorted(pairs):
                q = normalize_direction(-d[1], d[0])
                count = max(lines.count(p, d), lines.count(p, q))
                crosses.append(Cross(p, Line.through(p, d), Line.through(p, q), count, level.j,
                                     cross_type(count, level.j, levels.C)))
            result[p] = crosses
    return result


# -------------------------------
# Exceptional sets
# -------------------------------
@dataclass
class ExceptionalSet:
    """E_j: points of S_j^0 on two lines each carrying >= 2^{j/2+C} points of S_j^0."""

    j: int
    points: Tuple[FreqPoint, ...]
    rich_line_count: int

    @property
    def bound_holds(self) -> bool:
        """sqrt(#E_j) <= number of rich lines."""
        return len(self.points) <= self.rich_line_count ** 2


def _rich_lines_of_level(level: Level, C: int) -> Tuple[List[Line], Dict[FreqPoint, int]]:
    hits: Dict[FreqPoint, int] = {}
    rich = []
    if len(level.points) < 2:
        return rich, hits
    coords = level.coords
    for line, members in _line_groups(coords, 2):
        if _is_rich(len(members), level.j, C):
            rich.append(line)
            for k in members.tolist():
                p = FreqPoint(int(coords[k, 0]), int(coords[k, 1]))
                hits[p] = hits.get(p, 0) + 1
    return rich, hits


def exceptional_sets(levels: DyadicLevels) -> List[ExceptionalSet]:
    result = []
    for level in levels.levels:
        if _every_line_rich(level.j, levels.C):
            # every line through a point is rich, so each point is a crossing
            result.append(ExceptionalSet(level.j, tuple(level.points), len(level.points)))
            continue
        rich, hits = _rich_lines_of_level(level, levels.C)
        exceptional = tuple(p for p in level.points if hits.get(p, 0) >= 2)
        result.append(ExceptionalSet(level.j, exceptional, len(rich)))
    return result


def split_exceptional(levels: DyadicLevels, f: WeightedSpectrum
                      ) -> Tuple[DyadicLevels, WeightedSpectrum, List[ExceptionalSet]]:
    """(levels with S_j = S_j^0 minus E_j, residual f chi_E, the exceptional sets)."""
    ex = exceptional_sets(levels)
    removed = {p for e in ex for p in e.points}
    cleaned = levels.with_sets([tuple(p for p in level.points if p not in removed) for level in levels.levels])
    residual = f.restrict(np.array([p in removed for p in f.points], dtype=bool))
    return cleaned, residual, ex


def one_rich_line_violations(levels: DyadicLevels) -> List[Tuple[int, FreqPoint]]:
    """Points of S_j lying on two or more rich lines of S_j (empty when the one-line hypothesis holds)."""
    violations = []
    for level in levels.levels:
        if not level.points:
            continue
        if _every_line_rich(level.j, levels.C):
            violations.extend((level.j, p) for p in level.points)
            continue
        _, hits = _rich_lines_of_level(level, levels.C)
        violations.extend((level.j, p) for p in level.points if hits.get(p, 0) >= 2)
    return violations


# -------------------------------
# Decomposition
# -------------------------------
@dataclass
class DecompositionStep:
    n: int
    f_n: WeightedSpectrum
    h_n: WeightedSpectrum
    levels: DyadicLevels
    exceptional: List[ExceptionalSet]
    l2_norm: float
    next_l2_norm: float

    @property
    def halved(self) -> bool:
        return self.next_l2_norm <= 0.5 * self.l2_norm

    @property
    def g_n(self) -> WeightedSpectrum:
        return self.levels.reconstruct()


@dataclass
class DecompositionTrace:
    """f = sum_n h_n with f_{n+1} = f_n chi_E and h_n = f_n - f_{n+1} <= g_n."""

    f: WeightedSpectrum
    C: int
    steps: List[DecompositionStep] = field(default_factory=list)
    remainder: Optional[WeightedSpectrum] = None
    stop_reason: str = 'converged'

    @property
    def halving_held(self) -> bool:
        return all(step.halved for step in self.steps)

    def reconstruct(self) -> WeightedSpectrum:
        """sum_n h_n (plus the remainder, if the iteration stopped early)."""
        entries: Dict[FreqPoint, complex] = {}
        pieces = [step.h_n for step in self.steps]
        if self.remainder is not None:
            pieces.append(self.remainder)
        for piece in pieces:
            for p, v in piece:
                entries[p] = entries.get(p, 0) + v
        return WeightedSpectrum(entries)

    def csv_rows(self) -> List[Tuple]:
        """(n, l2_norm, halved) per step."""
        return [(step.n, step.l2_norm, step.halved) for step in self.steps]


def decompose(f: WeightedSpectrum, C: int, tolerance: float = DEFAULT_TOLERANCE,
              max_steps: int = DEFAULT_MAX_STEPS) -> DecompositionTrace:
    """
    Iterate build_levels / exceptional sets / restriction until
    ||f_n|| <= tolerance ||f||, no progress is made, or max_steps is hit.
    A failure to halve is recorded, not raised.
    """
    f.require_nonnegative('decompose')
    trace = DecompositionTrace(f, C)
    norm0 = f.l2_norm()
    current = f
    for n in range(max_steps):
        norm = current.l2_norm()
        if len(current) == 0 or norm <= tolerance * norm0:
            trace.stop_reason = 'converged'
            trace.remainder = current if len(current) else None
            return trace
        levels = build_levels(current, C)
        cleaned, residual, ex = split_exceptional(levels, current)
        h_n = current.restrict(np.array([p not in residual for p in current.points], dtype=bool))
        step = DecompositionStep(n, current, h_n, cleaned, ex, norm, residual.l2_norm())
        trace.steps.append(step)
        if not step.halved:
            log_to_console(f"decompose: step {n} did not halve (||f_n||={norm:.6g}, "
                           f"||f_n+1||={step.next_l2_norm:.6g}, C={C})", 'WARN')
        if len(residual) == len(current):
            trace.stop_reason = 'no_progress'
            trace.remainder = residual
            log_to_console(f"decompose: no progress at step {n} with C={C}", 'WARN')
            return trace
        current = residual
    trace.stop_reason = 'max_steps' if len(current) else 'converged'
    trace.remainder = current if len(current) else None
    return trace


@dataclass
class CalibrationResult:
    C: Optional[int]
    passed: Dict[int, bool]
    suite_size: int


def calibration_suite(grid_radii: Sequence[int], n_random: int, seed: int,
                      random_size: int, random_radius: int) -> List[WeightedSpectrum]:
    """Indicator grids [-N, N]^2 followed by seeded random nonnegative spectra."""
    suite = [WeightedSpectrum.box(N) for N in grid_radii]
    rng = make_rng(seed)
    for _ in range(n_random):
        suite.append(random_spectrum(rng, random_radius, random_size))
    return suite


def calibrate_default_c(suite: Sequence[WeightedSpectrum], c_max: int = 8,
                        c_min: int = 1) -> CalibrationResult:
    """Smallest C in [c_min, c_max] for which every suite input halves at every step."""
    passed = {}
    for C in range(c_min, c_max + 1):
        ok = True
        for f in suite:
            trace = decompose(f, C)
            if not trace.halving_held or trace.stop_reason != 'converged':
                ok = False
                break
        passed[C] = ok
        log_to_console(f"calibrate: C={C} {'passes' if ok else 'fails'}", 'INFO')
        if ok:
            return CalibrationResult(C, passed, len(suite))
    return CalibrationResult(None, passed, len(suite))


# -------------------------------
# Rectangle bins
# -------------------------------
@dataclass
class RectangleBin:
    """Distinct-vertex rectangles with vertex levels j and corner richness exponents a."""

    j: Tuple[int, int, int, int]
    a: Tuple[int, int, int, int]
    count: int = 0
    gcd_weighted: float = 0.0
    type2_corner: bool = False

    def bound_313(self) -> float:
        j1, (a1, a2, a3, a4) = self.j[0], self.a
        return 2.0 ** (2 * j1 - 2 * a1 + a2 + a4)

    def bound_314(self) -> float:
        j1, (a1, a2, a3, a4) = self.j[0], self.a
        return 2.0 ** (2 * j1 - 2 * a1 + a2 + a3)

    def bound_315(self) -> float:
        j1, (a1, a2, a3, a4) = self.j[0], self.a
        return 2.0 ** (2 * j1 - 2 * a1 + a2 + a4 / 2.0)

    def bound_36(self) -> float:
        return 2.0 ** (self.j[0] + self.j[1] + self.a[2])

    def ratios(self) -> Dict[str, float]:
        return {
            'side_pair': self.count / self.bound_313(),
            'opposite_pair': self.count / self.bound_314(),
            'gcd_weighted': self.gcd_weighted / self.bound_315(),
            'two_level': self.count / self.bound_36(),
        }


@dataclass
class _RectangleCorners:
    """Distinct-vertex rectangles of the level union with per-vertex level, count and type."""

    points: List[FreqPoint]
    quads: np.ndarray      # (r, 4) indices into points
    levels: np.ndarray     # (r, 4) level index j_k
    counts: np.ndarray     # (r, 4) max richness count at the corner
    gcds: np.ndarray       # (r,) gcd(xi1 - xi4)


def _rectangle_corners(levels: DyadicLevels, cap: int) -> _RectangleCorners:
    level_of = levels.level_of()
    points = sorted(level_of)
    if len(points) > cap:
        raise CapExceededError('rectangle_cap', cap, len(points))
    rects = rectangle_quadruples(points, cap=cap).distinct_vertices()
    coords = rects.coords
    quads = np.stack([rects.i1, rects.i2, rects.i3, rects.i4], axis=1).astype(np.int64).reshape(-1, 4)
    point_level = np.array([level_of[FreqPoint(int(x), int(y))] for x, y in coords.tolist()], dtype=np.int64)
    level_lines = {level.j: _LevelLines(level) for level in levels.levels if level.points}
    counts = np.ones(quads.shape, dtype=np.int64)
    for k in range(4):
        here = coords[quads[:, k]]
        after = coords[quads[:, (k + 1) % 4]]
        before = coords[quads[:, (k + 3) % 4]]
        for r in range(len(quads)):
            j = int(point_level[quads[r, k]])
            p = FreqPoint(int(here[r, 0]), int(here[r, 1]))
            lines = level_lines[j]
            c1 = lines.count(p, (int(after[r, 0] - here[r, 0]), int(after[r, 1] - here[r, 1])))
            c2 = lines.count(p, (int(before[r, 0] - here[r, 0]), int(before[r, 1] - here[r, 1])))
            counts[r, k] = max(c1, c2)
    side = coords[quads[:, 0]] - coords[quads[:, 3]] if len(quads) else np.zeros((0, 2), dtype=np.int64)
    gcds = np.gcd(np.abs(side[:, 0]), np.abs(side[:, 1]))
    pts = [FreqPoint(int(x), int(y)) for x, y in coords.tolist()]
    return _RectangleCorners(pts, quads, point_level[quads] if len(quads) else quads, counts, gcds)


def _log2_floor(count: int) -> int:
    return int(count).bit_length() - 1


def rectangle_bins(levels: DyadicLevels, cap: int = DEFAULT_BIN_CAP) -> List[RectangleBin]:
    """Exact per-(j, a) rectangle counts, sorted by bin key."""
    corners = _rectangle_corners(levels, cap)
    bins: Dict[Tuple, RectangleBin] = {}
    gcd_parts: Dict[Tuple, List[float]] = {}
    for r in range(len(corners.quads)):
        j = tuple(int(v) for v in corners.levels[r])
        a = tuple(_log2_floor(int(c)) for c in corners.counts[r])
        key = (j, a)
        b = bins.get(key)
        if b is None:
            b = RectangleBin(j, a, type2_corner=(a[0] >= 1 and 2 * a[0] < j[0] + 2 * levels.C))
            bins[key] = b
        b.count += 1
        gcd_parts.setdefault(key, []).append(1.0 / int(corners.gcds[r]))
    for key, b in bins.items():
        b.gcd_weighted = math.fsum(gcd_parts[key])
    return [bins[key] for key in sorted(bins)]


def max_bound_ratios(bins: Sequence[RectangleBin]) -> Dict[str, float]:
    """Largest count/bound per bound; the gcd-weighted bound only covers type-2 corner bins."""
    out = {'side_pair': 0.0, 'opposite_pair': 0.0, 'gcd_weighted': 0.0, 'two_level': 0.0}
    for b in bins:
        for name, value in b.ratios().items():
            if name == 'gcd_weighted' and not b.type2_corner:
                continue
            out[name] = max(out[name], value)
    return out


def bins_csv_rows(bins: Sequence[RectangleBin]) -> List[Tuple]:
    return [(*b.j, *b.a, b.count, b.gcd_weighted, b.type2_corner) for b in bins]


@dataclass
class TypeSums:
    """sum_{Q in Q0_{alpha,beta}} f(Q) per type pair, against ||lambda||^4."""

    sums: Dict[Tuple[int, int], float]
    counts: Dict[Tuple[int, int], int]
    gcd_weighted_22: float
    mixed: float
    mixed_count: int
    lambda_norm4: float
    m: int

    def ratio(self, pair: Tuple[int, int]) -> float:
        if self.lambda_norm4 == 0:
            return 0.0
        return self.sums.get(pair, 0.0) / self.lambda_norm4

    def ratio_with_m(self, pair: Tuple[int, int]) -> float:
        if self.lambda_norm4 == 0 or self.m == 0:
            return 0.0
        return self.sums.get(pair, 0.0) / (self.m * self.lambda_norm4)

    def rows(self) -> List[Tuple]:
        """(alpha, beta, count, sum, ratio, ratio_with_m) for the nine type pairs."""
        return [(alpha, beta, self.counts.get((alpha, beta), 0), self.sums[(alpha, beta)],
                 self.ratio((alpha, beta)), self.ratio_with_m((alpha, beta)))
                for alpha, beta in sorted(self.sums)]


def type_sums(levels: DyadicLevels, f: Optional[WeightedSpectrum] = None,
              cap: int = DEFAULT_BIN_CAP) -> TypeSums:
    """
    Rectangles whose xi1, xi2 corners share type alpha and whose xi3, xi4
    corners share type beta land in Q0_{alpha,beta}; the rest are tallied
    as mixed. ``f`` defaults to the level function g.
    """
    if f is None:
        f = levels.reconstruct()
    f.require_nonnegative('type_sums')
    corners = _rectangle_corners(levels, cap)
    parts: Dict[Tuple[int, int], List[float]] = {}
    counts: Dict[Tuple[int, int], int] = {}
    gcd22: List[float] = []
    mixed: List[float] = []
    for r in range(len(corners.quads)):
        quad = corners.quads[r]
        weight = 1.0
        for k in range(4):
            weight *= f.get(corners.points[int(quad[k])]).real
        t = [cross_type(int(corners.counts[r, k]), int(corners.levels[r, k]), levels.C) for k in range(4)]
        if t[0] == t[1] and t[2] == t[3]:
            pair = (t[0], t[2])
            parts.setdefault(pair, []).append(weight)
            counts[pair] = counts.get(pair, 0) + 1
            if pair == (2, 2):
                gcd22.append(weight / int(corners.gcds[r]))
        else:
            mixed.append(weight)
    lam = levels.lambda_norm()
    sums = {pair: math.fsum(parts.get(pair, ())) for pair in
            [(alpha, beta) for alpha in (1, 2, 3) for beta in (1, 2, 3)]}
    return TypeSums(sums, counts, math.fsum(gcd22), math.fsum(mixed), len(mixed), lam ** 4, levels.m)


def random_level_family(rng: np.random.Generator, total: int, radius: int, C: int) -> DyadicLevels:
    """Levels of a random indicator-like spectrum with ``total`` support points."""
    return build_levels(random_spectrum(rng, radius, total), C)
