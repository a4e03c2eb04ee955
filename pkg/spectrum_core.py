"""
Spectrum Core Module
Lattice and spectrum primitives on Z^2: frequency points, weighted spectra,
Fourier projections, norms and the dyadic level-set construction.

Fourier convention used throughout the toolkit:
    phi(x) = sum_xi f(xi) e^{i xi.x}  on  T^2 = (R / 2 pi Z)^2,
so that ||phi||_{L^2}^2 = (2 pi)^2 sum_xi |f(xi)|^2.
"""
import json
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from console_log import log_to_console

FREQ_BOUND = 2 ** 30  # |x|, |y| <= 2^30 keeps |xi|^2 and dot products inside 64 bits
TWO_PI = 2.0 * math.pi


class SpectrumError(ValueError):
    """Invalid frequency, spectrum text or projection region."""

    error_code = 'spectrum_invalid'

    def __init__(self, message: str, error_code: Optional[str] = None):
        super().__init__(message)
        if error_code is not None:
            self.error_code = error_code


class CapExceededError(RuntimeError):
    """An enumeration would exceed a configured size cap."""

    error_code = 'cap_exceeded'

    def __init__(self, cap_name: str, cap: int, size: int):
        super().__init__(f"{cap_name}={cap} exceeded (input size {size})")
        self.cap_name = cap_name
        self.cap = cap
        self.size = size


def log_max1(x: float) -> float:
    """log x := max{1, ln x}."""
    if x <= 0:
        raise ValueError(f"log_max1 needs a positive argument, got {x}")
    return max(1.0, math.log(x))


def is_dyadic(n: int) -> bool:
    """True for 1, 2, 4, 8, ..."""
    return isinstance(n, (int, np.integer)) and n >= 1 and (int(n) & (int(n) - 1)) == 0


# -------------------------------
# Frequency points
# -------------------------------
@dataclass(frozen=True, order=True)
class FreqPoint:
    """A lattice frequency (x, y) in Z^2."""

    x: int
    y: int

    def __post_init__(self):
        for name in ('x', 'y'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise SpectrumError(f"frequency component {name} must be an integer, got {value!r}",
                                    'frequency_not_integer')
            value = int(value)
            if abs(value) > FREQ_BOUND:
                raise SpectrumError(f"frequency component {name}={value} outside [-2^30, 2^30]",
                                    'frequency_out_of_bound')
            object.__setattr__(self, name, value)

    def __add__(self, other: 'FreqPoint') -> 'FreqPoint':
        return FreqPoint(self.x + other.x, self.y + other.y)

    def __sub__(self, other: 'FreqPoint') -> 'FreqPoint':
        return FreqPoint(self.x - other.x, self.y - other.y)

    def __neg__(self) -> 'FreqPoint':
        return FreqPoint(-self.x, -self.y)

    def dot(self, other: 'FreqPoint') -> int:
        return self.x * other.x + self.y * other.y

    def norm2(self) -> int:
        """|xi|^2 as an exact integer."""
        return self.x * self.x + self.y * self.y

    def as_tuple(self) -> Tuple[int, int]:
        return (self.x, self.y)


PointLike = Union[FreqPoint, Tuple[int, int]]


def as_point(p: PointLike) -> FreqPoint:
    if isinstance(p, FreqPoint):
        return p
    try:
        x, y = p
    except (TypeError, ValueError):
        raise SpectrumError(f"cannot read a frequency from {p!r}", 'frequency_not_integer')
    return FreqPoint(x, y)


def perp(xi: FreqPoint) -> FreqPoint:
    """(a, b)^perp = (-b, a)."""
    return FreqPoint(-xi.y, xi.x)


def gcd_point(xi: FreqPoint) -> int:
    """gcd(|x|, |y|) of a nonzero lattice point."""
    if xi.x == 0 and xi.y == 0:
        raise SpectrumError("gcd of the zero frequency is undefined", 'zero_frequency')
    return math.gcd(abs(xi.x), abs(xi.y))


# -------------------------------
# Weighted spectra
# -------------------------------
class WeightedSpectrum:
    """
    Finitely supported map Z^2 -> C, stored in lexicographic (x, y) order.

    Zero amplitudes are never stored. Instances are immutable; the numpy
    views returned by ``coords`` and ``values`` are read-only.
    """

    __slots__ = ('_points', '_coords', '_values', '_index')

    def __init__(self, entries: Optional[Mapping[PointLike, complex]] = None):
        items = []
        for key, value in (entries or {}).items():
            value = complex(value)
            if value == 0:
                continue
            items.append((as_point(key), value))
        items.sort(key=lambda kv: (kv[0].x, kv[0].y))
        for (a, _), (b, _) in zip(items, items[1:]):
            if a == b:
                raise SpectrumError(f"duplicate frequency {a.as_tuple()}", 'duplicate_frequency')
        self._points = tuple(p for p, _ in items)
        coords = np.array([[p.x, p.y] for p in self._points], dtype=np.int64).reshape(-1, 2)
        values = np.array([v for _, v in items], dtype=np.complex128)
        coords.flags.writeable = False
        values.flags.writeable = False
        self._coords = coords
        self._values = values
        self._index = None

    # Constructors -------------------------------------------------------
    @classmethod
    def from_arrays(cls, coords: np.ndarray, values: np.ndarray) -> 'WeightedSpectrum':
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        values = np.asarray(values, dtype=np.complex128).reshape(-1)
        if len(coords) != len(values):
            raise SpectrumError("coordinate and amplitude arrays differ in length")
        entries = {}
        for (x, y), v in zip(coords.tolist(), values.tolist()):
            if (x, y) in entries:
                raise SpectrumError(f"duplicate frequency {(x, y)}", 'duplicate_frequency')
            entries[(x, y)] = v
        return cls(entries)

    @classmethod
    def indicator(cls, points: Iterable[PointLike], value: complex = 1.0) -> 'WeightedSpectrum':
        entries = {}
        for p in points:
            p = as_point(p)
            if p in entries:
                raise SpectrumError(f"duplicate frequency {p.as_tuple()}", 'duplicate_frequency')
            entries[p] = value
        return cls(entries)

    @classmethod
    def box(cls, N: int, value: complex = 1.0) -> 'WeightedSpectrum':
        """chi of [-N, N]^2 cap Z^2."""
        return cls.indicator(box_points(-N, N, -N, N), value)

    # Accessors ----------------------------------------------------------
    @property
    def points(self) -> Tuple[FreqPoint, ...]:
        return self._points

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def support_size(self) -> int:
        return len(self._points)

    def __len__(self) -> int:
        return len(self._points)

    def __iter__(self) -> Iterator[Tuple[FreqPoint, complex]]:
        return iter(zip(self._points, (complex(v) for v in self._values)))

    def _lookup(self) -> Dict[FreqPoint, int]:
        if self._index is None:
            self._index = {p: i for i, p in enumerate(self._points)}
        return self._index

    def __contains__(self, point: PointLike) -> bool:
        return as_point(point) in self._lookup()

    def get(self, point: PointLike, default: complex = 0.0) -> complex:
        i = self._lookup().get(as_point(point))
        return default if i is None else complex(self._values[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightedSpectrum):
            return NotImplemented
        return self._points == other._points and np.array_equal(self._values, other._values)

    def __hash__(self):
        return hash((self._points, self._values.tobytes()))

    def __repr__(self) -> str:
        return f"WeightedSpectrum(support={len(self)}, l2={self.l2_norm():.6g})"

    # Norms and predicates -----------------------------------------------
    def l2_norm_sq(self) -> float:
        return math.fsum((np.abs(self._values) ** 2).tolist())

    def l2_norm(self) -> float:
        """l^2(Z^2) norm of the coefficients (not the L^2(T^2) norm)."""
        return math.sqrt(self.l2_norm_sq())

    def l2_torus_norm(self) -> float:
        """||phi||_{L^2(T^2)} = 2 pi ||f||_{l^2}."""
        return TWO_PI * self.l2_norm()

    def is_nonnegative(self) -> bool:
        return bool(np.all(self._values.imag == 0) and np.all(self._values.real >= 0))

    def require_nonnegative(self, what: str = 'operation'):
        if not self.is_nonnegative():
            raise SpectrumError(f"{what} needs a nonnegative real spectrum", 'spectrum_not_nonnegative')

    def max_abs_coordinate(self) -> int:
        return int(np.abs(self._coords).max()) if len(self) else 0

    def max_norm2(self) -> int:
        if not len(self):
            return 0
        return max(p.norm2() for p in self._points)

    # Transformations ----------------------------------------------------
    def restrict(self, mask: np.ndarray) -> 'WeightedSpectrum':
        mask = np.asarray(mask, dtype=bool)
        return WeightedSpectrum({p: complex(v) for p, v, keep in zip(self._points, self._values, mask) if keep})

    def scaled(self, c: complex) -> 'WeightedSpectrum':
        return WeightedSpectrum({p: complex(v) * c for p, v in zip(self._points, self._values)})

    def with_values(self, values: np.ndarray) -> 'WeightedSpectrum':
        return WeightedSpectrum(dict(zip(self._points, np.asarray(values, dtype=np.complex128).tolist())))

    def translated(self, shift: PointLike) -> 'WeightedSpectrum':
        s = as_point(shift)
        return WeightedSpectrum({p + s: complex(v) for p, v in zip(self._points, self._values)})

    def real_values(self) -> np.ndarray:
        """Amplitudes as float64 (counting contexts, nonnegative spectra only)."""
        return self._values.real.copy()

    def to_dict(self) -> Dict[FreqPoint, complex]:
        return {p: complex(v) for p, v in zip(self._points, self._values)}


def box_points(x0: int, x1: int, y0: int, y1: int) -> List[FreqPoint]:
    return [FreqPoint(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)]


# -------------------------------
# Projection regions
# -------------------------------
@dataclass(frozen=True)
class BoxRegion:
    """Product box [x0, x1] x [y0, y1] cap Z^2."""

    x0: int
    x1: int
    y0: int
    y1: int

    @classmethod
    def centered(cls, N: int) -> 'BoxRegion':
        return cls(-N, N, -N, N)

    def contains(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords).reshape(-1, 2)
        return ((coords[:, 0] >= self.x0) & (coords[:, 0] <= self.x1)
                & (coords[:, 1] >= self.y0) & (coords[:, 1] <= self.y1))

    @property
    def size(self) -> int:
        return max(0, self.x1 - self.x0 + 1) * max(0, self.y1 - self.y0 + 1)


@dataclass(frozen=True)
class CubeProjection:
    """Cube (0, N]^2 + N * anchor of the dyadic family C_N."""

    N: int
    anchor: FreqPoint = FreqPoint(0, 0)

    def __post_init__(self):
        if not is_dyadic(self.N):
            raise SpectrumError(f"cube size must be dyadic, got {self.N}", 'cube_not_dyadic')
        object.__setattr__(self, 'anchor', as_point(self.anchor))

    def contains(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords).reshape(-1, 2)
        lo_x, lo_y = self.N * self.anchor.x, self.N * self.anchor.y
        return ((coords[:, 0] > lo_x) & (coords[:, 0] <= lo_x + self.N)
                & (coords[:, 1] > lo_y) & (coords[:, 1] <= lo_y + self.N))


def cube_of(xi: PointLike, N: int) -> CubeProjection:
    """The unique cube of C_N containing xi."""
    xi = as_point(xi)
    ax = -((-xi.x) // N) - 1  # ceil(x / N) - 1
    ay = -((-xi.y) // N) - 1
    return CubeProjection(N, FreqPoint(ax, ay))


Region = Union[BoxRegion, CubeProjection, Iterable[PointLike]]


def project(f: WeightedSpectrum, region: Region) -> WeightedSpectrum:
    """P_region f: restriction of the spectrum to a point set, cube or box."""
    if isinstance(region, (BoxRegion, CubeProjection)):
        return f.restrict(region.contains(f.coords))
    try:
        members = {as_point(p) for p in region}
    except TypeError:
        raise SpectrumError(f"unsupported projection region {region!r}", 'bad_region')
    return f.restrict(np.array([p in members for p in f.points], dtype=bool))


def littlewood_paley(f: WeightedSpectrum, N: int) -> WeightedSpectrum:
    """P_N = P_{<=N} - P_{<=N/2}, with P_{<=1/2} := 0."""
    if not is_dyadic(N):
        raise SpectrumError(f"Littlewood-Paley scale must be dyadic, got {N}", 'cube_not_dyadic')
    inner = BoxRegion.centered(N).contains(f.coords)
    if N > 1:
        inner &= ~BoxRegion.centered(N // 2).contains(f.coords)
    return f.restrict(inner)


def cube_decomposition(f: WeightedSpectrum, N: int) -> Dict[FreqPoint, WeightedSpectrum]:
    """Split f over the cubes of C_N it meets, keyed by anchor (sorted)."""
    pieces: Dict[FreqPoint, Dict[FreqPoint, complex]] = {}
    for p, v in f:
        pieces.setdefault(cube_of(p, N).anchor, {})[p] = v
    return {anchor: WeightedSpectrum(pieces[anchor]) for anchor in sorted(pieces)}


# -------------------------------
# Dyadic level sets
# -------------------------------
@dataclass(frozen=True)
class Level:
    """One dyadic level: point set S_j and amplitude lambda_j."""

    j: int
    points: Tuple[FreqPoint, ...]
    lam: float

    @property
    def coords(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points], dtype=np.int64).reshape(-1, 2)

    @property
    def height(self) -> float:
        """lambda_j 2^{-j/2}: the value g takes on S_j."""
        return self.lam * 2.0 ** (-self.j / 2.0)


@dataclass(frozen=True)
class DyadicLevels:
    """Decomposition data (m, S_j, lambda_j, C) with S_j disjoint and #S_j <= 2^j."""

    m: int
    levels: Tuple[Level, ...]
    C: int

    def __post_init__(self):
        if self.m < 1:
            raise SpectrumError(f"number of levels m must be >= 1, got {self.m}", 'bad_levels')
        if len(self.levels) != self.m + 1:
            raise SpectrumError("levels must cover j = 0..m", 'bad_levels')
        if isinstance(self.C, bool) or not isinstance(self.C, (int, np.integer)) or self.C < 0:
            raise SpectrumError(f"richness constant C must be a nonnegative integer, got {self.C!r}",
                                'bad_levels')
        seen = set()
        for j, level in enumerate(self.levels):
            if level.j != j:
                raise SpectrumError("levels out of order", 'bad_levels')
            if len(level.points) > 2 ** j:
                raise SpectrumError(f"#S_{j} = {len(level.points)} exceeds 2^{j}", 'bad_levels')
            if level.lam < 0:
                raise SpectrumError(f"lambda_{j} is negative", 'bad_levels')
            for p in level.points:
                if p in seen:
                    raise SpectrumError(f"level sets overlap at {p.as_tuple()}", 'bad_levels')
                seen.add(p)

    @classmethod
    def from_sets(cls, sets: Sequence[Iterable[PointLike]], C: int,
                  lambdas: Optional[Sequence[float]] = None) -> 'DyadicLevels':
        """Build levels directly; lambda_j defaults to 2^{j/2} (g = chi of the union)."""
        sets = [tuple(as_point(p) for p in s) for s in sets]
        while len(sets) < 2:
            sets.append(())
        if lambdas is None:
            lambdas = [2.0 ** (j / 2.0) for j in range(len(sets))]
        return cls(len(sets) - 1,
                   tuple(Level(j, s, float(lam)) for j, (s, lam) in enumerate(zip(sets, lambdas))),
                   C)

    def lambda_norm(self) -> float:
        """||lambda_j||_{l^2_{j<=m}}."""
        return math.sqrt(math.fsum(level.lam ** 2 for level in self.levels))

    def union_points(self) -> List[FreqPoint]:
        return [p for level in self.levels for p in level.points]

    def level_of(self) -> Dict[FreqPoint, int]:
        return {p: level.j for level in self.levels for p in level.points}

    def richness_threshold_sq(self, j: int) -> int:
        """count >= 2^{j/2 + C}  <=>  count^2 >= 2^{j + 2C}."""
        return 2 ** (j + 2 * self.C)

    def reconstruct(self) -> WeightedSpectrum:
        """g = sum_j lambda_j 2^{-j/2} chi_{S_j}."""
        return WeightedSpectrum({p: level.height for level in self.levels for p in level.points})

    def with_sets(self, sets: Sequence[Iterable[FreqPoint]]) -> 'DyadicLevels':
        return DyadicLevels(self.m,
                            tuple(Level(level.j, tuple(s), level.lam) for level, s in zip(self.levels, sets)),
                            self.C)


def enumeration_order(f: WeightedSpectrum) -> np.ndarray:
    """Indices of f sorted descending by value, ties broken lexicographically by (x, y)."""
    values = f.real_values()
    return np.lexsort((f.coords[:, 1], f.coords[:, 0], -values))


def build_levels(f: WeightedSpectrum, C: int) -> DyadicLevels:
    """
    Dyadic level sets of a nonnegative spectrum.

    With xi_1, xi_2, ... the descending enumeration of supp f, S_j^0 holds
    xi_{2^j}, ..., xi_{2^{j+1}-1} and lambda_j = 2^{j/2} f(xi_{2^j})
    (0 once 2^j exceeds the support), for j = 0..m where m is the least
    integer greater than log2 #supp f.
    """
    f.require_nonnegative('build_levels')
    n = len(f)
    if n == 0:
        raise SpectrumError("empty spectrum", 'empty_spectrum')
    m = n.bit_length()
    order = enumeration_order(f)
    values = f.real_values()[order]
    levels = []
    for j in range(m + 1):
        lo, hi = 2 ** j - 1, 2 ** (j + 1) - 1
        idx = order[lo:hi]
        lam = 2.0 ** (j / 2.0) * float(values[lo]) if lo < n else 0.0
        levels.append(Level(j, tuple(f.points[i] for i in idx), lam))
    log_to_console(f"build_levels: support={n}, m={m}, C={C}", 'DEBUG')
    return DyadicLevels(m, tuple(levels), C)


# -------------------------------
# Text / JSON formats
# -------------------------------
def parse_spectrum(text: str, source: str = '<string>') -> WeightedSpectrum:
    """Parse `x y re [im]` lines; `#` starts a comment; duplicates are rejected."""
    entries: Dict[FreqPoint, complex] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise SpectrumError(f"{source}:{lineno}: expected 'x y re [im]', got {raw.strip()!r}",
                                'malformed_spectrum')
        try:
            x, y = int(parts[0]), int(parts[1])
            re_part = float(parts[2])
            im_part = float(parts[3]) if len(parts) == 4 else 0.0
        except ValueError:
            raise SpectrumError(f"{source}:{lineno}: cannot parse {raw.strip()!r}", 'malformed_spectrum')
        try:
            point = FreqPoint(x, y)
        except SpectrumError as e:
            raise SpectrumError(f"{source}:{lineno}: {e}", e.error_code)
        if point in entries:
            raise SpectrumError(f"{source}:{lineno}: duplicate frequency {(x, y)}", 'duplicate_frequency')
        entries[point] = complex(re_part, im_part)
    spectrum = WeightedSpectrum(entries)
    if len(spectrum) == 0:
        raise SpectrumError("empty spectrum", 'empty_spectrum')
    return spectrum


def load_spectrum(path: str) -> WeightedSpectrum:
    try:
        with open(path, 'r') as fh:
            text = fh.read()
    except OSError as e:
        raise SpectrumError(f"cannot read spectrum file {path}: {e}", 'spectrum_file')
    return parse_spectrum(text, source=path)


def dump_spectrum(f: WeightedSpectrum) -> str:
    lines = []
    for p, v in f:
        if v.imag == 0:
            lines.append(f"{p.x} {p.y} {v.real:.17g}")
        else:
            lines.append(f"{p.x} {p.y} {v.real:.17g} {v.imag:.17g}")
    return "\n".join(lines) + "\n"


def spectrum_to_json(f: WeightedSpectrum) -> str:
    """Canonical JSON export: array of {x, y, re, im} in lexicographic order."""
    return json.dumps([{'x': p.x, 'y': p.y, 're': v.real, 'im': v.imag} for p, v in f])


def spectrum_from_json(text: str) -> WeightedSpectrum:
    try:
        rows = json.loads(text)
        entries = {}
        for row in rows:
            point = FreqPoint(row['x'], row['y'])
            if point in entries:
                raise SpectrumError(f"duplicate frequency {point.as_tuple()}", 'duplicate_frequency')
            entries[point] = complex(row['re'], row.get('im', 0.0))
    except (ValueError, KeyError, TypeError) as e:
        if isinstance(e, SpectrumError):
            raise
        raise SpectrumError(f"malformed spectrum JSON: {e}", 'malformed_spectrum')
    return WeightedSpectrum(entries)


# -------------------------------
# Seeded random spectra
# -------------------------------
def make_rng(seed: int) -> np.random.Generator:
    """The project PRNG: numpy Generator over PCG64."""
    return np.random.Generator(np.random.PCG64(seed))


def random_spectrum(rng: np.random.Generator, radius: int, size: int,
                    nonnegative: bool = True) -> WeightedSpectrum:
    """`size` distinct frequencies drawn from [-radius, radius]^2 with amplitudes in [0.1, 1)."""
    side = 2 * radius + 1
    if size > side * side:
        raise SpectrumError(f"cannot draw {size} distinct points from a box of {side * side}", 'bad_random_set')
    flat = rng.choice(side * side, size=size, replace=False)
    xs = flat // side - radius
    ys = flat % side - radius
    amps = rng.uniform(0.1, 1.0, size=size)
    if not nonnegative:
        amps = amps * np.exp(1j * rng.uniform(0.0, TWO_PI, size=size))
    return WeightedSpectrum({(int(x), int(y)): complex(a) for x, y, a in zip(xs, ys, amps)})
