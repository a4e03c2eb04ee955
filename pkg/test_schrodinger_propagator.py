#!/usr/bin/env python3
"""
Unit tests for schrodinger_propagator: free flow, physical sampling, the
quadrature oracle and the Strichartz ratio experiments.
"""

import math
import sys

import numpy as np

from quadruple_sum import l4_time_integral
from schrodinger_propagator import (
    StrichartzReport,
    analyze_physical,
    cube_local_check,
    default_panels,
    evolve,
    extremizer_row,
    extremizer_scan,
    l4_quadrature,
    resolve_time,
    sample_physical,
    sample_physical_direct,
    space_time_l4,
    spatial_l4,
    strichartz_ratio,
    strichartz_scan,
)
from spectrum_core import (
    TWO_PI,
    CubeProjection,
    FreqPoint,
    SpectrumError,
    WeightedSpectrum,
    make_rng,
    project,
    random_spectrum,
)


def test_free_flow():
    print("=" * 60)
    print("Testing free Schrodinger flow")
    print("=" * 60)

    f = random_spectrum(make_rng(2), 4, 15, nonnegative=False)
    assert evolve(f, 0.0) is f
    g = evolve(f, 0.37)
    assert g.points == f.points
    assert np.allclose(np.abs(g.values), np.abs(f.values), rtol=1e-14)
    assert math.isclose(g.l2_norm(), f.l2_norm(), rel_tol=1e-14)
    back = evolve(g, -0.37)
    assert np.allclose(back.values, f.values, rtol=1e-12, atol=1e-14)
    p = FreqPoint(2, 1)
    single = evolve(WeightedSpectrum({p: 1.0}), TWO_PI)
    assert abs(single.get(p) - 1.0) < 1e-12, "the flow is 2 pi periodic"
    print("   ✓ unitary, reversible and 2 pi periodic")


def test_sampling():
    f = random_spectrum(make_rng(3), 3, 12, nonnegative=False)
    fast = sample_physical(f, 9)
    direct = sample_physical_direct(f, 9)
    assert np.allclose(fast.samples, direct.samples, rtol=1e-12, atol=1e-12)
    recovered = analyze_physical(fast)
    assert recovered.points == f.points
    assert np.allclose(recovered.values, f.values, rtol=1e-12, atol=1e-13)
    print("   ✓ FFT sampling matches direct summation and inverts")

    for n_x, code in ((6, 'bad_grid'), (2 * f.max_abs_coordinate() - 1, 'aliasing')):
        try:
            sample_physical(f, n_x)
            raise AssertionError(f"n_x={n_x} accepted")
        except SpectrumError as e:
            assert e.error_code == code

    one = WeightedSpectrum({(1, -2): 0.5})
    assert math.isclose(spatial_l4(one, 0.8), TWO_PI ** 2 * 0.5 ** 4, rel_tol=1e-12)
    print("   ✓ grid checks and spatial L^4 of a plane wave")


def test_quadrature_oracle():
    """Quadrature against the exact identity, real and complex amplitudes."""
    print("=" * 60)
    print("Testing the quadrature oracle")
    print("=" * 60)

    for seed in range(3):
        f = random_spectrum(make_rng(seed), 4, 18)
        for T in (0.1, 1.0):
            exact = l4_time_integral(f, T)
            quad = l4_quadrature(f, T)
            assert abs(exact - quad.value) <= 1e-9 * exact, (seed, T, exact, quad.value)
            assert quad.error_estimate <= 1e-6 * exact
    print("   ✓ nonnegative spectra")

    g = random_spectrum(make_rng(8), 3, 10, nonnegative=False).translated((20, -15))
    exact = l4_time_integral(g, 0.4, t_start=0.3)
    quad = l4_quadrature(g, 0.4, t_start=0.3)
    assert abs(exact - quad.value) <= 1e-9 * exact
    assert quad.n_x <= 4 * 3 + 1, "support is centered before sampling"
    print("   ✓ complex spectrum on a shifted interval")

    assert default_panels(WeightedSpectrum({(1, 0): 1}), TWO_PI) == 8


def test_strichartz_ratio():
    print("=" * 60)
    print("Testing Strichartz ratios")
    print("=" * 60)

    report = strichartz_ratio(WeightedSpectrum({(0, 0): 1.0}), TWO_PI)
    assert abs(report.ratio - TWO_PI ** -0.25) <= 1e-12 * TWO_PI ** -0.25
    assert report.method == 'exact-sigma'
    print(f"   ✓ single point at T = 2 pi: R = {report.ratio:.15f}")

    for N in (1, 2, 3):
        row = extremizer_row(N)
        direct = strichartz_ratio(WeightedSpectrum.box(N), TWO_PI, 'exact')
        assert math.isclose(row.ratio, direct.ratio, rel_tol=1e-12)
    rows = extremizer_scan([2, 4, 8])
    assert [r.N for r in rows] == [2, 4, 8]
    assert rows[0].ratio < rows[1].ratio < rows[2].ratio
    assert all(r.seconds == 0.0 for r in rows)
    print("   ✓ extremizer rows agree with the exact identity")

    f = random_spectrum(make_rng(12), 3, 20)
    T = resolve_time('local', len(f))
    assert math.isclose(T, 1 / math.log(20))
    exact = strichartz_ratio(f, T, 'exact')
    quad = strichartz_ratio(f, T, 'quadrature')
    assert quad.method == 'quadrature'
    assert math.isclose(exact.ratio, quad.ratio, rel_tol=1e-9)
    assert space_time_l4(f, T, 'auto')[1] == 'exact-sigma'
    assert resolve_time('full', 5) == TWO_PI
    assert resolve_time('0.25', 5) == 0.25
    for bad in ('abc', '-1', 'nan'):
        try:
            resolve_time(bad, 5)
            raise AssertionError(f"time {bad!r} accepted")
        except SpectrumError as e:
            assert e.error_code == 'bad_time'
    print("   ✓ local-time ratio, methods and time modes")

    report = StrichartzReport('grid:1', 1.0, 2.0, 1.0, 'exact-sigma', support=9)
    assert report.ratio == 2.0
    assert math.isclose(report.ratio4_over_log, 16 / math.log(9))


def test_scan_determinism():
    one = strichartz_scan([1, 2, 3], T_mode='local', method='exact', threads=1)
    many = strichartz_scan([1, 2, 3], T_mode='local', method='exact', threads=3)
    assert [(r.descriptor, r.ratio) for r in one] == [(r.descriptor, r.ratio) for r in many]
    print("   ✓ scan rows do not depend on the thread count")


def test_cube_local_check():
    N = 4
    phi1 = random_spectrum(make_rng(20), 2, 10).translated((2, 2))
    phi2 = random_spectrum(make_rng(21), 2, 10, nonnegative=False).translated((2, 2))
    cube = CubeProjection(N, (0, 0))
    I = (0.1, 0.1 + 0.5 / math.log(N))
    mid = 0.1 + 0.25 / math.log(N)
    check = cube_local_check([(0.0, mid, phi1), (mid, 1.0, phi2)], N, cube, I)
    expected = (l4_time_integral(project(phi1, cube), mid - I[0], t_start=I[0])
                + l4_time_integral(project(phi2, cube), I[1] - mid, t_start=mid))
    assert math.isclose(check.l4_4, expected, rel_tol=1e-12)
    norm4 = phi1.l2_torus_norm() ** 4 + phi2.l2_torus_norm() ** 4
    assert math.isclose(check.atom_norm, norm4 ** 0.25, rel_tol=1e-12)
    assert check.ratio > 0
    print("   ✓ cube-localized piecewise-free atom")

    try:
        cube_local_check([(0.0, 1.0, phi1)], N, cube, (0.0, 1.0))
        raise AssertionError("interval longer than 1/log N accepted")
    except SpectrumError as e:
        assert e.error_code == 'bad_interval'


def test_quadrature_refinement():
    """Doubling the panels shrinks the error at least fourfold until it reaches rounding level."""
    f = random_spectrum(make_rng(4), 2, 10)
    T = 0.5
    exact = l4_time_integral(f, T)
    errors = [abs(l4_quadrature(f, T, panels=p, nodes_per_panel=4).value - exact) / exact
              for p in (2, 4, 8, 16)]
    for coarse, fine in zip(errors, errors[1:]):
        assert fine <= max(coarse / 4.0, 1e-10), errors
    assert errors[-1] <= 1e-9
    print("   ✓ panel doubling: " + ", ".join(f"{e:.1e}" for e in errors))


def test_spatial_grid_refinement():
    f = random_spectrum(make_rng(5), 5, 30, nonnegative=False)
    minimal = spatial_l4(f, 0.3)
    for n_x in (27, 33, 41):
        assert math.isclose(spatial_l4(f, 0.3, n_x=n_x), minimal, rel_tol=1e-12)
    print("   ✓ spatial L^4 unchanged on finer grids")


def test_cube_translation():
    N = 4
    phi1 = random_spectrum(make_rng(22), 2, 10).translated((2, 2))
    phi2 = random_spectrum(make_rng(23), 2, 10, nonnegative=False).translated((2, 2))
    I = (0.2, 0.2 + 0.5 / math.log(N))
    mid = 0.3
    base = cube_local_check([(0.0, mid, phi1), (mid, 1.0, phi2)], N, CubeProjection(N, (0, 0)), I)
    for w in ((3, -2), (-1, 5)):
        v = (N * w[0], N * w[1])
        moved = cube_local_check([(0.0, mid, phi1.translated(v)), (mid, 1.0, phi2.translated(v))],
                                 N, CubeProjection(N, w), I)
        assert math.isclose(moved.l4_4, base.l4_4, rel_tol=1e-11)
        assert math.isclose(moved.atom_norm, base.atom_norm, rel_tol=1e-14)
        assert moved.anchor == FreqPoint(*w)
    print("   ✓ shifting the cube and the data by N w changes nothing")


def main():
    """Run all tests."""
    print("\n" + "=" * 60)
    print("Schrodinger Propagator - Unit Tests")
    print("=" * 60)

    tests = [
        ("Free flow", test_free_flow),
        ("Sampling", test_sampling),
        ("Quadrature oracle", test_quadrature_oracle),
        ("Strichartz ratio", test_strichartz_ratio),
        ("Scan determinism", test_scan_determinism),
        ("Cube-local check", test_cube_local_check),
        ("Quadrature refinement", test_quadrature_refinement),
        ("Spatial grid refinement", test_spatial_grid_refinement),
        ("Cube translation", test_cube_translation),
    ]
    results = []
    for name, fn in tests:
        try:
            fn()
            results.append((name, True))
        except Exception as e:
            print(f"   ✗ {name} failed: {e}")
            results.append((name, False))

    print("\n" + "=" * 60)
    print("Test Summary")
    print("=" * 60)
    for name, ok in results:
        print(f"{'✓ PASS' if ok else '✗ FAIL'}: {name}")
    passed = sum(1 for _, ok in results if ok)
    print("=" * 60)
    return 0 if passed == len(results) else 1


if __name__ == '__main__':
    sys.exit(main())
