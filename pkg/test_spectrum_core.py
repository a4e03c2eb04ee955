#!/usr/bin/env python3
"""
Unit tests for spectrum_core: frequency points, weighted spectra,
projections, dyadic level sets and the spectrum text format.
"""

import math
import sys

import numpy as np

from spectrum_core import (
    FREQ_BOUND,
    TWO_PI,
    BoxRegion,
    CubeProjection,
    DyadicLevels,
    FreqPoint,
    SpectrumError,
    WeightedSpectrum,
    box_points,
    build_levels,
    cube_decomposition,
    cube_of,
    dump_spectrum,
    gcd_point,
    littlewood_paley,
    log_max1,
    make_rng,
    parse_spectrum,
    perp,
    project,
    random_spectrum,
    spectrum_from_json,
    spectrum_to_json,
)


def expect_error(code, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except SpectrumError as e:
        assert e.error_code == code, f"expected {code}, got {e.error_code}"
        return e
    raise AssertionError(f"expected SpectrumError({code})")


def test_freq_points():
    """Arithmetic, perp and gcd on lattice points."""
    print("=" * 60)
    print("Testing FreqPoint")
    print("=" * 60)

    a, b = FreqPoint(3, 4), FreqPoint(-1, 2)
    assert a + b == FreqPoint(2, 6)
    assert a - b == FreqPoint(4, 2)
    assert -a == FreqPoint(-3, -4)
    assert a.dot(b) == 5
    assert a.norm2() == 25
    print("   ✓ arithmetic")

    assert perp(a) == FreqPoint(-4, 3)
    assert perp(a).dot(a) == 0
    assert gcd_point(FreqPoint(6, -4)) == 2
    assert gcd_point(FreqPoint(0, -7)) == 7
    expect_error('zero_frequency', gcd_point, FreqPoint(0, 0))
    print("   ✓ perp / gcd")

    expect_error('frequency_out_of_bound', FreqPoint, FREQ_BOUND + 1, 0)
    expect_error('frequency_not_integer', FreqPoint, 1.5, 0)
    assert FreqPoint(FREQ_BOUND, -FREQ_BOUND).norm2() == 2 * FREQ_BOUND ** 2
    print("   ✓ bounds enforced")


def test_weighted_spectrum():
    print("=" * 60)
    print("Testing WeightedSpectrum")
    print("=" * 60)

    f = WeightedSpectrum({(1, 0): 2.0, (0, 5): 1j, (-3, 2): 0.0, (0, -1): 1.0})
    assert len(f) == 3, "zero amplitudes are not stored"
    assert [p.as_tuple() for p in f.points] == [(0, -1), (0, 5), (1, 0)]
    assert f.get((0, 5)) == 1j
    assert f.get((7, 7)) == 0
    assert (1, 0) in f and (-3, 2) not in f
    assert not f.is_nonnegative()
    assert math.isclose(f.l2_norm_sq(), 6.0)
    assert math.isclose(f.l2_torus_norm(), TWO_PI * math.sqrt(6.0))
    assert f.max_abs_coordinate() == 5
    assert f.max_norm2() == 25
    print("   ✓ storage, lookup and norms")

    try:
        f.values[0] = 3.0
        raise AssertionError("values view must be read-only")
    except ValueError:
        pass
    print("   ✓ read-only arrays")

    shifted = f.translated((2, -1))
    assert shifted.get((3, -1)) == 2.0
    assert math.isclose(shifted.l2_norm(), f.l2_norm())
    assert f.scaled(2).get((1, 0)) == 4.0
    same = WeightedSpectrum.from_arrays(f.coords, f.values)
    assert same == f and hash(same) == hash(f)
    expect_error('duplicate_frequency', WeightedSpectrum.from_arrays, [[0, 0], [0, 0]], [1, 2])
    print("   ✓ transformations")

    box = WeightedSpectrum.box(2)
    assert len(box) == 25 and box.is_nonnegative()
    assert len(WeightedSpectrum.indicator(box_points(0, 1, 0, 1))) == 4


def test_projections():
    """Box, cube and Littlewood-Paley projections."""
    print("=" * 60)
    print("Testing projections")
    print("=" * 60)

    f = WeightedSpectrum.box(4)
    assert len(project(f, BoxRegion.centered(1))) == 9
    assert len(project(f, [(0, 0), (4, 4), (9, 9)])) == 2
    assert len(project(f, CubeProjection(2, (0, 0)))) == 4  # (0, 2]^2
    print("   ✓ project")

    assert cube_of((1, 1), 2).anchor == FreqPoint(0, 0)
    assert cube_of((0, 0), 2).anchor == FreqPoint(-1, -1)
    assert cube_of((2, 3), 2).anchor == FreqPoint(0, 1)
    for p in [(0, 0), (-5, 3), (7, -8)]:
        assert cube_of(p, 4).contains(np.array([p]))[0]
    expect_error('cube_not_dyadic', CubeProjection, 3)
    print("   ✓ cube_of")

    pieces = cube_decomposition(random_spectrum(make_rng(3), 10, 60), 4)
    g = random_spectrum(make_rng(3), 10, 60)
    assert sum(len(p) for p in pieces.values()) == len(g)
    assert math.isclose(math.fsum(p.l2_norm_sq() for p in pieces.values()), g.l2_norm_sq(), rel_tol=1e-14)
    print("   ✓ cube decomposition is orthogonal")

    sizes = [len(littlewood_paley(f, N)) for N in (1, 2, 4)]
    assert sizes == [9, 16, 56], sizes
    assert sum(sizes) == len(f)
    print(f"   ✓ Littlewood-Paley annuli {sizes}")


def test_projection_identities():
    f = random_spectrum(make_rng(11), 6, 80, nonnegative=False)
    left, right = BoxRegion(-6, 0, -6, 6), BoxRegion(1, 6, -6, 6)
    for region in (left, right, CubeProjection(4, (0, -1)), [(0, 0), (3, -2), (6, 6)]):
        once = project(f, region)
        assert project(once, region) == once
        assert once.l2_norm() <= f.l2_norm()
    a, b = project(f, left), project(f, right)
    assert len(project(a, right)) == 0
    assert math.isclose(a.l2_norm_sq() + b.l2_norm_sq(), f.l2_norm_sq(), rel_tol=1e-14)
    inner = project(f, BoxRegion(-6, 0, -3, 3))
    assert inner.l2_norm_sq() <= a.l2_norm_sq()
    print("   ✓ idempotent, contractive, orthogonal on disjoint boxes")


def test_build_levels():
    print("=" * 60)
    print("Testing build_levels")
    print("=" * 60)

    f = WeightedSpectrum({(0, 0): 5, (1, 0): 4, (2, 0): 3, (3, 0): 2, (4, 0): 1})
    levels = build_levels(f, 2)
    assert levels.m == 3
    assert [len(level.points) for level in levels.levels] == [1, 2, 2, 0]
    assert levels.levels[0].points == (FreqPoint(0, 0),)
    assert math.isclose(levels.levels[1].lam, math.sqrt(2) * 4)
    assert math.isclose(levels.levels[2].lam, 4.0)
    assert levels.levels[3].lam == 0.0
    g = levels.reconstruct()
    for p, v in f:
        assert g.get(p).real >= v.real - 1e-15, "g dominates f"
    print("   ✓ levels, lambdas and domination")

    ties = build_levels(WeightedSpectrum.indicator([(1, 1), (0, 2), (0, 1)]), 1)
    assert ties.levels[0].points == (FreqPoint(0, 1),), "ties broken lexicographically"
    assert build_levels(WeightedSpectrum({(0, 0): 1}), 0).m == 1
    assert build_levels(WeightedSpectrum.box(1), 0).m == 4
    print("   ✓ tie-breaking and m")

    expect_error('spectrum_not_nonnegative', build_levels, WeightedSpectrum({(0, 0): -1.0}), 1)
    expect_error('bad_levels', DyadicLevels.from_sets, [[(0, 0), (1, 1)]], 1)
    expect_error('bad_levels', DyadicLevels.from_sets, [[(0, 0)], [(0, 0)]], 1)
    expect_error('bad_levels', DyadicLevels.from_sets, [[(0, 0)]], -1)
    levels = DyadicLevels.from_sets([[(0, 0)], [(1, 0), (2, 0)]], 1)
    assert levels.richness_threshold_sq(1) == 8
    assert math.isclose(levels.lambda_norm(), math.sqrt(3.0))
    assert all(v == 1 for _, v in levels.reconstruct())
    print("   ✓ validation")


def test_spectrum_format():
    print("=" * 60)
    print("Testing spectrum text and JSON formats")
    print("=" * 60)

    text = "# header\n0 0 1.5\n1 -2 0.5 -0.25  # trailing comment\n\n"
    f = parse_spectrum(text)
    assert f.get((1, -2)) == complex(0.5, -0.25)
    assert parse_spectrum(dump_spectrum(f)) == f
    assert spectrum_from_json(spectrum_to_json(f)) == f
    print("   ✓ parse / dump / json")

    e = expect_error('malformed_spectrum', parse_spectrum, "0 0 1\n0 1\n", 'x.txt')
    assert 'x.txt:2' in str(e)
    e = expect_error('duplicate_frequency', parse_spectrum, "0 0 1\n1 1 1\n0 0 2\n")
    assert ':3' in str(e)
    expect_error('empty_spectrum', parse_spectrum, "# nothing\n")
    expect_error('frequency_out_of_bound', parse_spectrum, f"{FREQ_BOUND + 1} 0 1\n")
    expect_error('malformed_spectrum', spectrum_from_json, '[{"x": 1}]')
    print("   ✓ errors carry codes and line numbers")


def test_random_and_helpers():
    a = random_spectrum(make_rng(7), 5, 40)
    b = random_spectrum(make_rng(7), 5, 40)
    assert a == b and len(a) == 40
    assert a.is_nonnegative()
    assert np.all(a.real_values() >= 0.1) and np.all(a.real_values() < 1.0)
    c = random_spectrum(make_rng(7), 5, 40, nonnegative=False)
    assert not c.is_nonnegative()
    expect_error('bad_random_set', random_spectrum, make_rng(0), 1, 10)
    assert log_max1(1) == 1.0
    assert log_max1(2) == 1.0
    assert math.isclose(log_max1(math.exp(3)), 3.0)
    print("   ✓ seeded random spectra and log helper")


def main():
    """Run all tests."""
    print("\n" + "=" * 60)
    print("Spectrum Core - Unit Tests")
    print("=" * 60)

    tests = [
        ("FreqPoint", test_freq_points),
        ("WeightedSpectrum", test_weighted_spectrum),
        ("Projections", test_projections),
        ("Projection identities", test_projection_identities),
        ("Dyadic levels", test_build_levels),
        ("Spectrum formats", test_spectrum_format),
        ("Random spectra", test_random_and_helpers),
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
