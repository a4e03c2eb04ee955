#!/usr/bin/env python3
"""
Unit tests for nls_integrator: split-step propagation, conserved
quantities, closed-form plane waves and the window growth experiment.
"""

import math
import sys

import numpy as np

from nls_integrator import (
    NLSField,
    NumericalFailure,
    ball_membership,
    band_mask,
    band_projection,
    convergence_order,
    grid_size,
    hamiltonian,
    integrate,
    l2_norm,
    linear_step,
    mass,
    nonlinear_step,
    plane_wave,
    plane_wave_exact,
    random_smooth_data,
    sobolev_norm,
    spectral_tail,
    strang_step,
    window_growth_experiment,
)
from schrodinger_propagator import evolve
from spectrum_core import TWO_PI, SpectrumError, WeightedSpectrum, log_max1, make_rng


def smooth_field(seed=0, N=4, l2=0.05, sign=1):
    return NLSField.from_spectrum(random_smooth_data(make_rng(seed), N, l2), N, sign)


def test_grid_and_field():
    print("=" * 60)
    print("Testing NLS fields")
    print("=" * 60)

    assert grid_size(1) == 3
    assert grid_size(4) == 13
    assert grid_size(16) == 49
    u = smooth_field()
    assert u.n_x == 13 and u.samples.shape == (13, 13)
    assert math.isclose(l2_norm(u), 0.05, rel_tol=1e-12)
    assert spectral_tail(u) < 1e-25
    f = random_smooth_data(make_rng(0), 4, 0.05)
    assert math.isclose(sobolev_norm(u, 0.4), sobolev_norm(f, 0.4), rel_tol=1e-12)
    back = u.to_spectrum()
    assert max(abs(back.get(p) - v) for p, v in f) < 1e-15
    print("   ✓ grid sizes, norms and spectrum round trip")

    for bad in (0.0, 1.5):
        try:
            sobolev_norm(u, bad)
            raise AssertionError(f"s={bad} accepted")
        except SpectrumError as e:
            assert e.error_code == 'bad_sobolev_index'
    try:
        NLSField.from_spectrum(WeightedSpectrum({(5, 0): 1.0}), 4)
        raise AssertionError("spectrum outside the band accepted")
    except SpectrumError as e:
        assert e.error_code == 'spectrum_outside_band'
    try:
        NLSField(2, 7, np.zeros((7, 7), dtype=complex), sign=0)
        raise AssertionError("sign 0 accepted")
    except SpectrumError:
        pass


def test_split_steps():
    u = smooth_field(seed=1, l2=1.0)
    v = nonlinear_step(u, 0.3)
    assert np.allclose(np.abs(v.samples), np.abs(u.samples), rtol=1e-14)
    assert v.t == u.t

    f = random_smooth_data(make_rng(1), 4, 1.0)
    w = linear_step(u, 0.21)
    free = evolve(f, 0.21)
    assert max(abs(w.to_spectrum().get(p) - c) for p, c in free) < 1e-13
    assert math.isclose(w.t, 0.21)

    s = strang_step(u, 0.01)
    assert math.isclose(mass(s), mass(u), rel_tol=1e-13)
    print("   ✓ linear, nonlinear and Strang steps")


def test_plane_wave():
    """Closed-form plane wave for both signs."""
    print("=" * 60)
    print("Testing plane waves")
    print("=" * 60)

    for sign in (1, -1):
        u0 = plane_wave(0.3 + 0.1j, (1, -2), 4, sign)
        final, rows = integrate(u0, 1.0, 1e-3)
        exact = plane_wave_exact(0.3 + 0.1j, (1, -2), final.t, final.n_x, sign)
        err = float(np.abs(final.samples - exact).max())
        assert err <= 1e-6, (sign, err)
        assert math.isclose(final.t, 1.0)
        assert len(rows) == 2
        print(f"   ✓ sign={sign:+d}: max error {err:.2e}")


def test_conservation():
    u = smooth_field(seed=2, N=4, l2=0.05)
    final, rows = integrate(u, 2.0, 1e-3, s=0.4, record_every=500)
    m0, h0 = rows[0].mass, rows[0].hamiltonian
    assert len(rows) == 1 + 3 + 1
    assert max(abs(r.mass - m0) for r in rows) <= 1e-12 * m0
    assert max(abs(r.hamiltonian - h0) for r in rows) <= 1e-6 * abs(h0)
    assert math.isclose(hamiltonian(final), rows[-1].hamiltonian)
    print("   ✓ mass and Hamiltonian conserved over 2000 steps")


def test_convergence_order():
    u = smooth_field(seed=3, N=4, l2=4.0)
    order = convergence_order(u, 0.25, 0.005)
    assert abs(order - 2.0) <= 0.1, order
    print(f"   ✓ splitting order {order:.3f}")


def test_numerical_failure():
    bad = NLSField(2, 7, np.full((7, 7), np.nan, dtype=complex))
    try:
        integrate(bad, 0.01, 0.005)
        raise AssertionError("NaN field accepted")
    except NumericalFailure as e:
        assert e.error_code == 'numerical_failure'
        assert e.t is not None
    print("   ✓ non-finite fields raise NumericalFailure")


def test_window_experiment():
    print("=" * 60)
    print("Testing the window growth experiment")
    print("=" * 60)

    assert ball_membership(0.2, 1.0, 0.5, 0.05) is None
    assert ball_membership(0.05, 1.0, 0.5, 0.05) == 512
    assert ball_membership(0.0, 0.0, 0.5, 0.05) == 1

    u0 = smooth_field(seed=4, N=4, l2=0.05)
    report = window_growth_experiment(u0, 0.4, 0.05, 3, 4, K_probe=2, dt=0.01)
    assert report.ladder == [4, 8, 16]
    assert len(report.rows) == 4 and len(report.growth_factors) == 3
    expected_taus = [1.0 / (2.0 * log_max1(N)) for N in (4, 8, 16)]
    assert np.allclose(report.tau_windows, expected_taus, rtol=1e-15)
    assert math.isclose(report.cumulative_time, sum(expected_taus), rel_tol=1e-12)
    assert math.isclose(report.ladder_sum, sum(1 / log_max1(N) for N in (4, 8, 16)))
    assert math.isfinite(report.K_obs) and report.K_obs > 0
    assert report.mass_drift <= 1e-12
    assert not report.flagged
    assert all(b is None or b >= 1 for b in report.ball_N)
    assert [row[4] for row in report.csv_rows()] == [0, 1, 2, 3]
    print(f"   ✓ three windows, K_obs = {report.K_obs:.6f}")

    try:
        window_growth_experiment(smooth_field(seed=4, N=4, l2=0.2), 0.4, 0.05, 2, 4)
        raise AssertionError("large data accepted")
    except SpectrumError as e:
        assert e.error_code == 'not_small_data'
    try:
        window_growth_experiment(u0, 0.4, 0.05, 2, 3)
        raise AssertionError("non-dyadic N0 accepted")
    except SpectrumError as e:
        assert e.error_code == 'bad_ladder'


def test_gauge_symmetry():
    """Multiplying by a constant phase commutes with the flow and leaves the invariants alone."""
    u = smooth_field(seed=5, l2=1.0)
    rotation = np.exp(0.7j)
    v = NLSField.from_samples(u.samples * rotation, u.N, u.sign)
    assert math.isclose(mass(v), mass(u), rel_tol=1e-13)
    assert math.isclose(hamiltonian(v), hamiltonian(u), rel_tol=1e-13)

    u_t, v_t = u, v
    for _ in range(20):
        u_t, v_t = strang_step(u_t, 0.01), strang_step(v_t, 0.01)
    assert np.abs(v_t.samples - rotation * u_t.samples).max() <= 1e-12
    print("   ✓ constant phase rotation commutes with 20 Strang steps")


def test_time_reversal():
    u = smooth_field(seed=6, l2=2.0)
    for dt in (0.01, 0.1):
        back = strang_step(strang_step(u, dt), -dt)
        assert np.abs(back.samples - u.samples).max() <= 1e-10
        assert abs(back.t - u.t) <= 1e-15
    print("   ✓ a step of -dt undoes a step of dt")


def test_band_truncation():
    print("=" * 60)
    print("Testing padding band and truncation")
    print("=" * 60)

    u = smooth_field(seed=3, l2=4.0)
    assert spectral_tail(u) <= 1e-25
    assert np.abs(band_projection(u).samples - u.samples).max() <= 1e-14

    kept, _ = integrate(u, 0.1, 0.01)
    assert spectral_tail(kept) > 1e-10, "the cubic term reaches past [-N, N]^2"
    assert abs(mass(kept) - mass(u)) <= 1e-12 * mass(u)
    print(f"   ✓ default: tail {spectral_tail(kept):.2e}, mass conserved")

    cut, _ = integrate(u, 0.1, 0.01, truncate=True)
    assert spectral_tail(cut) <= 1e-25
    assert mass(cut) <= mass(u) * (1 + 1e-12)
    assert np.all(np.abs(cut.coefficients()[~band_mask(cut)]) <= 1e-15)
    print("   ✓ truncate=True keeps the field inside [-N, N]^2")


def main():
    """Run all tests."""
    print("\n" + "=" * 60)
    print("NLS Integrator - Unit Tests")
    print("=" * 60)

    tests = [
        ("Grid and field", test_grid_and_field),
        ("Split steps", test_split_steps),
        ("Plane wave", test_plane_wave),
        ("Conservation", test_conservation),
        ("Convergence order", test_convergence_order),
        ("Numerical failure", test_numerical_failure),
        ("Window experiment", test_window_experiment),
        ("Gauge symmetry", test_gauge_symmetry),
        ("Time reversal", test_time_reversal),
        ("Band truncation", test_band_truncation),
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
