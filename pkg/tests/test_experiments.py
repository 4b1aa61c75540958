import numpy as np
import pytest

from pulsefront import nonlinearity as nl
from pulsefront.experiments import (SweepTable, build_subsolution, fit_rate, fit_sinh_envelope,
                                    homogenization_sweep, is_front_like, make_perturbed, measure_D,
                                    modulus_level, perturbation_sweep, run_stability, smoothstep,
                                    verify_subsolution)
from pulsefront.front_solver import shifted
from pulsefront.pde_core import residual


def test_front_like():
    x = np.linspace(-30, 30, 1201)
    assert is_front_like(0.5 * (1 - np.tanh(x)))
    assert not is_front_like(np.full_like(x, 0.5))
    assert not is_front_like(0.5 * (1 - np.tanh(x - 20)))


def test_fit_rate_synthetic():
    t = np.arange(41.0)
    d = 0.3 * np.exp(-0.25 * t)
    rate, (k0, k1) = fit_rate(t, d)
    assert rate == pytest.approx(-0.25, rel=1e-10)
    assert k0 >= 20 and k1 == 40


def test_stability_exact_front(cubic_front, cubic):
    run = run_stability(cubic_front, cubic, cubic_front.slices[0], n_periods=5)
    assert run.status == "ok"
    assert np.all(run.distances <= 1e-8)
    assert np.all(np.abs(run.shifts) <= 1e-6)
    assert np.all(np.diff(run.times) > 0)
    assert run.mu == pytest.approx(0.15, abs=1e-10)
    assert run.lambda0 == pytest.approx(0.3) and run.lambda1 == pytest.approx(0.7)


def test_stability_shifted_front(cubic_front, cubic):
    h = cubic_front.grid.spacing
    v0 = shifted(cubic_front, 5 * h).slices[0]
    run = run_stability(cubic_front, cubic, v0, n_periods=10)
    assert abs(run.shifts[-1] - 5 * h) <= h / 10
    assert run.distances[-1] <= 1e-6


def test_stability_rejects_non_front_like(cubic_front, cubic):
    with pytest.raises(ValueError, match="front-like"):
        run_stability(cubic_front, cubic, np.full(cubic_front.grid.n_points, 0.5), n_periods=2)


def test_smoothstep():
    x = np.linspace(-1, 2, 301)
    chi, d1, d2 = smoothstep(x, 0.0, 1.0)
    assert chi[0] == 0.0 and chi[-1] == 1.0
    assert np.all(np.diff(chi) >= 0) and np.all(d1 >= 0)
    # quintic: chi'' vanishes at both ends and |chi'''| <= 60
    assert abs(d2[100]) < 1e-12 and abs(d2[200]) < 1e-12
    assert np.max(np.abs(np.diff(d2))) <= 60 * 0.01 + 1e-12


def test_bundle_autonomous(cubic_front, cubic):
    b = build_subsolution(cubic_front, cubic, 0.05)
    assert b.mu == pytest.approx(0.15, abs=1e-12)
    assert np.allclose(b.phi0.eigenfunction_samples, 1.0) and np.allclose(b.phi1.eigenfunction_samples, 1.0)
    assert b.C1 > 0 and b.C2 > 0 and b.C3 > 0
    assert b.omega == (b.C2 + b.C3) / (b.mu * b.C1)
    t = np.linspace(0, 200, 401)
    L = b.Lambda(t)
    assert np.all(np.diff(L) >= 0)
    assert b.Lambda(1e6) - b.Lambda(0.0) == pytest.approx(b.omega * b.q0)
    assert b.xi_minus < 0 < b.xi_plus
    assert 0 < b.u0 <= 0.5
    with pytest.raises(ValueError):
        build_subsolution(cubic_front, cubic, 0.2)


def test_modulus_level(cubic):
    u0 = modulus_level(cubic, 0.3, 0.7, 0.15)
    # |g'(u) - g'(0)| = |2.6 u - 3 u^2| <= 0.0375 near 0
    u = np.linspace(0, u0, 100)
    assert np.max(np.abs(2.6 * u - 3 * u**2)) <= 0.0375 + 1e-12


def test_degenerate_bundle_matches_residual(cubic_front, cubic):
    b = build_subsolution(cubic_front, cubic, 0.0)
    rep = verify_subsolution(b, cubic_front, cubic, order_test=False)
    assert rep.passed
    assert rep.abs_max == pytest.approx(residual(cubic_front, cubic), rel=1e-9)
    assert rep.extremum <= 5e-3


def test_measure_D(cubic_front, cubic):
    out = measure_D(cubic_front, cubic, n_periods=10)
    assert out["stable"]
    assert 0 < out["D"] < 10


def test_make_perturbed():
    f = nl.rescale_period(nl.combination_example(), 0.5)
    assert make_perturbed(f, 0.0).eval(0.1, 0.4) == f.eval(0.1, 0.4)
    fe = make_perturbed(f, 0.1)
    t = np.linspace(0, 1, 101)[:, None]
    assert np.max(np.abs(fe.eval(t, 0.0)) + np.abs(fe.eval(t, 1.0))) < 1e-15
    u = np.linspace(0, 1, 101)[None, :]
    gap = np.abs(fe.eval_du(t, u) - f.eval_du(t, u))
    assert np.max(gap) <= 0.1 + 1e-15
    assert fe.eval_du(0.125, 0.0) - f.eval_du(0.125, 0.0) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        make_perturbed(f, -0.1)


def test_fit_sinh_envelope():
    eps = np.array([0.2, 0.1, 0.05])
    fit = fit_sinh_envelope(eps, 2.0 * np.sinh(3.0 * eps))
    assert fit["C2"] == pytest.approx(2.0, rel=1e-8)
    assert fit["C3"] == pytest.approx(3.0, rel=1e-8)


def test_sweep_table_contract():
    row = {"param": 1.0, "speed": 0.1, "fixed_point": 0.3, "eigenvalue": -0.2, "profile_dist": 0.0, "status": "ok"}
    t = SweepTable("homogenize", [row, dict(row, param=0.5, status="flagged: x")])
    assert t.flagged and t.columns[-1] == "status"
    assert "p_dev" in SweepTable("perturb", []).columns
    with pytest.raises(ValueError, match="decreasing"):
        SweepTable("homogenize", [row, row])


def test_homogenization_flags_large_period(grid):
    table = homogenization_sweep(nl.combination_example(), [20.0], grid)
    assert table.flagged
    assert table.rows[0]["status"].startswith("flagged")
    assert table.reference["theta_g"] == pytest.approx(0.3, abs=1e-10)


def test_homogenization_rejects_non_bistable_average(grid):
    with pytest.raises(ValueError, match="bistable"):
        homogenization_sweep(nl.make_product(nl.sine(1.0), nl.cubic(0.3)), [0.1], grid)


def test_perturbation_zero_row(grid):
    f = nl.rescale_period(nl.combination_example(), 0.5)
    table = perturbation_sweep(f, [0.0], grid)
    row = table.rows[0]
    assert row["p_dev"] == 0.0 and row["pprime_dev"] == 0.0
    assert row["speed"] == pytest.approx(table.reference["c_T"], abs=1e-9)
    assert row["status"] == "ok"


def test_stability_boundary_truncation_insensitive(cubic_front, cubic, grid):
    # frozen Dirichlet values h(-M), h(M) against boundary values following the ODE
    h = 1.0 - smoothstep(grid.nodes, -2.0, 2.0)[0]
    frozen = run_stability(cubic_front, cubic, h, n_periods=10)
    flowing = run_stability(cubic_front, cubic, h, n_periods=10, boundary_mode="flow")
    assert np.max(np.abs(frozen.distances - flowing.distances)) <= 1e-8
