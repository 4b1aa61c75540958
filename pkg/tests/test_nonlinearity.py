import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulsefront import nonlinearity as nl


def test_product_examples():
    g = nl.cubic(0.3)
    f = nl.autonomous(g)
    t = np.linspace(0, 1, 11)
    assert np.allclose(f.eval(t, 0.3), 0.0, atol=1e-15)
    m = nl.sine(1.0, 1.0, offset=1.0)
    fp = nl.make_product(m, g)
    u = np.linspace(0, 1, 21)
    assert np.allclose(fp.eval(0.25, u), 2.0 * g.eval(u), atol=1e-14)
    assert np.allclose(f.eval(0.1, u), f.eval(0.77, u))
    assert f.is_autonomous


def test_combination_examples():
    f = nl.combination_example()
    u = np.linspace(0, 1, 21)
    assert np.allclose(f.eval(0.25, u), u * (1 - u), atol=1e-14)
    assert np.allclose(f.eval(np.linspace(0, 1, 50), 0.0), 0.0)
    assert f.eval(0.25, 0.5) == pytest.approx(0.25, abs=1e-14)


def test_combination_period_mismatch():
    with pytest.raises(ValueError, match="period mismatch"):
        nl.make_combination(nl.sine(1.0, 1.0), nl.logistic(), nl.sine(1.0, 2.0), nl.cubic(0.3))


def test_cubic_theta_range():
    with pytest.raises(ValueError, match=r"theta out of \(0,1\)"):
        nl.cubic(1.5)


def test_averaged():
    g = nl.averaged(nl.combination_example())
    u = np.linspace(0, 1, 101)
    assert np.max(np.abs(g.eval(u) - u * (1 - u) * (u - 0.3))) < 1e-12
    g0 = nl.cubic(0.4)
    ga = nl.averaged(nl.autonomous(g0))
    assert np.max(np.abs(ga.eval(u) - g0.eval(u))) < 1e-14
    gz = nl.averaged(nl.make_product(nl.sine(1.0), nl.logistic()))
    assert np.max(np.abs(gz.eval(u))) < 1e-12


def test_bistable_on_average():
    rep = nl.check_bistable_on_average(nl.combination_example())
    assert rep.integral_at_0 == pytest.approx(-0.3, abs=1e-12)
    assert rep.integral_at_1 == pytest.approx(-0.7, abs=1e-12)
    assert rep.is_bistable_on_average
    kpp = nl.check_bistable_on_average(nl.autonomous(nl.logistic()))
    assert kpp.integral_at_0 == pytest.approx(1.0) and not kpp.is_bistable_on_average
    zero = nl.check_bistable_on_average(nl.autonomous(nl.zero_reaction()))
    assert zero.integral_at_0 == 0.0 and zero.integral_at_1 == 0.0
    assert not zero.is_bistable_on_average


def test_rescale_period():
    f = nl.combination_example()
    assert np.allclose(nl.rescale_period(f, 1.0).eval(0.3, 0.6), f.eval(0.3, 0.6))
    base = nl.check_bistable_on_average(f)
    for T in (0.05, 0.37, 4.0):
        fT = nl.rescale_period(f, T)
        assert fT.period == T
        assert fT.eval(0.25 * T, 0.5) == pytest.approx(f.eval(0.25, 0.5), abs=1e-14)
        r = nl.check_bistable_on_average(fT)
        assert abs(r.integral_at_0 - base.integral_at_0) <= 1e-10
        assert abs(r.integral_at_1 - base.integral_at_1) <= 1e-10
        u = np.linspace(0, 1, 51)
        assert np.max(np.abs(nl.averaged(fT).eval(u) - nl.averaged(f).eval(u))) < 1e-12
    assert nl.rescale_period(nl.autonomous(nl.cubic(0.3)), 0.2).is_autonomous
    for T in (0.0, -1.0):
        with pytest.raises(ValueError):
            nl.rescale_period(f, T)


@pytest.mark.parametrize("f", [
    nl.combination_example(),
    nl.combination_example(0.4, 0.5, 0.6, 1.0),
    nl.make_product(nl.sine(0.5, 2.0, offset=1.0), nl.cubic(0.25)),
    nl.autonomous(nl.cubic(0.3)),
    nl.rescale_period(nl.combination_example(), 0.1),
], ids=["combination", "combination-b", "product", "autonomous", "rescaled"])
def test_invariants_sampled(f):
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 5 * f.period, 1000)
    u = rng.uniform(0, 1, 1000)
    assert np.max(np.abs(f.eval(t, u) - f.eval(t + f.period, u))) <= 1e-12
    assert np.max(np.abs(f.eval(t, 0.0)) + np.abs(f.eval(t, 1.0))) <= 1e-12
    assert nl.validate(f) == []


def test_tangent_extension():
    f = nl.combination_example()
    t = 0.13
    assert f.eval(t, -0.01) == pytest.approx(f.eval_du(t, 0.0) * -0.01)
    assert f.eval(t, 1.02) == pytest.approx(f.eval_du(t, 1.0) * 0.02)


def test_custom_requires_derivative():
    with pytest.raises(TypeError):
        nl.custom(1.0, lambda t, u: u * (1 - u))
    f = nl.custom(1.0, lambda t, u: u * (1 - u) * (u - 0.3), lambda t, u: -3 * u**2 + 2.6 * u - 0.3)
    assert nl.validate(f) == []


@settings(max_examples=20, deadline=None)
@given(theta=st.floats(0.05, 0.95), phase=st.floats(0.0, 2 * np.pi))
def test_bistability_matches_analytic(theta, phase):
    f = nl.combination_example(theta=theta, phase=phase)
    rep = nl.check_bistable_on_average(f)
    # mu1 = 0, mu2 = 1: mu1 g1'(0) + mu2 g2'(0) = -theta and at 1 it is -(1 - theta)
    assert rep.integral_at_0 == pytest.approx(-theta, abs=1e-10)
    assert rep.integral_at_1 == pytest.approx(-(1 - theta), abs=1e-10)
    assert rep.is_bistable_on_average


def test_custom_wrong_derivative_rejected():
    with pytest.raises(ValueError, match="centred difference"):
        nl.custom(1.0, lambda t, u: u * (1 - u) * (u - 0.3), lambda t, u: 0 * u)
    with pytest.raises(ValueError, match="eval_du"):
        nl.custom(1.0, lambda t, u: u * (1 - u), None)


def test_negate_reflect():
    f = nl.combination_example()
    g = nl.negate_reflect(f)
    t = np.linspace(0, 1, 7)[:, None]
    u = np.linspace(0, 1, 11)[None, :]
    assert np.allclose(g.eval(t, u), -f.eval(t, 1 - u), atol=1e-14)
