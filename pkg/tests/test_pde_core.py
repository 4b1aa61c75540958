import numpy as np
import pytest

from pulsefront import nonlinearity as nl
from pulsefront.pde_core import (FrameState, Grid1D, OvershootError, Stepper, default_dt, period_map, residual,
                                 step, steps_per_period, verify_ordering_preserved)
from pulsefront.front_solver import FrontProfile, shifted

ZERO = nl.autonomous(nl.zero_reaction())
CUBIC = nl.autonomous(nl.cubic(0.3))


def heat_amplitude(M, dxi, dt, t_end=1.0):
    grid = Grid1D.from_spacing(M, dxi)
    st = FrameState.from_function(grid, lambda x: np.sin(np.pi * (x + M) / (2 * M)), boundary=(0.0, 0.0))
    stepper = Stepper(ZERO, 0.0, grid, n_steps=int(round(t_end / dt)))
    st, _ = stepper.period(st)
    return st.values[grid.center]


def test_grid_invariants():
    g = Grid1D.from_spacing(30.0, 0.05)
    x = g.nodes
    assert g.n_points == 1201 and g.spacing == pytest.approx(0.05)
    assert np.all(np.diff(x) > 0)
    assert x[0] == -30.0 and x[-1] == 30.0 and x[g.center] == 0.0
    with pytest.raises(ValueError):
        Grid1D(10.0, 100)
    with pytest.raises(ValueError):
        Grid1D.from_spacing(1.0, 0.3)


def test_steps_per_period():
    assert steps_per_period(1.0) == 416
    assert default_dt(1.0, 0.05) == 1.0 / 400
    assert default_dt(100.0, 0.05) == 0.025
    assert steps_per_period(0.05) % 32 == 0


@pytest.mark.parametrize("value", [0.0, 1.0])
def test_constant_equilibria(value):
    g = Grid1D.from_spacing(10.0, 0.05)
    st = FrameState.from_function(g, lambda x: np.full_like(x, value))
    f = nl.combination_example()
    for _ in range(5):
        st = step(st, f, 0.3, 0.01)
    # exact up to rounding in the stencil sums
    assert np.max(np.abs(st.values - value)) < 1e-14
    assert np.max(np.abs(period_map(st, f, 0.3).values - value)) < 1e-13


def test_heat_eigenmode_oracle():
    amp = heat_amplitude(10.0, 0.05, 0.01)
    assert abs(amp - np.exp(-(np.pi / 20) ** 2)) <= 1e-4


def test_heat_second_order():
    errs = []
    exact = np.exp(-(np.pi / 20) ** 2)
    for k in range(4):
        errs.append(abs(heat_amplitude(10.0, 0.5 / 2**k, 0.1 / 2**k) - exact))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(ratios - 4.0) < 0.4), ratios


def test_step_guards():
    g = Grid1D.from_spacing(5.0, 0.05)
    st = FrameState.from_function(g, lambda x: 0.5 * (1 - np.tanh(x)))
    with pytest.raises(ValueError, match="exceeds dxi"):
        step(st, CUBIC, 0.0, 0.1)
    with pytest.raises(ValueError):
        step(st, CUBIC, 0.0, 0.0)
    with pytest.raises(AssertionError, match="Peclet"):
        step(st, CUBIC, 50.0, 0.01)


def test_overshoot_guard():
    g = Grid1D.from_spacing(5.0, 0.05)
    st = FrameState.from_function(g, lambda x: np.full_like(x, 1.2))
    with pytest.raises(OvershootError):
        step(st, CUBIC, 0.0, 0.01)
    with pytest.raises(OvershootError):
        Stepper(CUBIC, 0.0, g).period(st)


def test_boundaries_reimposed():
    g = Grid1D.from_spacing(5.0, 0.05)
    st = FrameState.from_function(g, lambda x: 0.5 * (1 - np.tanh(x)), boundary=(1.0, 0.0))
    st = step(st, CUBIC, 0.2, 0.01)
    assert st.values[0] == 1.0 and st.values[-1] == 0.0
    st2, _ = Stepper(nl.combination_example(), 0.2, g).period(st)
    assert st2.values[0] == 1.0 and st2.values[-1] == 0.0


@pytest.mark.parametrize("order", [1, 2])
def test_kernel_matches_generic_step(order):
    f = nl.combination_example()
    g = Grid1D.from_spacing(5.0, 0.05)
    st = FrameState.from_function(g, lambda x: 0.5 * (1 - np.tanh(x)))
    stepper = Stepper(f, 0.3, g, order=order)
    fast, _ = stepper.advance(st, 20)
    slow = st
    for _ in range(20):
        slow = step(slow, f, 0.3, stepper.dt, order=order)
    assert np.max(np.abs(fast.values - slow.values)) < 1e-13
    assert fast.time == pytest.approx(slow.time)


def test_flow_boundary_mode_follows_ode():
    from pulsefront.periodic_ode import flow
    f = nl.combination_example()
    g = Grid1D.from_spacing(5.0, 0.05)
    st = FrameState.from_function(g, lambda x: np.full_like(x, 0.6))
    out, _ = Stepper(f, 0.0, g, boundary_mode="flow").period(st)
    assert out.values[0] == pytest.approx(flow(f, 0.6, 0.0, 1.0), abs=1e-9)
    # spatially constant data stays constant and follows the ODE
    assert np.max(np.abs(out.values - out.values[0])) < 1e-6


def test_translation_equivariance():
    f = nl.combination_example()
    g = Grid1D.from_spacing(20.0, 0.05)
    v = 0.5 * (1 - np.tanh(g.nodes / 2))
    a = FrameState(g, 0.0, v.copy(), (1.0, 0.0))
    vs = np.append(v[1:], 0.0)  # shifted left by one node
    b = FrameState(g, 0.0, vs, (1.0, 0.0))
    stepper = Stepper(f, 0.28, g)
    a, _ = stepper.period(a)
    b, _ = stepper.period(b)
    assert np.max(np.abs(a.values[2:-2] - b.values[1:-3])) < 1e-9


def test_residual_examples(cubic_front):
    zero = FrontProfile(cubic_front.grid, 1.0, 0.0, np.zeros((4, cubic_front.grid.n_points)))
    assert residual(zero, CUBIC) == 0.0
    assert residual(cubic_front, CUBIC) <= 5e-3
    bad = cubic_front.slices.copy()
    bad[3, 600] += 0.1
    corrupted = FrontProfile(cubic_front.grid, 1.0, cubic_front.speed, bad)
    assert residual(corrupted, CUBIC) > 1.0
    with pytest.raises(ValueError):
        residual(FrontProfile(cubic_front.grid, 1.0, 0.0, bad[:2]), CUBIC)


def test_period_map_of_front(cubic_front):
    g = cubic_front.grid
    st = FrameState(g, 0.0, cubic_front.slices[0].copy(), (1.0, 0.0))
    out = period_map(st, CUBIC, cubic_front.speed)
    assert np.max(np.abs(out.values - cubic_front.slices[0])) < 1e-6


def test_ordering_examples(cubic_front):
    g = cubic_front.grid
    f = nl.combination_example()
    u = FrameState(g, 0.0, cubic_front.slices[0].copy(), (1.0, 0.0))
    rep = verify_ordering_preserved(u, u.copy(), f, 0.3, 1.0)
    assert rep.preserved and rep.max_violation == 0.0
    # U(xi - 1.5) lies above U(xi) since U is decreasing
    upper = FrameState(g, 0.0, shifted(cubic_front, 1.5).slices[0], (1.0, 0.0))
    rep = verify_ordering_preserved(u, upper, CUBIC, cubic_front.speed, 10.0)
    assert rep.preserved and rep.first_violation_time is None
    zero = FrameState.from_function(g, np.zeros_like, boundary=(0.0, 0.0))
    one = FrameState.from_function(g, np.ones_like, boundary=(1.0, 1.0))
    assert verify_ordering_preserved(zero, one, f, 0.0, 2.0).preserved
    with pytest.raises(ValueError):
        verify_ordering_preserved(one, zero, f, 0.0, 1.0)
