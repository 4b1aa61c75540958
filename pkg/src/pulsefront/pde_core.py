"""Moving-frame parabolic solver for v_t - c v_xi - v_xixi = f(t, v) on [-M, M].

Crank-Nicolson for diffusion and central advection, explicit reaction, Dirichlet
boundaries; the constant tridiagonal matrix is factored once per (c, dt, grid).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .nonlinearity import TimePeriodicNonlinearity
from .periodic_ode import flow_batch

GUARD = (-0.05, 1.05)
DEFAULT_M = 30.0
DEFAULT_DXI = 0.05
N_SLICES = 32
ORDER_TOL = 1e-9


class OvershootError(RuntimeError):
    """Values left the guard band [-0.05, 1.05]."""


@dataclass(frozen=True)
class Grid1D:
    half_width: float
    n_points: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError("n_points must be odd and >= 3")

    @classmethod
    def from_spacing(cls, half_width: float = DEFAULT_M, dxi: float = DEFAULT_DXI) -> "Grid1D":
        n_half = int(round(half_width / dxi))
        if abs(n_half * dxi - half_width) > 1e-9 * half_width:
            raise ValueError(f"half_width {half_width} is not a multiple of dxi {dxi}")
        return cls(float(half_width), 2 * n_half + 1)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        n_half = (self.n_points - 1) // 2
        return self.spacing * np.arange(-n_half, n_half + 1)

    @property
    def center(self) -> int:
        return (self.n_points - 1) // 2


@dataclass
class FrameState:
    grid: Grid1D
    time: float
    values: np.ndarray
    boundary: tuple[float, float]

    @classmethod
    def from_function(cls, grid: Grid1D, h, time: float = 0.0, boundary=None) -> "FrameState":
        v = np.asarray(h(grid.nodes) if callable(h) else h, dtype=float).copy()
        if boundary is None:
            boundary = (float(v[0]), float(v[-1]))
        v[0], v[-1] = boundary
        return cls(grid, float(time), v, (float(boundary[0]), float(boundary[1])))

    def copy(self) -> "FrameState":
        return replace(self, values=self.values.copy())


def default_dt(T: float, dxi: float) -> float:
    return min(T / 400.0, dxi / 2.0)


def steps_per_period(T: float, dt: float | None = None, dxi: float = DEFAULT_DXI,
                     n_slices: int = N_SLICES) -> int:
    """Smallest multiple of n_slices with T / n <= dt, so slices fall on step times."""
    if dt is None:
        dt = default_dt(T, dxi)
    n = int(np.ceil(T / dt - 1e-9))
    return n_slices * int(np.ceil(n / n_slices))


def _stencils(c: float, h: float, dt: float):
    d = 1.0 / (h * h)
    a = c / (2.0 * h)
    lo, di, up = -0.5 * dt * (d - a), 1.0 + dt * d, -0.5 * dt * (d + a)
    return np.array([lo, di, up, -lo, 1.0 - dt * d, -up])


def _check_step(c: float, h: float, dt: float):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt > h * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds dxi={h} (advection accuracy guard)")
    assert abs(c) * h / 2.0 < 1.0, f"cell Peclet number |c| dxi / 2 = {abs(c) * h / 2} >= 1"


class Stepper:
    """IMEX Crank-Nicolson stepper for fixed (f, c, grid, dt).

    ``boundary_mode`` is "frozen" (Dirichlet values held constant) or "flow"
    (boundary values follow the spatially homogeneous ODE y' = f(t, y)).
    ``order`` 2 (default) uses an explicit predictor-corrector reaction term,
    order 1 the plain explicit f(t_k, v_k).
    """

    def __init__(self, f: TimePeriodicNonlinearity, c: float, grid: Grid1D, dt: float | None = None,
                 n_steps: int | None = None, boundary_mode: str = "frozen", guard=GUARD, order: int = 2):
        self.f = f
        self.c = float(c)
        self.grid = grid
        h = grid.spacing
        if n_steps is None:
            n_steps = steps_per_period(f.period, dt, h)
        self.n_steps = int(n_steps)
        self.dt = f.period / self.n_steps
        _check_step(self.c, h, self.dt)
        if boundary_mode not in ("frozen", "flow"):
            raise ValueError(f"unknown boundary_mode {boundary_mode!r}")
        self.boundary_mode = boundary_mode
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        self.order = order
        self.guard = guard
        self.coef = _stencils(self.c, h, self.dt)
        self.cp, self.inv = _kernels.cn_factor(grid.n_points - 2, self.coef[0], self.coef[1], self.coef[2])
        self._tables: dict[int, np.ndarray | None] = {}

    def _table(self, k0: int):
        """Reaction table for the N_t + 1 step times of the period starting at step index k0."""
        key = k0 % self.n_steps
        if key not in self._tables:
            times = (key + np.arange(self.n_steps + 1)) * self.dt
            self._tables[key] = self.f.poly_table(times)
        return self._tables[key]

    def _boundary_series(self, state: FrameState, n: int):
        left, right = state.boundary
        if self.boundary_mode == "frozen" or (left in (0.0, 1.0) and right in (0.0, 1.0)):
            return np.full(n + 1, left), np.full(n + 1, right)
        t1 = state.time + n * self.dt
        res = flow_batch(self.f, [left, right], state.time, t1, substeps=2 * self.n_steps, record=True)
        t = np.linspace(state.time, t1, res.n_steps + 1)
        tt = state.time + self.dt * np.arange(n + 1)
        if res.n_steps % n == 0:
            stride = res.n_steps // n
            return res.ys[::stride, 0].copy(), res.ys[::stride, 1].copy()
        return np.interp(tt, t, res.ys[:, 0]), np.interp(tt, t, res.ys[:, 1])

    def step_index(self, state: FrameState) -> int:
        return int(round(state.time / self.dt))

    def advance(self, state: FrameState, n_steps: int, slice_stride: int = 0) -> tuple[FrameState, np.ndarray]:
        """Advance by n_steps; returns the new state and the states after every
        ``slice_stride``-th step (empty when slice_stride is 0)."""
        v = state.values.copy()
        k0 = self.step_index(state)
        on_grid = abs(k0 * self.dt - state.time) <= 1e-9 * max(1.0, abs(state.time))
        left, right = self._boundary_series(state, n_steps)
        n_rec = n_steps // slice_stride if slice_stride else 0
        slices = np.empty((n_rec, v.size))
        lower, upper = self.guard
        if self.f.is_polynomial and on_grid:
            table = self._table(0)
            done = rec = 0
            while done < n_steps:
                # walk period by period so the cached table can be reused
                kk = (k0 + done) % self.n_steps
                chunk = min(n_steps - done, self.n_steps - kk)
                if slice_stride:
                    n_out = (done % slice_stride + chunk) // slice_stride
                    out = slices[rec:rec + n_out]
                    stride, phase = slice_stride, done % slice_stride
                else:
                    n_out, out, stride, phase = 0, slices[:0], 1, 0
                status, _ = _kernels.cn_steps_poly(
                    v, table[kk:kk + chunk + 1], left[done:done + chunk + 1], right[done:done + chunk + 1],
                    self.coef, self.cp, self.inv, self.dt, chunk, out, stride, phase, lower, upper, self.order)
                self._raise(status, state.time + (done + chunk) * self.dt)
                rec += n_out
                done += chunk
        else:
            rec = 0
            for k in range(n_steps):
                t = state.time + k * self.dt
                v = self._generic_step(v, t, left[k + 1], right[k + 1])
                if not np.all((v >= lower) & (v <= upper)):
                    self._raise(_kernels.OVERSHOOT if np.all(np.isfinite(v)) else _kernels.NONFINITE, t + self.dt)
                if slice_stride and (k + 1) % slice_stride == 0:
                    slices[rec] = v
                    rec += 1
        new = FrameState(state.grid, state.time + n_steps * self.dt, v, (float(left[-1]), float(right[-1])))
        return new, slices

    def _generic_step(self, v, t, left_new, right_new):
        return _generic_step(self.f, v, t, self.dt, left_new, right_new, self.coef, self.cp, self.inv, self.order)

    @staticmethod
    def _raise(status, t):
        if status == _kernels.OVERSHOOT:
            raise OvershootError(f"values left the guard band {GUARD} near t={t:.6g}")
        if status == _kernels.NONFINITE:
            raise OvershootError(f"non-finite values near t={t:.6g}")

    def period(self, state: FrameState, n_slices: int = 0) -> tuple[FrameState, np.ndarray]:
        """One period; with n_slices > 0 also the slices at t0 + j T / n_slices, j = 0..n-1."""
        if n_slices:
            if self.n_steps % n_slices:
                raise ValueError("n_slices must divide the steps per period")
            new, sl = self.advance(state, self.n_steps, self.n_steps // n_slices)
            # the recorded rows are t0 + (j+1) T / n; rotate so row 0 is the start state
            return new, np.vstack([state.values[None, :], sl[:-1]])
        return self.advance(state, self.n_steps)


def _generic_step(f, v, t, dt, left_new, right_new, coef, cp, inv, order):
    fk = f.eval(t, v[1:-1])
    out = np.empty_like(v)
    _kernels.cn_solve(v, dt * fk, left_new, right_new, coef, cp, inv, out)
    if order == 2:
        react = 0.5 * dt * (fk + f.eval(t + dt, out[1:-1]))
        _kernels.cn_solve(v, react, left_new, right_new, coef, cp, inv, out)
    return out


def step(state: FrameState, f: TimePeriodicNonlinearity, c: float, dt: float, order: int = 2) -> FrameState:
    """One IMEX step of size dt with the state's Dirichlet values re-imposed."""
    h = state.grid.spacing
    _check_step(c, h, dt)
    coef = _stencils(c, h, dt)
    cp, inv = _kernels.cn_factor(state.grid.n_points - 2, coef[0], coef[1], coef[2])
    left, right = state.boundary
    v = _generic_step(f, state.values, state.time, dt, left, right, coef, cp, inv, order)
    if not np.all((v >= GUARD[0]) & (v <= GUARD[1])):
        raise OvershootError(f"values left the guard band {GUARD}")
    return FrameState(state.grid, state.time + dt, v, state.boundary)


def period_map(state: FrameState, f: TimePeriodicNonlinearity, c: float, dt: float | None = None,
               boundary_mode: str = "frozen", order: int = 2) -> FrameState:
    """Composition of N_t steps covering one period T."""
    return Stepper(f, c, state.grid, dt, boundary_mode=boundary_mode, order=order).period(state)[0]


def space_time_residual(slices: np.ndarray, period: float, c: float, h: float,
                        f: TimePeriodicNonlinearity, times: np.ndarray | None = None) -> np.ndarray:
    """Pointwise |D_t U - c D_xi U - D_xixi U - f(t, U)| on interior nodes of periodic slices."""
    n_s = slices.shape[0]
    if times is None:
        times = period * np.arange(n_s) / n_s
    dts = period / n_s
    dt_u = (np.roll(slices, -1, axis=0) - np.roll(slices, 1, axis=0)) / (2.0 * dts)
    u = slices[:, 1:-1]
    dx = (slices[:, 2:] - slices[:, :-2]) / (2.0 * h)
    dxx = (slices[:, 2:] - 2.0 * u + slices[:, :-2]) / (h * h)
    fu = f.eval(times[:, None], u)
    return np.abs(dt_u[:, 1:-1] - c * dx - dxx - fu)


def residual(profile, f: TimePeriodicNonlinearity) -> float:
    """Sup-norm residual of a stored periodic profile (needs at least 3 slices)."""
    slices = np.asarray(profile.slices)
    if slices.shape[0] < 3:
        raise ValueError("residual needs at least 3 time slices")
    return float(np.max(space_time_residual(slices, profile.period, profile.speed, profile.grid.spacing, f)))


@dataclass
class OrderingReport:
    preserved: bool
    first_violation_time: float | None
    max_violation: float
    horizon: float

    def to_dict(self):
        return {"preserved": self.preserved, "first_violation_time": self.first_violation_time,
                "max_violation": self.max_violation, "horizon": self.horizon}


def verify_ordering_preserved(lower0: FrameState, upper0: FrameState, f: TimePeriodicNonlinearity, c: float,
                              horizon: float, dt: float | None = None, boundary_mode: str = "frozen",
                              tol: float = ORDER_TOL) -> OrderingReport:
    """Evolve both states with identical steps and check lower <= upper + tol at every step."""
    if np.any(lower0.values > upper0.values + tol):
        raise ValueError("initial data not ordered")
    stepper = Stepper(f, c, lower0.grid, dt, boundary_mode=boundary_mode)
    n_total = int(round(horizon / stepper.dt))
    lo, up = lower0, upper0
    done = 0
    worst = 0.0
    first = None
    while done < n_total:
        n = min(stepper.n_steps, n_total - done)
        lo, sl_lo = stepper.advance(lo, n, 1)
        up, sl_up = stepper.advance(up, n, 1)
        gap = np.max(sl_lo - sl_up, axis=1)
        worst = max(worst, float(np.max(gap)))
        bad = np.nonzero(gap > tol)[0]
        if first is None and bad.size:
            first = lower0.time + (done + bad[0] + 1) * stepper.dt
        done += n
    return OrderingReport(first is None, first, worst, horizon)
