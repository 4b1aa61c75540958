"""Pulsating fronts (c, U): speed selection by zero drift, periodic profiles,
shift alignment, homogeneous planar fronts and the KPP speed sandwich."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from . import nonlinearity as nl
from .nonlinearity import HomogeneousNonlinearity, TimePeriodicNonlinearity
from .pde_core import N_SLICES, FrameState, Grid1D, OvershootError, Stepper, residual, steps_per_period

log = logging.getLogger(__name__)

PROFILE_TOL = 1e-10
MAX_PERIODS = 5000
TRANSIENT_TOL = 1e-6
SPEED_TOL = 1e-6
NORM_TOL = 1e-8


class FrontError(RuntimeError):
    """Speed selection failed; ``info`` carries the diagnostic data."""

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info


class NoSignChange(FrontError):
    pass


class NonMonotoneDrift(FrontError):
    pass


class NotConverged(FrontError):
    pass


@dataclass
class FrontProfile:
    grid: Grid1D
    period: float
    speed: float | None
    slices: np.ndarray
    alpha_norm: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_slices(self) -> int:
        return self.slices.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.period * np.arange(self.n_slices) / self.n_slices

    @property
    def xi(self) -> np.ndarray:
        return self.grid.nodes

    def at_center(self, j: int = 0) -> float:
        return float(self.slices[j, self.grid.center])

    def monotonicity_violations(self) -> int:
        """Number of (j, i) with U(t_j, xi_{i+1}) >= U(t_j, xi_i).

        Ties between values that have saturated in double precision (1 - U below
        one ulp of 1, or U underflowed to 0) cannot be strict and are not counted.
        """
        u = self.slices
        d = np.diff(u, axis=1)
        sat = (u >= 1.0 - np.finfo(float).epsneg) | (u <= np.finfo(float).tiny)
        tie_ok = (d == 0.0) & sat[:, 1:] & sat[:, :-1]
        return int(np.sum((d > 0.0) | ((d == 0.0) & ~tie_ok)))

    def check_invariants(self, tol_bc: float = 1e-6, tol_norm: float = NORM_TOL) -> list[str]:
        problems = []
        if np.any(self.slices[:, 0] < 1 - tol_bc) or np.any(self.slices[:, -1] > tol_bc):
            problems.append("boundary values off (1, 0)")
        v = self.monotonicity_violations()
        if v:
            problems.append(f"{v} monotonicity violations")
        if self.alpha_norm is not None and abs(self.at_center() - self.alpha_norm) > tol_norm:
            problems.append(f"|U(0,0) - alpha_norm| = {abs(self.at_center() - self.alpha_norm):.3g}")
        return problems


def default_guess(xi):
    return 0.5 * (1.0 - np.tanh(np.asarray(xi) / 2.0))


# ------------------------------------------------------------------ level crossings and shifts

def crossing(v: np.ndarray, xi: np.ndarray, level: float) -> float:
    """Position where the decreasing grid function v crosses ``level``.

    Uses the cubic through the four nodes around the bracketing cell.
    """
    above = np.nonzero(v >= level)[0]
    below = np.nonzero(v < level)[0]
    if above.size == 0 or below.size == 0:
        raise FrontError(f"level {level} not bracketed: front escaped the domain")
    i = int(below[0]) - 1
    if i < 0:
        raise FrontError(f"level {level} not bracketed: front escaped the domain")
    lo = max(0, min(i - 1, v.size - 4))
    x = xi[lo:lo + 4]
    y = v[lo:lo + 4] - level
    coef = np.polyfit(x - xi[i], y, 3)
    a, b = 0.0, xi[i + 1] - xi[i]
    pa, pb = np.polyval(coef, a), np.polyval(coef, b)
    if pa * pb > 0:
        t = v[i] - level
        return float(xi[i] + t / (v[i] - v[i + 1]) * b)
    return float(xi[i] + optimize.brentq(lambda s: np.polyval(coef, s), a, b, xtol=1e-15))


def shift_nodes(v: np.ndarray, k: int) -> np.ndarray:
    """w_i = v_{i+k}, padded with the boundary values; a translation by -k nodes."""
    if k == 0:
        return v.copy()
    w = np.empty_like(v)
    if k > 0:
        w[:-k] = v[k:]
        w[-k:] = v[-1]
    else:
        w[-k:] = v[:k]
        w[:-k] = v[0]
    return w


def _tail_extend(v: np.ndarray, xi: np.ndarray, x: np.ndarray, spline, keep_ends: bool = False) -> np.ndarray:
    """Spline inside, geometric continuation of the tails from the second and
    second-to-last nodes.  The continuation replaces the Dirichlet end intervals,
    which keeps translated profiles monotone; ``keep_ends`` uses it only outside
    the domain so node values are reproduced exactly."""
    h = xi[1] - xi[0]
    out = spline(np.clip(x, xi[0], xi[-1]))
    right = x > (xi[-1] if keep_ends else xi[-2])
    if np.any(right):
        r = np.clip(v[-2] / v[-3], 0.0, 1.0) if v[-3] > 0 else 0.0
        out[right] = v[-2] * r ** ((x[right] - xi[-2]) / h)
    left = x < (xi[0] if keep_ends else xi[1])
    if np.any(left):
        d1, d2 = 1.0 - v[1], 1.0 - v[2]
        r = np.clip(d1 / d2, 0.0, 1.0) if d2 > 0 else 0.0
        out[left] = 1.0 - d1 * r ** ((xi[1] - x[left]) / h)
    return out


def translate(slices: np.ndarray, xi: np.ndarray, s: float, boundary=(1.0, 0.0)) -> np.ndarray:
    """Slices of U(t, xi + s) on the same nodes (cubic spline, tails continued)."""
    slices = np.atleast_2d(slices)
    out = np.empty_like(slices)
    for j, v in enumerate(slices):
        out[j] = _tail_extend(v, xi, xi + s, CubicSpline(xi, v))
        out[j, 0], out[j, -1] = boundary
    return out


def shifted(profile: FrontProfile, s: float) -> FrontProfile:
    """The profile translated right by s: U(t, xi - s)."""
    sl = translate(profile.slices, profile.xi, -s)
    return FrontProfile(profile.grid, profile.period, profile.speed, sl, None, dict(profile.meta))


def _as_slices(obj):
    if isinstance(obj, FrontProfile):
        return obj.slices, obj.grid
    if isinstance(obj, FrameState):
        return obj.values[None, :], obj.grid
    return np.atleast_2d(np.asarray(obj, dtype=float)), None


def align_shift(A, B, grid: Grid1D | None = None, level: float = 0.5, search: int = 3) -> tuple[float, float]:
    """Minimise over s the sup of |A(t_j, xi) - B(t_j, xi + s)| on interior nodes with
    xi + s inside the domain.  Returns (s, distance)."""
    a, ga = _as_slices(A)
    b, gb = _as_slices(B)
    grid = grid or ga or gb
    if a.shape != b.shape:
        raise ValueError("profiles must share grid and slice count")
    xi = grid.nodes
    h = grid.spacing
    n = xi.size
    try:
        k0 = int(round((crossing(b[0], xi, level) - crossing(a[0], xi, level)) / h))
    except FrontError:
        k0 = 0

    def node_dist(k):
        lo, hi = max(1, 1 - k), min(n - 1, n - 1 - k)
        if hi <= lo:
            return np.inf
        return float(np.max(np.abs(a[:, lo:hi] - b[:, lo + k:hi + k])))

    ks = range(k0 - search, k0 + search + 1)
    dists = [node_dist(k) for k in ks]
    kbest = list(ks)[int(np.argmin(dists))]
    splines = [CubicSpline(xi, row) for row in b]
    interior = xi[1:-1]

    def dist(s):
        keep = (interior + s >= xi[0]) & (interior + s <= xi[-1])
        x = interior[keep] + s
        return max(float(np.max(np.abs(a[j, 1:-1][keep] - sp(x)))) for j, sp in enumerate(splines))

    res = optimize.minimize_scalar(dist, bracket=None, bounds=((kbest - 1) * h, (kbest + 1) * h),
                                   method="bounded", options={"xatol": 1e-12 * max(1.0, h)})
    s, d = float(res.x), float(res.fun)
    d_node = min(dists)
    if d_node < d:
        s, d = kbest * h, d_node
    return s, d


# ------------------------------------------------------------------ drift and periodic profiles

@dataclass
class DriftResult:
    speed: float
    drift: float  # per-period displacement d(c) of the level crossing
    rate: float  # d(c) / T
    error: float
    state: FrameState
    periods: int
    converged: bool


class _Tracker:
    """Evolves a front in the frame of speed c, recentering by whole nodes each period."""

    def __init__(self, f, c, grid, v0, level, dt=None):
        self.stepper = Stepper(f, c, grid, dt)
        self.state = FrameState(grid, 0.0, v0.copy(), (1.0, 0.0))
        self.xi = grid.nodes
        self.h = grid.spacing
        self.level = level
        self.offset = 0.0
        self.periods = 0
        self.positions = [crossing(v0, self.xi, level)]

    def run(self, n):
        for _ in range(n):
            self.state, _ = self.stepper.period(self.state)
            x = crossing(self.state.values, self.xi, self.level)
            self.positions.append(x + self.offset)
            k = int(round(x / self.h))
            if k:
                self.state.values = shift_nodes(self.state.values, k)
                self.offset += k * self.h
            self.periods += 1


def measure_drift(f: TimePeriodicNonlinearity, c: float, grid: Grid1D, v0=None, level: float = 0.5,
                  abs_tol: float = 1e-9, rel_tol: float = 0.0, window_time: float = 2.0,
                  max_periods: int = MAX_PERIODS, dt=None) -> DriftResult:
    """Per-period displacement of the ``level`` crossing in the frame of speed c.

    The displacement is averaged over windows of about ``window_time``; successive
    window means are extrapolated geometrically to estimate the remaining transient,
    and the run stops once that estimate is below max(abs_tol, rel_tol |rate|).
    """
    if v0 is None:
        v0 = default_guess(grid.nodes)
    T = f.period
    tr = _Tracker(f, c, grid, np.asarray(v0, dtype=float), level, dt)
    w = max(1, int(round(window_time / T)))
    means = []
    err = np.inf
    while tr.periods + w <= max_periods:
        tr.run(w)
        p = tr.positions
        means.append((p[-1] - p[-1 - w]) / (w * T))
        if len(means) >= 3:
            d1 = means[-1] - means[-2]
            d0 = means[-2] - means[-3]
            rho = d1 / d0 if d0 != 0 else 0.0
            if 0.0 <= rho < 0.95:
                err = abs(d1) * rho / (1.0 - rho) + abs(d1) * 1e-3
            else:
                err = abs(d1) * 20.0
            if d1 == 0.0:
                err = 0.0
            if err <= max(abs_tol, rel_tol * abs(means[-1])):
                break
    rate = means[-1]
    conv = err <= max(abs_tol, rel_tol * abs(rate))
    st = tr.state
    return DriftResult(c, rate * T, rate, err, st, tr.periods, bool(conv))


def displacement_per_period(f: TimePeriodicNonlinearity, c: float, grid: Grid1D, v0=None, **kw) -> float:
    """d(c): displacement of the level crossing over one period once the transient has passed."""
    res = measure_drift(f, c, grid, v0, **kw)
    if not res.converged:
        raise NotConverged(f"drift at c={c} did not settle", error=res.error, periods=res.periods)
    return res.drift


def solve_periodic_profile(f: TimePeriodicNonlinearity, c: float, grid: Grid1D, initial_guess=None,
                           tol: float = PROFILE_TOL, max_periods: int = MAX_PERIODS, n_slices: int = N_SLICES,
                           dt=None, boundary=(1.0, 0.0), raise_on_failure: bool = True) -> FrontProfile:
    """Iterate the period map from ``initial_guess`` until the per-period sup change is below tol."""
    if initial_guess is None:
        initial_guess = default_guess
    stepper = Stepper(f, c, grid, dt)
    state = FrameState.from_function(grid, initial_guess, 0.0, boundary)
    change = np.inf
    it = 0
    while it < max_periods:
        new, _ = stepper.period(state)
        change = float(np.max(np.abs(new.values - state.values)))
        state = new
        it += 1
        if change < tol:
            break
    converged = change < tol
    if not converged and raise_on_failure:
        raise NotConverged(f"periodic profile not converged after {it} periods (change {change:.3g})",
                           change=change, periods=it)
    _, sl = stepper.period(FrameState(grid, 0.0, state.values, state.boundary), n_slices)
    meta = {"iterations": it, "final_change": change, "converged": converged, "dt": stepper.dt,
            "steps_per_period": stepper.n_steps}
    return FrontProfile(grid, f.period, c, sl, None, meta)


def normalize(profile: FrontProfile, alpha: float) -> FrontProfile:
    """Translate so that U(0, 0) = alpha, using the slice-0 spline."""
    xi = profile.xi
    sp = CubicSpline(xi, profile.slices[0])
    x0 = crossing(profile.slices[0], xi, alpha)
    h = profile.grid.spacing
    x = optimize.brentq(lambda s: sp(s) - alpha, x0 - h, x0 + h, xtol=1e-15)
    sl = translate(profile.slices, xi, x)
    sl[0, profile.grid.center] = float(sp(x))
    meta = dict(profile.meta, normalization_shift=x)
    return FrontProfile(profile.grid, profile.period, profile.speed, sl, alpha, meta)


def c_max_for(f: TimePeriodicNonlinearity) -> float:
    return 2.0 * np.sqrt(f.sup_abs_du()) + 1.0


def solve_front(f: TimePeriodicNonlinearity, alpha_norm: float | None = None, grid: Grid1D | None = None,
                initial_guess=None, speed_tol: float = SPEED_TOL, c_bracket: tuple[float, float] | None = None,
                dt=None, check_bistable: bool = True, n_slices: int = N_SLICES) -> FrontProfile:
    """Pulsating front normalised by U(0, 0) = alpha_norm.

    Default alpha_norm is the interior fixed point of the period map.  The step
    count per period is a multiple of ``n_slices`` for every run of the solve.
    """
    from .periodic_ode import find_fixed_points

    grid = grid or Grid1D.from_spacing()
    if check_bistable and not nl.check_bistable_on_average(f).is_bistable_on_average:
        raise ValueError("nonlinearity is not bistable on average")
    if alpha_norm is None:
        interior = find_fixed_points(f).interior("unstable")
        if len(interior) != 1:
            raise FrontError("no unique interior fixed point to normalise by; pass alpha_norm")
        alpha_norm = interior[0].alpha
    if not 0.0 < alpha_norm < 1.0:
        raise ValueError("alpha_norm must lie in (0, 1)")
    v0 = np.asarray(initial_guess(grid.nodes) if callable(initial_guess) else
                    (default_guess(grid.nodes) if initial_guess is None else initial_guess), dtype=float)
    v0[0], v0[-1] = 1.0, 0.0
    T = f.period
    if n_slices != N_SLICES:
        dt = T / steps_per_period(T, dt, grid.spacing, n_slices)
    c_max = c_max_for(f)
    lo, hi = c_bracket or (-c_max, c_max)

    log_rows = []
    warm = {"v": v0}

    def rate(c, rel=0.0, abs_tol=1e-9):
        res = measure_drift(f, c, grid, warm["v"], abs_tol=abs_tol, rel_tol=rel, dt=dt)
        log_rows.append({"c": c, "d": res.drift, "error": res.error, "periods": res.periods,
                         "converged": res.converged})
        # the profile shape does not depend on the frame speed, so every run
        # continues the relaxation of the previous one
        warm["v"] = res.state.values.copy()
        return res

    r_lo = rate(lo, rel=0.05)
    r_hi = rate(hi, rel=0.05)
    if not (r_lo.rate > 0 > r_hi.rate):
        raise NoSignChange(f"d(c) has no sign change on [{lo:.6g}, {hi:.6g}]", bracket_log=log_rows)

    ends = {lo: r_lo.rate, hi: r_hi.rate}

    def fun(c):
        # brentq re-evaluates the bracket ends; their signs are already known
        return ends[c] if c in ends else rate(c).rate

    c_star = optimize.brentq(fun, lo, hi, xtol=speed_tol, rtol=4 * np.finfo(float).eps)
    samples = sorted(log_rows, key=lambda r: r["c"])
    ds = np.array([r["d"] for r in samples])
    errs = np.array([r["error"] for r in samples]) * T
    if np.any(np.diff(ds) > errs[1:] + errs[:-1] + 1e-12):
        raise NonMonotoneDrift("drift samples are not decreasing in c", bracket_log=log_rows)

    # polish: the drift rate is the speed offset, so one correction lands on the root
    c = c_star
    for _ in range(10):
        res = rate(c, abs_tol=1e-11)
        if abs(res.rate) < 1e-10:
            break
        c = c + res.rate
    prof = solve_periodic_profile(f, c, grid, warm["v"], dt=dt, n_slices=n_slices)
    prof = normalize(prof, alpha_norm)
    prof.meta.update(bracket_log=log_rows, c_bisection=c_star, c_max=c_max,
                     residual=residual(prof, f), T=T, M=grid.half_width, dxi=grid.spacing)
    return prof


# ------------------------------------------------------------------ homogeneous fronts

def _newton_front(g: HomogeneousNonlinearity, theta_pin: float, grid: Grid1D, u0=None, c0=0.0,
                  tol=1e-12, max_iter=100):
    """Newton on the discrete stationary problem D2 U + c D1 U + g(U) = 0 with U(0) pinned."""
    xi = grid.nodes
    h = grid.spacing
    n = xi.size
    m = n - 2
    ic = grid.center - 1
    u = default_guess(xi) if u0 is None else np.asarray(u0, dtype=float).copy()
    u[0], u[-1] = 1.0, 0.0
    c = float(c0)
    d2 = 1.0 / h ** 2
    e = np.ones(m)

    def F(u, c):
        ui = u[1:-1]
        r = (u[2:] - 2 * ui + u[:-2]) * d2 + c * (u[2:] - u[:-2]) / (2 * h) + g.eval(ui)
        return np.append(r, ui[ic] - theta_pin)

    r = F(u, c)
    for it in range(max_iter):
        nr = np.max(np.abs(r))
        if nr < tol:
            return u, c, it
        ui = u[1:-1]
        J = sparse.diags([(d2 - c / (2 * h)) * e[1:], -2 * d2 * e + g.eval_du(ui), (d2 + c / (2 * h)) * e[1:]],
                         [-1, 0, 1], shape=(m, m), format="lil")
        dc = (u[2:] - u[:-2]) / (2 * h)
        Jb = sparse.lil_matrix((m + 1, m + 1))
        Jb[:m, :m] = J
        Jb[:m, m] = dc[:, None]
        Jb[m, ic] = 1.0
        step = spsolve(Jb.tocsc(), -r)
        lam = 1.0
        while lam > 1e-4:
            un = u.copy()
            un[1:-1] += lam * step[:m]
            cn = c + lam * step[m]
            rn = F(un, cn)
            if np.max(np.abs(rn)) < (1 - 0.25 * lam) * nr or np.max(np.abs(rn)) < tol:
                break
            lam *= 0.5
        u, c, r = un, cn, rn
    raise NotConverged(f"Newton did not converge (residual {np.max(np.abs(r)):.3g})")


def solve_homogeneous_front(g: HomogeneousNonlinearity, theta_pin: float | None = None,
                            grid: Grid1D | None = None, period: float = 1.0, method: str = "newton",
                            check: bool = True, n_slices: int = N_SLICES) -> FrontProfile:
    """Planar front (c_g, U_g) of the autonomous problem, pinned at U(0) = theta_pin."""
    grid = grid or Grid1D.from_spacing()
    if check and not g.is_bistable():
        raise ValueError(f"{g.name} is not bistable")
    if theta_pin is None:
        theta_pin = g.interior_zeros()[0]
    f = nl.autonomous(g, period)
    if method == "newton":
        try:
            u, c, it = _newton_front(g, theta_pin, grid)
            if np.all(np.diff(u) < 0):
                sl = np.repeat(u[None, :], n_slices, axis=0)
                prof = FrontProfile(grid, period, c, sl, theta_pin, {"method": "newton", "iterations": it})
                prof.meta["residual"] = residual(prof, f)
                return prof
            log.info("Newton front not monotone, falling back to time stepping")
        except (NotConverged, RuntimeError) as exc:
            log.info("Newton failed (%s), falling back to time stepping", exc)
    prof = solve_front(f, theta_pin, grid, check_bistable=False)
    prof.meta["method"] = "drift"
    return prof


def pinned_kpp_front(K: float, alpha: float, grid: Grid1D, sign: float = 1.0, period: float = 1.0) -> FrontProfile:
    """Finite-domain front of sign K u (1 - u) pinned at U(0) = alpha (no bistability check).

    For sign < 0 the problem is the image of the sign > 0 one under u -> 1 - u,
    xi -> -xi, c -> -c; the centred scheme on the symmetric grid shares this, so
    the (badly conditioned) direct solve is replaced by the reflection."""
    if sign < 0:
        up = pinned_kpp_front(K, 1.0 - alpha, grid, 1.0, period)
        u = 1.0 - up.slices[0][::-1]
        sl = np.repeat(u[None, :], N_SLICES, axis=0)
        meta = dict(up.meta, K=-K, reflected=True)
        return FrontProfile(grid, period, -up.speed, sl, alpha, meta)
    g = nl.logistic(K)
    u, c, it = _newton_front(g, alpha, grid, c0=2.0 * np.sqrt(K))
    sl = np.repeat(u[None, :], N_SLICES, axis=0)
    return FrontProfile(grid, period, c, sl, alpha, {"method": "newton", "iterations": it, "K": K})


@dataclass
class SpeedSandwich:
    c_lower: float
    c_front: float
    c_upper: float
    K: float

    @property
    def ordered(self) -> bool:
        return bool(self.c_lower <= self.c_front <= self.c_upper)

    def to_dict(self):
        return {"c_lower": self.c_lower, "c_front": self.c_front, "c_upper": self.c_upper, "K": self.K,
                "ordered": self.ordered}


def speed_sandwich(f: TimePeriodicNonlinearity, grid: Grid1D | None = None, front: FrontProfile | None = None,
                   alpha_norm: float | None = None) -> SpeedSandwich:
    """Speeds of the pinned finite-domain problems for -K u(1-u) <= f <= K u(1-u)."""
    grid = grid or Grid1D.from_spacing()
    if not nl.check_bistable_on_average(f).is_bistable_on_average:
        raise ValueError("nonlinearity is not bistable on average")
    if front is None:
        front = solve_front(f, alpha_norm, grid)
    alpha = front.alpha_norm if alpha_norm is None else alpha_norm
    K = 2.0 * f.sup_abs_du()
    t = np.linspace(0.0, f.period, 65)[:, None]
    u = np.linspace(0.0, 1.0, 201)[None, :]
    for attempt in range(2):
        env = K * u * (1 - u)
        vals = f.eval(t, u)
        if np.all(vals <= env + 1e-12) and np.all(vals >= -env - 1e-12):
            break
        if attempt == 1:
            raise ValueError("envelope -K u(1-u) <= f <= K u(1-u) fails after doubling K")
        K *= 2.0
    upper = pinned_kpp_front(K, alpha, grid, +1.0, f.period)
    lower = pinned_kpp_front(K, alpha, grid, -1.0, f.period)
    return SpeedSandwich(float(lower.speed), float(front.speed), float(upper.speed), float(K))
