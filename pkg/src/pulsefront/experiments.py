"""Desk-scale experiments: relaxation to the front, explicit sub/supersolutions,
the small-period limit and perturbations of the reaction term."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline

from . import nonlinearity as nl
from .front_solver import (FrontError, FrontProfile, align_shift, crossing, solve_front,
                           solve_homogeneous_front, _tail_extend)
from .nonlinearity import TimePeriodicNonlinearity
from .pde_core import FrameState, Grid1D, OvershootError, Stepper, residual, space_time_residual
from .periodic_ode import (IntegrationError, equilibrium_from_fixed_point, find_fixed_points,
                           poincare_batch)

log = logging.getLogger(__name__)

GAMMA_WORK = 0.1
FRONT_LIKE = 0.2
N_SLACK = 5e-3
SAFETY = 0.1


# ------------------------------------------------------------------ stability

@dataclass
class StabilityRun:
    front: FrontProfile
    h: np.ndarray
    times: np.ndarray
    shifts: np.ndarray
    distances: np.ndarray
    fitted_rate: float
    mu: float
    lambda0: float
    lambda1: float
    status: str = "ok"
    fit_window: tuple[int, int] = (0, 0)

    def to_dict(self):
        return {"fitted_rate": self.fitted_rate, "mu": self.mu, "lambda0": self.lambda0, "lambda1": self.lambda1,
                "status": self.status, "final_distance": float(self.distances[-1]),
                "final_shift": float(self.shifts[-1]), "fit_window": list(self.fit_window)}


def boundary_eigenvalues(f: TimePeriodicNonlinearity):
    """Equilibria 0 and 1 with their principal eigenvalues."""
    e0 = equilibrium_from_fixed_point(f, 0.0)
    e1 = equilibrium_from_fixed_point(f, 1.0)
    return e0, e1


def is_front_like(h: np.ndarray, margin: float = FRONT_LIKE) -> bool:
    """Left quarter >= 1 - margin and right quarter <= margin."""
    n = h.size
    q = n // 4
    return bool(np.all(h[:q] >= 1.0 - margin) and np.all(h[n - q:] <= margin))


def fit_rate(times, dist, floor=1e-10, cap=0.1):
    """Least-squares slope of log(dist) over the tail: last half of the series and
    floor < dist < cap * dist[0]."""
    times = np.asarray(times)
    dist = np.asarray(dist)
    idx = np.arange(times.size)
    sel = (idx >= times.size // 2) & (dist > floor) & (dist < cap * dist[0])
    if np.count_nonzero(sel) < 2:
        sel = (idx >= 1) & (dist > floor)
    if np.count_nonzero(sel) < 2:
        return float("nan"), (0, 0)
    k = np.nonzero(sel)[0]
    slope = np.polyfit(times[sel], np.log(dist[sel]), 1)[0]
    return float(slope), (int(k[0]), int(k[-1]))


def run_stability(front: FrontProfile, f: TimePeriodicNonlinearity, h, n_periods: int = 40,
                  check_front_like: bool = True, boundary_mode: str = "frozen") -> StabilityRun:
    """Evolve v(0) = h in the frame of the front speed and track the aligned distance."""
    grid = front.grid
    v0 = np.asarray(h(grid.nodes) if callable(h) else h, dtype=float)
    if check_front_like and not is_front_like(v0):
        raise ValueError("initial data is not front-like (quarters must be >= 0.8 / <= 0.2)")
    e0, e1 = boundary_eigenvalues(f)
    lam0, lam1 = e0.eigenvalue, e1.eigenvalue
    if not (lam0 > 0 and lam1 > 0):
        raise ValueError("boundary equilibria must both be stable")
    mu = 0.5 * min(lam0, lam1)
    stepper = Stepper(f, front.speed, grid, n_steps=front.meta.get("steps_per_period"),
                      boundary_mode=boundary_mode)
    state = FrameState(grid, 0.0, v0.copy(), (float(v0[0]), float(v0[-1])))
    ref = front.slices[0]
    times, shifts, dists = [0.0], [], []
    s, d = align_shift(ref, state.values, grid)
    shifts.append(s)
    dists.append(d)
    status = "ok"
    for n in range(1, n_periods + 1):
        try:
            state, _ = stepper.period(state)
        except OvershootError as exc:
            status = f"overshoot: {exc}"
            break
        s, d = align_shift(ref, state.values, grid)
        times.append(n * f.period)
        shifts.append(s)
        dists.append(d)
        if d > 2.0 * dists[0] + 1e-6:  # absolute floor: an exact front starts at d = 0
            status = "diverged"
            break
    times, shifts, dists = map(np.asarray, (times, shifts, dists))
    rate, window = fit_rate(times, dists)
    return StabilityRun(front, v0, times, shifts, dists, rate, mu, lam0, lam1, status, window)


def measure_D(front: FrontProfile, f: TimePeriodicNonlinearity, eps_list=(0.01, 0.02, 0.04),
              n_periods: int = 20) -> dict:
    """sup_t |v(t) - U(t)| / eps for v(0) = U(0) +- eps (fixed shift), boundary values
    following the ODE."""
    grid = front.grid
    n_s = front.n_slices
    stepper = Stepper(f, front.speed, grid, n_steps=front.meta.get("steps_per_period"), boundary_mode="flow")
    ratios = {}
    for eps in eps_list:
        for sign in (+1.0, -1.0):
            v0 = np.clip(front.slices[0] + sign * eps, 0.0, 1.0)
            state = FrameState(grid, 0.0, v0, (float(v0[0]), float(v0[-1])))
            worst = float(np.max(np.abs(v0 - front.slices[0])))
            for _ in range(n_periods):
                state, sl = stepper.period(state, n_s)
                worst = max(worst, float(np.max(np.abs(sl - front.slices))))
            ratios[(eps, sign)] = worst / eps
    by_eps = {eps: max(ratios[(eps, 1.0)], ratios[(eps, -1.0)]) for eps in eps_list}
    vals = np.array(list(by_eps.values()))
    D = float(np.max(vals))
    spread = float((vals.max() - vals.min()) / vals.mean())
    return {"D": D, "by_eps": {str(k): v for k, v in by_eps.items()}, "spread": spread,
            "stable": bool(np.all(np.abs(vals / vals.mean() - 1.0) <= 0.2))}


# ------------------------------------------------------------------ sub/supersolution

def smoothstep(x, lo, hi):
    """Quintic C2 step from 0 (x <= lo) to 1 (x >= hi) with first and second derivatives."""
    L = hi - lo
    s = np.clip((np.asarray(x, dtype=float) - lo) / L, 0.0, 1.0)
    chi = s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)
    d1 = 30.0 * s * s * (1.0 - s) ** 2 / L
    d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (L * L)
    return chi, d1, d2


def modulus_level(f: TimePeriodicNonlinearity, lam0: float, lam1: float, mu: float,
                  n_t: int = 129, n_u: int = 400, iters: int = 50) -> float:
    """Largest u0 with |f_u(t,u) - f_u(t,0)| <= (lam0-mu)/4 and |f_u(t,1) - f_u(t,1-u)| <= (lam1-mu)/4
    for all u in [0, u0], found by bisection on the sampled modulus of continuity."""
    t = np.linspace(0.0, f.period, n_t)[:, None]
    fu0 = f.eval_du(t, 0.0)
    fu1 = f.eval_du(t, 1.0)

    def ok(u0):
        u = np.linspace(0.0, u0, n_u)[None, :]
        a = np.max(np.abs(f.eval_du(t, u) - fu0))
        b = np.max(np.abs(fu1 - f.eval_du(t, 1.0 - u)))
        return a <= (lam0 - mu) / 4.0 and b <= (lam1 - mu) / 4.0

    lo, hi = 0.0, 0.5
    if ok(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


@dataclass
class SubsolutionBundle:
    q0: float
    mu: float
    lambda0: float
    lambda1: float
    u0: float
    xi_minus: float
    xi_plus: float
    C1: float
    C2: float
    C3: float
    omega: float
    shift_seed: float
    phi0: object  # EquilibriumState of 0
    phi1: object  # EquilibriumState of 1
    raw: dict = field(default_factory=dict)

    def chi(self, x):
        return smoothstep(x, self.xi_minus, self.xi_plus)

    def Lambda(self, t, sign: float = 1.0):
        """sign * omega q0 (1 - exp(-mu t)) + shift_seed; sign -1 is the supersolution shift."""
        return sign * self.omega * self.q0 * (1.0 - np.exp(-self.mu * np.asarray(t))) + self.shift_seed

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("q0", "mu", "lambda0", "lambda1", "u0", "xi_minus", "xi_plus",
                                           "C1", "C2", "C3", "omega", "shift_seed")}
        d["raw"] = dict(self.raw)
        return d


class _FrontField:
    """U(t, x) for arbitrary x at the stored slice times, tails continued geometrically."""

    def __init__(self, front: FrontProfile):
        self.front = front
        self.xi = front.xi
        self.splines = [CubicSpline(self.xi, row) for row in front.slices]

    def __call__(self, j: int, x):
        j %= self.front.n_slices
        return _tail_extend(self.front.slices[j], self.xi, np.asarray(x, dtype=float), self.splines[j],
                            keep_ends=True)


def build_subsolution(front: FrontProfile, f: TimePeriodicNonlinearity, q0: float, shift_seed: float = 0.0,
                      safety: float = SAFETY) -> SubsolutionBundle:
    """Assemble mu, u0, the window [xi-, xi+], chi, C1, C2, C3 and omega for amplitude q0."""
    if not 0.0 <= q0 <= GAMMA_WORK:
        raise ValueError(f"q0 must lie in [0, {GAMMA_WORK}]")
    e0, e1 = boundary_eigenvalues(f)
    lam0, lam1 = e0.eigenvalue, e1.eigenvalue
    mu = 0.5 * min(lam0, lam1)
    u0 = modulus_level(f, lam0, lam1, mu)
    U = front.slices
    xi = front.xi
    h = front.grid.spacing
    right = np.nonzero(np.all(U <= u0, axis=0))[0]
    left = np.nonzero(np.all(U >= 1.0 - u0, axis=0))[0]
    xi_plus = float(xi[right[0]])
    xi_minus = float(xi[left[-1]])
    t = front.times
    p0 = e0.phi(t)[:, None]
    p1 = e1.phi(t)[:, None]
    fu_sup = f.sup_abs_du()
    fu0 = f.eval_du(t, 0.0)[:, None]
    fu1 = f.eval_du(t, 1.0)[:, None]
    c = front.speed

    for attempt in range(2):
        win = (xi >= xi_minus) & (xi <= xi_plus)
        xw = xi[win]
        chi, d1, d2 = smoothstep(xw, xi_minus, xi_plus)
        Uxi = np.gradient(U, h, axis=1)[:, win]
        corr = d1[None, :] * (p1 - p0)
        c1_raw = -max(float(np.max(Uxi)), float(np.max(Uxi + q0 * corr)))
        if c1_raw > 0:
            break
        if attempt == 1:
            raise ValueError("C1 <= 0 on the widened window: front slope degenerate")
        L = xi_plus - xi_minus
        xi_minus, xi_plus = xi_minus - 0.5 * L, xi_plus + 0.5 * L
    c2_raw = fu_sup * float(np.max(chi[None, :] * p0 + (1.0 - chi[None, :]) * p1))
    c3_expr = (chi[None, :] * p0 * (mu - lam0 - fu0) + (1.0 - chi[None, :]) * p1 * (mu - lam1 - fu1)
               + (c * d1 + d2)[None, :] * (p0 - p1))
    c3_raw = float(np.max(c3_expr))
    C1 = (1.0 - safety) * c1_raw
    C2 = (1.0 + safety) * c2_raw
    C3 = max(c3_raw + safety * abs(c3_raw), 1e-12)
    omega = (C2 + C3) / (mu * C1)
    raw = {"C1": c1_raw, "C2": c2_raw, "C3": c3_raw, "window_nodes": int(np.count_nonzero(win))}
    return SubsolutionBundle(q0, mu, lam0, lam1, u0, xi_minus, xi_plus, C1, C2, C3, omega, shift_seed,
                             e0, e1, raw)


def _barrier(bundle: SubsolutionBundle, field: _FrontField, j: int, t: float, x: np.ndarray, sign: float):
    """u = U(t, x + Lambda) - sign q0 e^{-mu t} [chi Phi0 + (1-chi) Phi1] before the max/min."""
    lam = bundle.Lambda(t, sign)
    y = x + lam
    chi = bundle.chi(y)[0]
    amp = bundle.q0 * np.exp(-bundle.mu * t)
    corr = chi * bundle.phi0.phi(t) + (1.0 - chi) * bundle.phi1.phi(t)
    return field(j, y) - sign * amp * corr, y


@dataclass
class SubsolutionReport:
    kind: str
    zone_extrema: dict
    extremum: float
    abs_max: float
    slack: float
    passed: bool
    order_test: dict | None = None

    def to_dict(self):
        return {"kind": self.kind, "zone_extrema": self.zone_extrema, "extremum": self.extremum,
                "abs_max": self.abs_max, "slack": self.slack, "passed": self.passed, "order_test": self.order_test}


def barrier_operator(bundle: SubsolutionBundle, front: FrontProfile, f: TimePeriodicNonlinearity,
                     horizon: float, kind: str = "sub"):
    """N[u] = u_t - c u_xi - u_xixi - f(t, u) by centred differences on the slice-time grid.

    Returns (times, N, zone labels, mask of nodes where the max/min is inactive in a
    3-node neighbourhood at all three time levels)."""
    sign = 1.0 if kind == "sub" else -1.0
    field_ = _FrontField(front)
    T = front.period
    n_s = front.n_slices
    dts = T / n_s
    n_t = int(round(horizon / dts))
    xi = front.xi
    h = front.grid.spacing
    c = front.speed
    vals = np.empty((n_t + 3, xi.size))
    ys = np.empty_like(vals)
    for k in range(-1, n_t + 2):
        vals[k + 1], ys[k + 1] = _barrier(bundle, field_, k, k * dts, xi, sign)
    if kind == "sub":
        active = vals > 0.0
        u = np.maximum(vals, 0.0)
    else:
        active = vals < 1.0
        u = np.minimum(vals, 1.0)
    u_t = (u[2:] - u[:-2]) / (2 * dts)
    mid = u[1:-1]
    u_x = (mid[:, 2:] - mid[:, :-2]) / (2 * h)
    u_xx = (mid[:, 2:] - 2 * mid[:, 1:-1] + mid[:, :-2]) / (h * h)
    times = dts * np.arange(n_t + 1)
    N = u_t[:, 1:-1] - c * u_x - u_xx - f.eval(times[:, None], mid[:, 1:-1])
    ok = active[:-2] & active[1:-1] & active[2:]
    ok = ndimage.minimum_filter1d(ok.astype(np.uint8), size=7, axis=1, mode="nearest").astype(bool)[:, 1:-1]
    y = ys[1:-1, 1:-1]
    zones = np.where(y < bundle.xi_minus, -1, np.where(y > bundle.xi_plus, 1, 0))
    return times, N, zones, ok


def verify_subsolution(bundle: SubsolutionBundle, front: FrontProfile, f: TimePeriodicNonlinearity,
                       horizon: float | None = None, kind: str = "sub", slack: float = N_SLACK,
                       order_test: bool = True) -> SubsolutionReport:
    """Zone-wise extremum of N over [0, horizon]: max N <= slack for the subsolution,
    min N >= -slack for the supersolution mirror."""
    if horizon is None:
        horizon = 10.0 * front.period
    times, N, zones, ok = barrier_operator(bundle, front, f, horizon, kind)
    names = {-1: "omega_minus", 0: "omega_0", 1: "omega_plus"}
    extrema = {}
    for z, name in names.items():
        sel = ok & (zones == z)
        if not np.any(sel):
            extrema[name] = None
            continue
        extrema[name] = float(np.max(N[sel])) if kind == "sub" else float(np.min(N[sel]))
    present = [v for v in extrema.values() if v is not None]
    ext = (max(present) if kind == "sub" else min(present)) if present else 0.0
    passed = ext <= slack if kind == "sub" else ext >= -slack
    abs_max = float(np.max(np.abs(N[ok]))) if np.any(ok) else 0.0
    order = _order_test(bundle, front, f, horizon, kind) if order_test else None
    if order is not None:
        passed = passed and order["preserved"]
    return SubsolutionReport(kind, extrema, ext, abs_max, slack, bool(passed), order)


def _order_test(bundle, front, f, horizon, kind, offset=0.01, tol=1e-6):
    """The barrier stays on its side of the solution started from barrier(0) +- offset."""
    sign = 1.0 if kind == "sub" else -1.0
    field_ = _FrontField(front)
    xi = front.xi
    n_s = front.n_slices
    T = front.period
    b0, _ = _barrier(bundle, field_, 0, 0.0, xi, sign)
    b0 = np.clip(b0, 0.0, 1.0)
    v0 = np.clip(b0 + sign * offset, 0.0, 1.0)
    stepper = Stepper(f, front.speed, front.grid, n_steps=front.meta.get("steps_per_period"),
                      boundary_mode="flow")
    state = FrameState(front.grid, 0.0, v0, (float(v0[0]), float(v0[-1])))
    worst = -np.inf
    n_periods = int(round(horizon / T))
    for p in range(n_periods):
        state, sl = stepper.period(state, n_s)
        for j in range(n_s):
            k = p * n_s + j + 1
            t = k * T / n_s
            b, _ = _barrier(bundle, field_, k, t, xi, sign)
            b = np.clip(b, 0.0, 1.0)
            v = sl[j + 1] if j + 1 < n_s else state.values
            gap = np.max(sign * (b - v))
            worst = max(worst, float(gap))
    return {"preserved": bool(worst <= tol), "max_violation": worst, "offset": offset}


# ------------------------------------------------------------------ sweeps

SWEEP_COLUMNS = ["param", "speed", "fixed_point", "eigenvalue", "profile_dist", "status"]


@dataclass
class SweepTable:
    kind: str
    rows: list[dict]
    reference: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)

    def __post_init__(self):
        params = [r["param"] for r in self.rows]
        if any(b >= a for a, b in zip(params, params[1:])):
            raise ValueError("sweep parameters must be strictly decreasing")

    @property
    def columns(self):
        return SWEEP_COLUMNS + (["p_dev", "pprime_dev"] if self.kind == "perturb" else [])

    def column(self, name):
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)

    @property
    def flagged(self) -> bool:
        return any(r["status"] != "ok" for r in self.rows)

    def to_dict(self):
        return {"kind": self.kind, "rows": self.rows, "reference": self.reference, "fits": self.fits}


def _ordered_map(fun, items, workers: int):
    if workers <= 1:
        return [fun(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fun, items))


def aligned_distance(A: np.ndarray, B: np.ndarray, grid: Grid1D, window: float) -> float:
    """sup over |xi| <= window of |A(xi) - B(xi + s)| at the best shift."""
    s, _ = align_shift(A, B, grid)
    xi = grid.nodes
    sel = np.abs(xi) <= window
    Bs = _tail_extend(B, xi, xi[sel] + s, CubicSpline(xi, B))
    return float(np.max(np.abs(A[sel] - Bs)))


def homogenization_sweep(f_unit: TimePeriodicNonlinearity, T_list, grid: Grid1D | None = None,
                         workers: int = 1) -> SweepTable:
    """Fronts of f_unit(t/T, u) pinned at theta_g against the planar front of the average."""
    grid = grid or Grid1D.from_spacing()
    g = nl.averaged(f_unit)
    if not g.is_bistable():
        raise ValueError("averaged nonlinearity is not bistable")
    theta_g = g.interior_zeros()[0]
    if not g.eval_du(theta_g) > 0:
        raise ValueError("g'(theta_g) must be positive")
    ref = solve_homogeneous_front(g, theta_g, grid)

    def row(T):
        fT = nl.rescale_period(f_unit, T)
        out = {"param": float(T), "speed": np.nan, "fixed_point": np.nan, "eigenvalue": np.nan,
               "profile_dist": np.nan, "status": "ok"}
        try:
            rep = find_fixed_points(fT)
        except IntegrationError as exc:
            out["status"] = f"flagged: {exc}"
            return out
        if not rep.has_bistable_structure():
            out["status"] = "flagged: no three-fixed-point structure"
            return out
        alpha = rep.interior()[0].alpha
        eq = equilibrium_from_fixed_point(fT, alpha)
        out.update(fixed_point=alpha, eigenvalue=eq.eigenvalue)
        try:
            fr = solve_front(fT, theta_g, grid)
        except (FrontError, OvershootError) as exc:
            out["status"] = f"flagged: {exc}"
            return out
        out["speed"] = fr.speed
        out["speed_gap"] = abs(fr.speed - ref.speed)
        out["theta_gap"] = abs(alpha - theta_g)
        out["profile_dist"] = aligned_distance(fr.slices[0], ref.slices[0], grid, grid.half_width / 2)
        out["residual"] = fr.meta["residual"]
        out["monotonicity_violations"] = fr.monotonicity_violations()
        return out

    rows = _ordered_map(row, list(T_list), workers)
    table = SweepTable("homogenize", rows, {"c_g": ref.speed, "theta_g": theta_g})
    table.fits["T_f_empirical"] = max((r["param"] for r in rows if r["status"] == "ok"), default=None)
    return table


def make_perturbed(f: TimePeriodicNonlinearity, eps: float) -> TimePeriodicNonlinearity:
    """f(t, u) + eps sin(2 pi t / T) u (1 - u); omega(eps) = eps."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    desc = dict(f.descriptor, perturbed={"eps": eps, "direction": "sin(2 pi t/T) u(1-u)"})
    if eps == 0:
        return nl.TimePeriodicNonlinearity(f.period, f.raw_eval, f.raw_eval_du, desc, f.terms)
    return nl.add_term(f, nl.sine(eps, f.period), nl.logistic(), desc)


def fit_sinh_envelope(eps: np.ndarray, dev: np.ndarray) -> dict:
    """C2, C3 with dev = C2 sinh(C3 eps) through the two largest eps."""
    order = np.argsort(eps)[::-1]
    e1, e2 = eps[order[0]], eps[order[1]]
    y1, y2 = dev[order[0]], dev[order[1]]
    # sinh(a x) / sinh(b x) is increasing in x for a > b, from a/b at x = 0
    ratio = y1 / y2
    lin = e1 / e2
    if ratio <= lin * (1 + 1e-12):
        C3 = 1e-6 / e1
    else:
        from scipy.optimize import brentq
        hi = 1.0
        while np.sinh(hi * e1) / np.sinh(hi * e2) < ratio:
            hi *= 2
        C3 = brentq(lambda x: np.sinh(x * e1) / np.sinh(x * e2) - ratio, 1e-8, hi, xtol=1e-14)
    C2 = y1 / np.sinh(C3 * e1)
    return {"C2": float(C2), "C3": float(C3)}


def perturbation_sweep(f: TimePeriodicNonlinearity, eps_list, grid: Grid1D | None = None, workers: int = 1,
                       n_alpha: int = 201, envelope_tol: float = 0.1) -> SweepTable:
    """Poincare-map deviations and fronts of f + eps sin(2 pi t/T) u(1-u) along decreasing eps."""
    grid = grid or Grid1D.from_spacing()
    rep = find_fixed_points(f)
    if not rep.has_bistable_structure():
        raise ValueError("unperturbed period map must have exactly 0, alpha0, 1 with stable/unstable/stable")
    alpha0 = rep.interior()[0].alpha
    base = solve_front(f, alpha0, grid)
    alphas = np.linspace(0.0, 1.0, n_alpha)
    P, dP, _ = poincare_batch(f, alphas)

    def row(eps):
        fe = make_perturbed(f, eps)
        Pe, dPe, _ = poincare_batch(fe, alphas)
        out = {"param": float(eps), "speed": np.nan, "fixed_point": np.nan, "eigenvalue": np.nan,
               "profile_dist": np.nan, "status": "ok",
               "p_dev": float(np.max(np.abs(P - Pe))), "pprime_dev": float(np.max(np.abs(dP - dPe)))}
        rep_e = find_fixed_points(fe)
        if not rep_e.has_bistable_structure():
            out["status"] = "flagged: fixed-point structure lost"
            return out
        a_e = rep_e.interior()[0].alpha
        out["fixed_point"] = a_e
        out["eigenvalue"] = equilibrium_from_fixed_point(fe, a_e).eigenvalue
        try:
            fr = solve_front(fe, alpha0, grid)
        except (FrontError, OvershootError) as exc:
            out["status"] = f"flagged: {exc}"
            return out
        out["speed"] = fr.speed
        out["speed_gap"] = abs(fr.speed - base.speed)
        _, out["profile_dist"] = align_shift(fr, base)
        out["residual"] = fr.meta["residual"]
        out["monotonicity_violations"] = fr.monotonicity_violations()
        return out

    rows = _ordered_map(row, list(eps_list), workers)
    table = SweepTable("perturb", rows, {"c_T": base.speed, "alpha0": alpha0, "T": f.period})
    eps = table.column("param")
    pd = table.column("p_dev")
    ppd = table.column("pprime_dev")
    pos = eps > 0
    if np.count_nonzero(pos) >= 1:
        ratios = pd[pos] / eps[pos]
        table.fits["C1_empirical"] = float(np.max(ratios))
        table.fits["p_ratio_spread"] = float(np.max(ratios) / np.min(ratios))
    if np.count_nonzero(pos) >= 2:
        env = fit_sinh_envelope(eps[pos], ppd[pos])
        pred = env["C2"] * np.sinh(env["C3"] * eps[pos])
        env["validated"] = bool(np.all(ppd[pos] <= pred * (1 + envelope_tol)))
        env["max_excess"] = float(np.max(ppd[pos] / pred))
        env["tolerance"] = envelope_tol
        table.fits["sinh_envelope"] = env
    return table
