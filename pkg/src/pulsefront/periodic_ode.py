"""Scalar periodic ODE y' = f(t, y): flows, the period (Poincare) map, multipliers
and periodic equilibrium states with their principal eigenpairs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from . import _kernels
from .nonlinearity import TimePeriodicNonlinearity

log = logging.getLogger(__name__)

SUBSTEPS = 4096
ODE_TOL = 1e-10
ROOT_TOL = 1e-10
MARGIN = 1e-6
N_SEEDS = 201
MAX_REFINE = 5


class IntegrationError(RuntimeError):
    pass


def _rk4_numpy(f, y0, t0, h, n_steps, record):
    y = y0.astype(float).copy()
    z = np.zeros_like(y)
    ys = [y.copy()] if record else None
    zs = [z.copy()] if record else None
    for k in range(n_steps):
        t = t0 + k * h
        k1, l1 = f.eval(t, y), f.eval_du(t, y)
        u = y + 0.5 * h * k1
        k2, l2 = f.eval(t + 0.5 * h, u), f.eval_du(t + 0.5 * h, u)
        u = y + 0.5 * h * k2
        k3, l3 = f.eval(t + 0.5 * h, u), f.eval_du(t + 0.5 * h, u)
        u = y + h * k3
        k4, l4 = f.eval(t + h, u), f.eval_du(t + h, u)
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        z = z + h * (l1 + 2 * l2 + 2 * l3 + l4) / 6.0
        if record:
            ys.append(y.copy())
            zs.append(z.copy())
    if record:
        return y, z, np.array(ys), np.array(zs)
    return y, z, None, None


def _integrate_pair(f, y0, t0, t1, n_steps, record=False):
    """Two RK4 runs (n and n/2 steps) from the same data; returns fine run and error estimate."""
    h = (t1 - t0) / n_steps
    if f.is_polynomial:
        times = t0 + 0.5 * h * np.arange(2 * n_steps + 1)
        table = f.poly_table(times)
        rec = 1 if record else n_steps
        y, z, ys, zs = _kernels.rk4_poly(y0, table, h, n_steps, 1, rec)
        yc, zc, _, _ = _kernels.rk4_poly(y0, table, 2 * h, n_steps // 2, 2, n_steps // 2)
        if not record:
            ys = zs = None
    else:
        y, z, ys, zs = _rk4_numpy(f, y0, t0, h, n_steps, record)
        yc, zc, _, _ = _rk4_numpy(f, y0, t0, 2 * h, n_steps // 2, False)
    err = np.maximum(np.abs(y - yc), np.abs(z - zc)) / 15.0
    return y, z, err, ys, zs


@dataclass
class FlowResult:
    y: np.ndarray
    z: np.ndarray  # integral of f_u along the trajectory
    error: np.ndarray
    ok: np.ndarray
    n_steps: int
    ys: np.ndarray | None = None
    zs: np.ndarray | None = None


def flow_batch(f: TimePeriodicNonlinearity, alpha, t0: float, t1: float, substeps: int = SUBSTEPS,
               tol: float = ODE_TOL, record: bool = False) -> FlowResult:
    """Integrate a batch of initial values with step-doubling control.

    The base number of steps is ``substeps`` per period (at least 2, even); it is
    doubled until the Richardson estimate drops below ``tol`` or MAX_REFINE is hit.
    Seeds that stay above tolerance or go non-finite have ``ok = False``.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if t1 == t0:
        z = np.zeros_like(alpha)
        return FlowResult(alpha.copy(), z, z.copy(), np.ones(alpha.shape, bool), 0,
                          alpha[None].copy() if record else None, z[None].copy() if record else None)
    n = max(2, int(np.ceil(substeps * (t1 - t0) / f.period)))
    n += n % 2
    for _ in range(MAX_REFINE + 1):
        with np.errstate(all="ignore"):
            y, z, err, ys, zs = _integrate_pair(f, alpha, t0, t1, n, record)
        finite = np.isfinite(y) & np.isfinite(z)
        ok = finite & (err <= tol)
        if np.all(ok | ~finite):
            break
        n *= 2
    return FlowResult(y, z, err, ok, n, ys, zs)


def flow(f: TimePeriodicNonlinearity, alpha: float, t0: float, t1: float, **kw) -> float:
    """w(alpha, t1) for y' = f(t, y), y(t0) = alpha."""
    res = flow_batch(f, alpha, t0, t1, **kw)
    if not res.ok[0]:
        raise IntegrationError(f"flow from {alpha} failed: error estimate {res.error[0]:.3g}")
    return float(res.y[0])


def poincare(f: TimePeriodicNonlinearity, alpha: float, **kw) -> float:
    """P(alpha) = w(alpha, T)."""
    return flow(f, alpha, 0.0, f.period, **kw)


def poincare_derivative(f: TimePeriodicNonlinearity, alpha: float, **kw) -> float:
    """P'(alpha) = exp of the integral of f_u along the orbit over one period."""
    res = flow_batch(f, alpha, 0.0, f.period, **kw)
    if not res.ok[0]:
        raise IntegrationError(f"flow from {alpha} failed: error estimate {res.error[0]:.3g}")
    return float(np.exp(res.z[0]))


def poincare_batch(f: TimePeriodicNonlinearity, alpha, **kw):
    """Vectorised (P(alpha), P'(alpha), ok)."""
    res = flow_batch(f, alpha, 0.0, f.period, **kw)
    return res.y, np.exp(res.z), res.ok


def classify(multiplier: float, margin: float = MARGIN) -> str:
    if multiplier < 1.0 - margin:
        return "stable"
    if multiplier > 1.0 + margin:
        return "unstable"
    return "marginal"


@dataclass(frozen=True)
class FixedPoint:
    alpha: float
    multiplier: float
    classification: str

    def to_dict(self):
        return {"alpha": self.alpha, "multiplier": self.multiplier, "class": self.classification}


@dataclass
class PoincareReport:
    fixed_points: list[FixedPoint]
    scan_resolution: int
    failed_seeds: list[float] = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([p.alpha for p in self.fixed_points])

    def by_class(self, name: str) -> list[FixedPoint]:
        return [p for p in self.fixed_points if p.classification == name]

    def interior(self, classification: str | None = None) -> list[FixedPoint]:
        pts = [p for p in self.fixed_points if 0.0 < p.alpha < 1.0]
        if classification is not None:
            pts = [p for p in pts if p.classification == classification]
        return pts

    def has_bistable_structure(self) -> bool:
        """Exactly 0 (stable), one interior unstable point, 1 (stable)."""
        pts = self.fixed_points
        return (len(pts) == 3 and pts[0].alpha == 0.0 and pts[2].alpha == 1.0
                and [p.classification for p in pts] == ["stable", "unstable", "stable"])

    def to_json(self) -> dict:
        return {
            "fixed_points": [p.to_dict() for p in self.fixed_points],
            "seeds": self.scan_resolution,
            "failed_seeds": list(self.failed_seeds),
            "tolerances": dict(self.tolerances),
        }


def find_fixed_points(f: TimePeriodicNonlinearity, n_seeds: int = N_SEEDS, root_tol: float = ROOT_TOL,
                      margin: float = MARGIN, **kw) -> PoincareReport:
    """Scan P(alpha) - alpha on a uniform grid of [0, 1] and bisect every sign change."""
    if n_seeds < 3:
        raise ValueError("n_seeds must be >= 3")
    seeds = np.linspace(0.0, 1.0, n_seeds)
    p, _, ok = poincare_batch(f, seeds, **kw)
    phi = p - seeds
    failed = seeds[~ok].tolist()
    if failed:
        log.warning("skipping %d seeds with failed integration", len(failed))

    roots = list(seeds[ok & (np.abs(phi) <= root_tol)])
    good = np.nonzero(ok)[0]
    a_idx, b_idx = good[:-1], good[1:]
    change = np.sign(phi[a_idx]) * np.sign(phi[b_idx]) < 0
    a = seeds[a_idx[change]].copy()
    b = seeds[b_idx[change]].copy()
    fa = phi[a_idx[change]].copy()
    while a.size and np.max(b - a) > root_tol:
        mid = 0.5 * (a + b)
        pm, _, okm = poincare_batch(f, mid, **kw)
        if not np.all(okm):
            raise IntegrationError("integration failed during bisection")
        fm = pm - mid
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, mid, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, mid)
    roots.extend(0.5 * (a + b))
    roots.extend([0.0, 1.0])

    roots = np.sort(np.asarray(roots, dtype=float))
    keep = np.concatenate([[True], np.diff(roots) > 10 * root_tol])
    roots = roots[keep]
    _, mult, okr = poincare_batch(f, roots, **kw)
    points = [FixedPoint(float(r), float(m), classify(m, margin)) for r, m in zip(roots, mult)]
    tolerances = {"root": root_tol, "ode": kw.get("tol", ODE_TOL), "margin": margin,
                  "substeps": kw.get("substeps", SUBSTEPS)}
    return PoincareReport(points, n_seeds, failed, tolerances)


@dataclass
class EquilibriumState:
    """A T-periodic solution theta(t) with principal eigenvalue and eigenfunction."""

    period: float
    times: np.ndarray
    samples: np.ndarray
    eigenvalue: float
    eigenfunction_samples: np.ndarray

    @property
    def initial_value(self) -> float:
        return float(self.samples[0])

    def _spline(self, values):
        v = values.copy()
        v[-1] = v[0]
        return CubicSpline(self.times, v, bc_type="periodic")

    def theta(self, t):
        t = np.mod(np.asarray(t, dtype=float), self.period)
        return self._spline(self.samples)(t)

    def phi(self, t):
        t = np.mod(np.asarray(t, dtype=float), self.period)
        return self._spline(self.eigenfunction_samples)(t)

    def phi_max(self) -> float:
        return float(np.max(self.eigenfunction_samples))

    def phi_min(self) -> float:
        return float(np.min(self.eigenfunction_samples))


def equilibrium_from_fixed_point(f: TimePeriodicNonlinearity, alpha: float, substeps: int = SUBSTEPS,
                                 tol: float = ROOT_TOL, **kw) -> EquilibriumState:
    """Periodic orbit through alpha, lambda = -(1/T) int f_u(s, theta(s)) ds and
    Phi = exp(lambda t + int_0^t f_u), the solution of Phi' = (lambda + f_u) Phi, Phi(0) = 1."""
    T = f.period
    res = flow_batch(f, alpha, 0.0, T, substeps=substeps, record=True, **kw)
    if not res.ok[0]:
        raise IntegrationError(f"flow from {alpha} failed")
    if abs(res.y[0] - alpha) > tol:
        raise ValueError(f"alpha={alpha!r} is not a fixed point: |P(alpha)-alpha| = {abs(res.y[0] - alpha):.3g}")
    n = res.n_steps
    times = np.linspace(0.0, T, n + 1)
    theta = res.ys[:, 0]
    fu = np.broadcast_to(f.eval_du(times, theta), times.shape)
    lam = -float(integrate.simpson(fu, dx=T / n)) / T
    phi = np.exp(lam * times + res.zs[:, 0])
    return EquilibriumState(T, times, theta, lam, phi)
