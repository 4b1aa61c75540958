"""Time-periodic reaction terms f(t, u) and their homogeneous (time-free) parts.

Every nonlinearity built from the family constructors is *separable*: a finite sum
``sum_k m_k(t) * g_k(u)`` with periodic multipliers ``m_k`` and homogeneous parts
``g_k``.  When every ``g_k`` is a polynomial the whole reaction collapses, at each
fixed time, to a polynomial in ``u``; :meth:`TimePeriodicNonlinearity.poly_table`
exposes those coefficients so the compiled kernels in :mod:`pulsefront._kernels`
can evaluate f without calling back into Python.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate, optimize

SIMPSON_PANELS = 2048

ArrayFunc = Callable[..., np.ndarray]


def simpson_mean(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Mean over one period of samples taken on a uniform closed grid."""
    n = values.shape[axis] - 1
    return integrate.simpson(values, dx=1.0 / n, axis=axis)


@dataclass(frozen=True)
class HomogeneousNonlinearity:
    """A reaction term g(u) on [0, 1] with g(0) = g(1) = 0.

    ``coeffs`` (ascending powers) is set for polynomial g and enables the compiled
    kernels; ``known_zeros`` lists roots in [0, 1] when they are known exactly.
    """

    eval: ArrayFunc
    eval_du: ArrayFunc
    known_zeros: tuple[float, ...] | None = None
    coeffs: np.ndarray | None = None
    name: str = "custom"

    def __call__(self, u):
        return self.eval(u)

    @classmethod
    def polynomial(cls, coeffs: Sequence[float], known_zeros=None, name="polynomial"):
        c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        if c.size == 0:
            c = np.zeros(1)
        dc = npoly.polyder(c) if c.size > 1 else np.zeros(1)
        if abs(npoly.polyval(0.0, c)) > 1e-12 or abs(npoly.polyval(1.0, c)) > 1e-12:
            raise ValueError(f"{name}: g(0) and g(1) must vanish")
        return cls(
            eval=lambda u: npoly.polyval(u, c),
            eval_du=lambda u: npoly.polyval(u, dc),
            known_zeros=None if known_zeros is None else tuple(known_zeros),
            coeffs=c,
            name=name,
        )

    def interior_zeros(self, n_grid: int = 2001) -> list[float]:
        """Roots of g strictly inside (0, 1), located by sign changes on a grid."""
        if self.known_zeros is not None:
            return sorted(z for z in self.known_zeros if 0.0 < z < 1.0)
        u = np.linspace(0.0, 1.0, n_grid)[1:-1]
        g = self.eval(u)
        roots = []
        for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
            roots.append(optimize.brentq(self.eval, u[i], u[i + 1], xtol=1e-14))
        roots.extend(float(u[i]) for i in np.nonzero(g == 0.0)[0])
        return sorted(roots)

    def is_bistable(self, n_grid: int = 2001) -> bool:
        """g < 0 on (0, theta) and g > 0 on (theta, 1) for a single interior root."""
        zeros = self.interior_zeros(n_grid)
        if len(zeros) != 1:
            return False
        theta = zeros[0]
        u = np.linspace(0.0, 1.0, n_grid)[1:-1]
        g = self.eval(u)
        left = u < theta - 1e-9
        right = u > theta + 1e-9
        return bool(np.all(g[left] < 0) and np.all(g[right] > 0))


def cubic(theta: float) -> HomogeneousNonlinearity:
    """Nagumo cubic u(1 - u)(u - theta)."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta out of (0,1)")
    # u(1-u)(u-theta) = -theta u + (1+theta) u^2 - u^3
    return HomogeneousNonlinearity.polynomial(
        [0.0, -theta, 1.0 + theta, -1.0], known_zeros=(0.0, theta, 1.0), name=f"cubic({theta:g})"
    )


def logistic(rate: float = 1.0) -> HomogeneousNonlinearity:
    """KPP term rate * u(1 - u)."""
    return HomogeneousNonlinearity.polynomial([0.0, rate, -rate], known_zeros=(0.0, 1.0), name=f"logistic({rate:g})")


def zero_reaction() -> HomogeneousNonlinearity:
    return HomogeneousNonlinearity.polynomial([0.0], name="zero")


def reflect(g: HomogeneousNonlinearity) -> HomogeneousNonlinearity:
    """The reflected term u -> -g(1 - u); swaps the roles of the states 0 and 1."""
    zeros = None if g.known_zeros is None else tuple(sorted(1.0 - z for z in g.known_zeros))
    if g.coeffs is not None:
        # -g(1-u): compose with 1-u via polynomial substitution
        out = np.zeros(1)
        base = np.array([1.0, -1.0])
        power = np.array([1.0])
        for a in g.coeffs:
            out = npoly.polyadd(out, a * power)
            power = npoly.polymul(power, base)
        return HomogeneousNonlinearity.polynomial(-out, known_zeros=zeros, name=f"reflect({g.name})")
    return HomogeneousNonlinearity(
        eval=lambda u: -g.eval(1.0 - np.asarray(u)),
        eval_du=lambda u: g.eval_du(1.0 - np.asarray(u)),
        known_zeros=zeros,
        name=f"reflect({g.name})",
    )


@dataclass(frozen=True)
class PeriodicMultiplier:
    """A T-periodic scalar function of time, vectorised over ``t``."""

    func: ArrayFunc
    period: float
    name: str = "m"

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))

    def mean(self) -> float:
        s = np.linspace(0.0, self.period, 2 * SIMPSON_PANELS + 1)
        return float(simpson_mean(self(s)))

    def rescaled(self, T: float) -> "PeriodicMultiplier":
        """t -> m(t / T * period), a multiplier of period T."""
        scale = self.period / T
        f = self.func
        return PeriodicMultiplier(lambda t: f(np.asarray(t) * scale), T, self.name)


def constant(value: float, period: float = 1.0) -> PeriodicMultiplier:
    return PeriodicMultiplier(lambda t: np.full(np.shape(t), float(value)), period, f"{value:g}")


def sine(amplitude: float = 1.0, period: float = 1.0, phase: float = 0.0, offset: float = 0.0) -> PeriodicMultiplier:
    """offset + amplitude * sin(2 pi t / period + phase)."""
    w = 2.0 * np.pi / period
    return PeriodicMultiplier(
        lambda t: offset + amplitude * np.sin(w * t + phase),
        period,
        f"{offset:g}+{amplitude:g}sin(2pi t/{period:g}+{phase:g})",
    )


@dataclass(frozen=True)
class Term:
    multiplier: PeriodicMultiplier
    g: HomogeneousNonlinearity


@dataclass(frozen=True)
class TimePeriodicNonlinearity:
    """A reaction f(t, u), T-periodic in t, with f(t, 0) = f(t, 1) = 0.

    ``eval`` and ``eval_du`` accept numpy-broadcastable ``t`` and ``u``.  Outside
    [0, 1] the value is continued by the boundary tangents, f_u(t, 0) u below 0
    and f_u(t, 1) (u - 1) above 1, so transient overshoot in a solver never
    samples f off its domain.
    """

    period: float
    raw_eval: ArrayFunc
    raw_eval_du: ArrayFunc
    descriptor: dict[str, Any] = field(default_factory=dict)
    terms: tuple[Term, ...] | None = None

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")

    def eval(self, t, u):
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        inside = np.clip(u, 0.0, 1.0)
        val = self.raw_eval(t, inside)
        if np.any(u < 0.0) or np.any(u > 1.0):
            below = self.raw_eval_du(t, np.zeros_like(inside)) * u
            above = self.raw_eval_du(t, np.ones_like(inside)) * (u - 1.0)
            val = np.where(u < 0.0, below, np.where(u > 1.0, above, val))
        return val

    def eval_du(self, t, u):
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        return self.raw_eval_du(t, np.clip(u, 0.0, 1.0))

    __call__ = eval

    @property
    def is_polynomial(self) -> bool:
        return self.terms is not None and all(term.g.coeffs is not None for term in self.terms)

    def poly_table(self, times: np.ndarray) -> np.ndarray | None:
        """Coefficients A[n, j] with f(times[n], u) = sum_j A[n, j] u**j, or None."""
        if not self.is_polynomial:
            return None
        times = np.asarray(times, dtype=float)
        deg = max(term.g.coeffs.size for term in self.terms)
        table = np.zeros((times.size, max(deg, 2)))
        for term in self.terms:
            m = np.broadcast_to(term.multiplier(times), times.shape)
            table[:, : term.g.coeffs.size] += np.outer(m, term.g.coeffs)
        return table

    def sup_abs_du(self, n_t: int = 129, n_u: int = 201) -> float:
        t = np.linspace(0.0, self.period, n_t)[:, None]
        u = np.linspace(0.0, 1.0, n_u)[None, :]
        return float(np.max(np.abs(self.eval_du(t, u))))

    def is_autonomous(self) -> bool:
        return bool(self.descriptor.get("autonomous", False))


def _separable(terms: Sequence[Term], period: float, descriptor: dict) -> TimePeriodicNonlinearity:
    terms = tuple(terms)

    def f(t, u):
        return sum(term.multiplier(t) * term.g.eval(u) for term in terms)

    def fu(t, u):
        return sum(term.multiplier(t) * term.g.eval_du(u) for term in terms)

    return TimePeriodicNonlinearity(period, f, fu, descriptor, terms)


def make_product(m: PeriodicMultiplier, g: HomogeneousNonlinearity) -> TimePeriodicNonlinearity:
    """f(t, u) = m(t) g(u)."""
    desc = {"family": "product", "m": m.name, "g": g.name, "period": m.period}
    if m.name == "1" or m.name == "1.0":
        desc["autonomous"] = True
    return _separable([Term(m, g)], m.period, desc)


def autonomous(g: HomogeneousNonlinearity, period: float = 1.0) -> TimePeriodicNonlinearity:
    """Time-independent f(t, u) = g(u), given a nominal period for the period maps."""
    f = make_product(constant(1.0, period), g)
    f.descriptor["autonomous"] = True
    return f


def make_combination(m1: PeriodicMultiplier, g1: HomogeneousNonlinearity,
                     m2: PeriodicMultiplier, g2: HomogeneousNonlinearity) -> TimePeriodicNonlinearity:
    """f(t, u) = m1(t) g1(u) + m2(t) g2(u)."""
    if not np.isclose(m1.period, m2.period, rtol=1e-12, atol=0.0):
        raise ValueError(f"period mismatch: {m1.period} vs {m2.period}")
    desc = {"family": "combination", "m1": m1.name, "g1": g1.name, "m2": m2.name, "g2": g2.name,
            "period": m1.period}
    return _separable([Term(m1, g1), Term(m2, g2)], m1.period, desc)


def combination_example(theta: float = 0.3, period: float = 1.0, amplitude: float = 1.0,
                        phase: float = 0.0) -> TimePeriodicNonlinearity:
    """The mixed KPP/bistable family sin * u(1-u) + (1 - sin) * u(1-u)(u-theta)."""
    m1 = sine(amplitude, period, phase)
    m2 = sine(-amplitude, period, phase, offset=1.0)
    f = make_combination(m1, logistic(), m2, cubic(theta))
    f.descriptor.update(family="combination", theta=theta, amplitude=amplitude, phase=phase)
    return f


def custom(period: float, eval: ArrayFunc, eval_du: ArrayFunc, name: str = "custom",
           check: bool = True) -> TimePeriodicNonlinearity:
    """A user-supplied f; ``eval_du`` is mandatory, nothing is finite-differenced."""
    if eval_du is None:
        raise ValueError("custom nonlinearities must supply eval_du")
    f = TimePeriodicNonlinearity(period, eval, eval_du, {"family": "custom", "name": name, "period": period})
    if check:
        problems = validate(f)
        if problems:
            raise ValueError("; ".join(problems))
    return f


def rescale_period(f_unit: TimePeriodicNonlinearity, T: float) -> TimePeriodicNonlinearity:
    """f^T(t, u) = f_unit(t / T, u) for a period-1 ``f_unit``."""
    if not T > 0:
        raise ValueError("T must be positive")
    desc = dict(f_unit.descriptor, period=T)
    scale = f_unit.period / T
    if f_unit.terms is not None:
        terms = [Term(term.multiplier.rescaled(T), term.g) for term in f_unit.terms]
        return _separable(terms, T, desc)
    fe, fu = f_unit.raw_eval, f_unit.raw_eval_du
    return TimePeriodicNonlinearity(
        T, lambda t, u: fe(np.asarray(t) * scale, u), lambda t, u: fu(np.asarray(t) * scale, u), desc
    )


def add_term(f: TimePeriodicNonlinearity, m: PeriodicMultiplier, g: HomogeneousNonlinearity,
             descriptor: dict | None = None) -> TimePeriodicNonlinearity:
    """f + m(t) g(u), keeping the separable structure when f has one."""
    desc = dict(f.descriptor) if descriptor is None else descriptor
    if f.terms is not None:
        return _separable(list(f.terms) + [Term(m, g)], f.period, desc)
    fe, fu = f.raw_eval, f.raw_eval_du
    return TimePeriodicNonlinearity(
        f.period,
        lambda t, u: fe(t, u) + m(t) * g.eval(u),
        lambda t, u: fu(t, u) + m(t) * g.eval_du(u),
        desc,
    )


def negate_reflect(f: TimePeriodicNonlinearity) -> TimePeriodicNonlinearity:
    """(t, u) -> -f(t, 1 - u); a front of speed c maps to one of speed -c."""
    desc = dict(f.descriptor, reflected=True)
    if f.is_polynomial:
        return _separable([Term(term.multiplier, reflect(term.g)) for term in f.terms], f.period, desc)
    fe, fu = f.raw_eval, f.raw_eval_du
    return TimePeriodicNonlinearity(
        f.period, lambda t, u: -fe(t, 1.0 - np.asarray(u)), lambda t, u: fu(t, 1.0 - np.asarray(u)), desc
    )


def _period_grid(T: float) -> np.ndarray:
    return np.linspace(0.0, T, 2 * SIMPSON_PANELS + 1)


def averaged(f: TimePeriodicNonlinearity) -> HomogeneousNonlinearity:
    """g(u) = int_0^1 f(sT, u) ds by composite Simpson over one period."""
    if f.terms is not None:
        means = [term.multiplier.mean() for term in f.terms]
        if f.is_polynomial:
            deg = max(term.g.coeffs.size for term in f.terms)
            c = np.zeros(deg)
            for mu, term in zip(means, f.terms):
                c[: term.g.coeffs.size] += mu * term.g.coeffs
            c[np.abs(c) < 1e-15] = 0.0
            return HomogeneousNonlinearity.polynomial(c, name="averaged")
        terms = list(zip(means, f.terms))
        return HomogeneousNonlinearity(
            eval=lambda u: sum(mu * term.g.eval(u) for mu, term in terms),
            eval_du=lambda u: sum(mu * term.g.eval_du(u) for mu, term in terms),
            name="averaged",
        )
    s = _period_grid(f.period)

    def g(u):
        u = np.asarray(u, dtype=float)
        vals = f.raw_eval(s.reshape((-1,) + (1,) * u.ndim), u[None, ...])
        return simpson_mean(vals, axis=0)

    def gu(u):
        u = np.asarray(u, dtype=float)
        vals = f.raw_eval_du(s.reshape((-1,) + (1,) * u.ndim), u[None, ...])
        return simpson_mean(vals, axis=0)

    return HomogeneousNonlinearity(eval=g, eval_du=gu, name="averaged")


@dataclass(frozen=True)
class BistabilityReport:
    integral_at_0: float
    integral_at_1: float

    @property
    def is_bistable_on_average(self) -> bool:
        return self.integral_at_0 < 0.0 and self.integral_at_1 < 0.0


def check_bistable_on_average(f: TimePeriodicNonlinearity) -> BistabilityReport:
    """Period means of f_u(., 0) and f_u(., 1); both negative means bistable on average."""
    s = _period_grid(f.period)
    i0 = simpson_mean(np.broadcast_to(f.eval_du(s, 0.0), s.shape))
    i1 = simpson_mean(np.broadcast_to(f.eval_du(s, 1.0), s.shape))
    return BistabilityReport(float(i0), float(i1))


def validate(f: TimePeriodicNonlinearity, n_samples: int = 1000, seed: int = 0) -> list[str]:
    """Sampled checks of the structural invariants; returns a list of violations."""
    rng = np.random.default_rng(seed)
    T = f.period
    t = rng.uniform(-2 * T, 2 * T, n_samples)
    u = rng.uniform(0.0, 1.0, n_samples)
    problems = []
    if np.max(np.abs(f.eval(t, u) - f.eval(t + T, u))) > 1e-12 * max(1.0, np.max(np.abs(f.eval(t, u)))):
        problems.append("f is not T-periodic")
    if np.max(np.abs(f.eval(t, 0.0)) + np.abs(f.eval(t, 1.0))) > 1e-12:
        problems.append("f(t,0) and f(t,1) must vanish")
    h = 1e-6
    uu = np.clip(u, h, 1 - h)
    fd = (f.raw_eval(t, uu + h) - f.raw_eval(t, uu - h)) / (2 * h)
    if np.max(np.abs(fd - f.raw_eval_du(t, uu))) > 1e-6:
        problems.append("eval_du disagrees with a centred difference of eval")
    return problems
