"""Compiled inner loops.

The reaction enters every kernel as a coefficient table ``A[k, j]`` so that
``f(t_k, u) = sum_j A[k, j] u**j``; see ``TimePeriodicNonlinearity.poly_table``.
Values outside [0, 1] use the boundary tangents, matching the Python evaluator.
"""

import numpy as np
from numba import njit

OK = 0
OVERSHOOT = 1
NONFINITE = 2


@njit(cache=True, nogil=True, inline="always", error_model="numpy")
def _poly_f(a, u):
    m = a.shape[0]
    if u < 0.0:
        return a[1] * u
    if u > 1.0:
        d = 0.0
        for j in range(1, m):
            d += j * a[j]
        return d * (u - 1.0)
    acc = a[m - 1]
    for j in range(m - 2, -1, -1):
        acc = acc * u + a[j]
    return acc


@njit(cache=True, nogil=True, inline="always", error_model="numpy")
def _poly_fu(a, u):
    m = a.shape[0]
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    acc = (m - 1) * a[m - 1]
    for j in range(m - 2, 0, -1):
        acc = acc * u + j * a[j]
    return acc


@njit(cache=True, nogil=True, error_model="numpy")
def poly_eval(table, u):
    """f and f_u at (t_k, u[k, i]) for diagnostics and tests."""
    out = np.empty_like(u)
    dout = np.empty_like(u)
    for k in range(u.shape[0]):
        for i in range(u.shape[1]):
            out[k, i] = _poly_f(table[k], u[k, i])
            dout[k, i] = _poly_fu(table[k], u[k, i])
    return out, dout


@njit(cache=True, nogil=True, error_model="numpy")
def rk4_poly(y0, table, h, n_steps, stride, record_stride):
    """Classical RK4 for y' = f(t, y), z' = f_u(t, y) on a batch of seeds.

    ``table`` holds coefficients at the half-step times of the finest grid; a run
    with step ``h`` reads every ``stride``-th row (``stride`` = rows per half step).
    Returns final (y, z) and, every ``record_stride`` steps, the recorded y and z.
    """
    ns = y0.size
    y = y0.copy()
    z = np.zeros(ns)
    n_rec = n_steps // record_stride + 1
    ys = np.empty((n_rec, ns))
    zs = np.empty((n_rec, ns))
    ys[0] = y
    zs[0] = z
    half = 0.5 * h
    for k in range(n_steps):
        a0 = table[2 * k * stride]
        a1 = table[(2 * k + 1) * stride]
        a2 = table[(2 * k + 2) * stride]
        for s in range(ns):
            u = y[s]
            k1 = _poly_f(a0, u)
            l1 = _poly_fu(a0, u)
            u2 = u + half * k1
            k2 = _poly_f(a1, u2)
            l2 = _poly_fu(a1, u2)
            u3 = u + half * k2
            k3 = _poly_f(a1, u3)
            l3 = _poly_fu(a1, u3)
            u4 = u + h * k3
            k4 = _poly_f(a2, u4)
            l4 = _poly_fu(a2, u4)
            y[s] = u + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            z[s] += h * (l1 + 2.0 * l2 + 2.0 * l3 + l4) / 6.0
        if (k + 1) % record_stride == 0:
            r = (k + 1) // record_stride
            ys[r] = y
            zs[r] = z
    return y, z, ys, zs


@njit(cache=True, nogil=True, error_model="numpy")
def cn_factor(n, lo, di, up):
    """Forward-elimination factors of the constant tridiagonal matrix on n unknowns."""
    cp = np.empty(n)
    inv = np.empty(n)
    inv[0] = 1.0 / di
    cp[0] = up * inv[0]
    for i in range(1, n):
        m = di - lo * cp[i - 1]
        inv[i] = 1.0 / m
        cp[i] = up * inv[i]
    return cp, inv


@njit(cache=True, nogil=True, error_model="numpy")
def thomas_solve(lo, cp, inv, rhs, out):
    """Solve with precomputed factors; ``rhs`` is overwritten."""
    n = rhs.size
    rhs[0] = rhs[0] * inv[0]
    for i in range(1, n):
        rhs[i] = (rhs[i] - lo * rhs[i - 1]) * inv[i]
    out[n - 1] = rhs[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = rhs[i] - cp[i] * out[i + 1]


@njit(cache=True, nogil=True, error_model="numpy")
def cn_steps_poly(v, table, left, right, coef, cp, inv, dt, n_steps,
                  slices, slice_stride, phase, lower, upper, order):
    """Advance ``v`` in place by ``n_steps`` IMEX Crank-Nicolson steps.

    ``coef`` = (lo, di, up, r_lo, r_di, r_up): implicit and explicit stencils.
    ``table`` has n_steps + 1 rows (reaction at every step time, both ends);
    ``left[k]``, ``right[k]`` are Dirichlet values at step time k.  With order 1
    the reaction is f(t_k, v_k); with order 2 a predictor step gives v* and the
    reaction is (f(t_k, v_k) + f(t_{k+1}, v*)) / 2.  Every ``slice_stride`` steps
    (counted from ``phase`` steps before the first one) the state is copied to
    the next row of ``slices`` (a (0, n) array skips this).  Returns (status, steps).
    """
    n = v.size
    m = n - 2
    lo = coef[0]
    up = coef[2]
    r_lo = coef[3]
    r_di = coef[4]
    r_up = coef[5]
    base = np.empty(m)
    fk = np.empty(m)
    rhs = np.empty(m)
    new = np.empty(m)
    n_slices = slices.shape[0]
    j = 0
    for k in range(n_steps):
        a = table[k]
        lk = left[k + 1]
        rk = right[k + 1]
        for i in range(m):
            u = v[i + 1]
            base[i] = r_lo * v[i] + r_di * u + r_up * v[i + 2]
            fk[i] = _poly_f(a, u)
            rhs[i] = base[i] + dt * fk[i]
        base[0] -= lo * lk
        base[m - 1] -= up * rk
        rhs[0] -= lo * lk
        rhs[m - 1] -= up * rk
        thomas_solve(lo, cp, inv, rhs, new)
        if order == 2:
            b = table[k + 1]
            for i in range(m):
                rhs[i] = base[i] + 0.5 * dt * (fk[i] + _poly_f(b, new[i]))
            thomas_solve(lo, cp, inv, rhs, new)
        v[0] = lk
        v[n - 1] = rk
        bad = False
        for i in range(m):
            x = new[i]
            if not (x >= lower and x <= upper):
                bad = True
            v[i + 1] = x
        if bad:
            for i in range(m):
                if not np.isfinite(new[i]):
                    return NONFINITE, k + 1
            return OVERSHOOT, k + 1
        if n_slices > 0 and (phase + k + 1) % slice_stride == 0 and j < n_slices:
            slices[j] = v
            j += 1
    return OK, n_steps


@njit(cache=True, nogil=True, error_model="numpy")
def cn_solve(v, react, left_new, right_new, coef, cp, inv, out):
    """One linear CN solve: out = (I - dt/2 L)^{-1} [(I + dt/2 L) v + react] with
    Dirichlet values at the new time; ``react`` already includes the factor dt."""
    n = v.size
    m = n - 2
    lo = coef[0]
    up = coef[2]
    rhs = np.empty(m)
    new = np.empty(m)
    for i in range(m):
        rhs[i] = coef[3] * v[i] + coef[4] * v[i + 1] + coef[5] * v[i + 2] + react[i]
    rhs[0] -= lo * left_new
    rhs[m - 1] -= up * right_new
    thomas_solve(lo, cp, inv, rhs, new)
    out[0] = left_new
    out[n - 1] = right_new
    out[1:n - 1] = new
