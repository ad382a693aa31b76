"""Compiled Dormand-Prince 5(4) stepping loop.

The loop stores every accepted step as (t, y, f(t, y)); f comes for free from
the FSAL stage and feeds the Hermite dense output built in the integrator module.
"""

import math

import numpy as np
from numba import njit

# system kinds
CARTESIAN = 0  # y = (x, y, vx, vy);  p = (delta, c, alpha)
RADIAL = 1     # y = (r, rdot, theta); p = (delta, c, M)
SCALED = 2     # y = (rho, rhodot, theta), r = rho e^{-2 delta t}; p = (delta, c, M)

# exit status
TIME_REACHED = 0
COLLISION = 1
UNDERFLOW = 2
BUDGET = 3

A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9


@njit(cache=True)
def rhs(kind, t, y, p):
    out = np.empty_like(y)
    delta = p[0]
    c = p[1]
    if kind == CARTESIAN:
        x0 = y[0]
        x1 = y[1]
        r2 = x0 * x0 + x1 * x1
        g = c * math.exp(-p[2] * t) / (r2 * math.sqrt(r2))
        out[0] = y[2]
        out[1] = y[3]
        out[2] = -delta * y[2] - g * x0
        out[3] = -delta * y[3] - g * x1
    elif kind == RADIAL:
        r = y[0]
        L = p[2] * math.exp(-delta * t)
        out[0] = y[1]
        out[1] = L * L / (r * r * r) - c / (r * r) - delta * y[1]
        out[2] = L / (r * r)
    else:
        rho = y[0]
        e6 = math.exp(6.0 * delta * t)
        M = p[2]
        out[0] = y[1]
        out[1] = (3.0 * delta * y[1] - 2.0 * delta * delta * rho
                  + e6 * (M * M / (rho * rho * rho) - c / (rho * rho)))
        out[2] = M * math.exp(3.0 * delta * t) / (rho * rho)
    return out


@njit(cache=True)
def radius(kind, t, y, p):
    if kind == CARTESIAN:
        return math.sqrt(y[0] * y[0] + y[1] * y[1])
    elif kind == RADIAL:
        return y[0]
    return y[0] * math.exp(-2.0 * p[0] * t)


@njit(cache=True)
def _grow(a, n):
    shape = (n,) + a.shape[1:]
    b = np.empty(shape, dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def dopri5(kind, p, t0, y0, t_end, rtol, atol, h_init, h_min, h_max, max_steps,
           cap_fraction, r_min):
    """Integrate from t0 to t_end; returns (ts, ys, fs, n_stored, status, n_rejected)."""
    dim = y0.shape[0]
    cap0 = 64
    ts = np.empty(cap0)
    ys = np.empty((cap0, dim))
    fs = np.empty((cap0, dim))
    t = t0
    y = y0.copy()
    f = rhs(kind, t, y, p)
    ts[0] = t
    ys[0] = y
    fs[0] = f
    n = 1
    c = p[1]
    h = h_init
    err_old = 1e-4
    rejected = False
    n_rejected = 0
    n_steps = 0
    status = TIME_REACHED
    while True:
        if t >= t_end:
            status = TIME_REACHED
            break
        if n_steps >= max_steps:
            status = BUDGET
            break
        r = radius(kind, t, y, p)
        h = min(h, h_max, cap_fraction * r * math.sqrt(r) / math.sqrt(c))
        if h < h_min:
            status = UNDERFLOW
            break
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        k1 = f
        k2 = rhs(kind, t + C2 * h, y + h * (A21 * k1), p)
        k3 = rhs(kind, t + C3 * h, y + h * (A31 * k1 + A32 * k2), p)
        k4 = rhs(kind, t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3), p)
        k5 = rhs(kind, t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), p)
        k6 = rhs(kind, t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), p)
        y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        t_new = t_end if last else t + h
        k7 = rhs(kind, t_new, y_new, p)
        e = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        acc = 0.0
        finite = True
        for i in range(dim):
            sk = atol + rtol * max(abs(y[i]), abs(y_new[i]))
            q = e[i] / sk
            acc += q * q
            if not math.isfinite(y_new[i]):
                finite = False
        err = math.sqrt(acc / dim) if finite else math.inf
        n_steps += 1
        # PI controller (beta = 0.04, safety 0.9), step ratio kept in [0.1, 5]
        if err <= 1.0:
            fac11 = err ** 0.17
            fac = fac11 / err_old ** 0.04
            fac = max(0.2, min(10.0, fac / 0.9))
            h_next = h / fac
            if rejected:
                h_next = min(h_next, h)
            err_old = max(err, 1e-4)
            rejected = False
            t = t_new
            y = y_new
            f = k7
            if n == ts.shape[0]:
                ts = _grow(ts, 2 * n)
                ys = _grow(ys, 2 * n)
                fs = _grow(fs, 2 * n)
            ts[n] = t
            ys[n] = y
            fs[n] = f
            n += 1
            h = h_next
            if radius(kind, t, y, p) <= r_min:
                status = COLLISION
                break
        else:
            n_rejected += 1
            rejected = True
            if math.isfinite(err):
                h = h / min(10.0, err ** 0.2 / 0.9)
            else:
                h = h * 0.1
    return ts[:n].copy(), ys[:n].copy(), fs[:n].copy(), status, n_rejected
