"""Compiled kernels: field evaluation and the DOP853 integrator.

The field is described by a flat float64 parameter vector so that numba can
specialise once for every family.  Layout (``P``)::

    P[0]  kind (0 = torus family, 1 = constant field)
    kind 1: P[1] = constant value of f
    kind 0: P[1] c, P[2] skew, P[3] baseline, P[4] core_lo, P[5] core_hi,
            P[6] clamp width, P[7] s_min, P[8] n_minus, P[9] n_plus,
            then (A, B, V, shoulder) records, minus branch first.

Integration modes (state layout):

    MODE_DIRECT  [x, L]         x' = f/eps, L' = f_x/eps
    MODE_REL     [xr, u, L]     reference orbit xr plus a deviation
                                delta = sgn*exp(u) carried in log form
    MODE_EPS     [x, L, x_eps]  adds the sensitivity dx/deps
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

from .ddarith import quick_two_sum, two_sum

KIND_FAMILY = 0
KIND_CONST = 1

MODE_DIRECT = 0
MODE_REL = 1
MODE_EPS = 2

STATUS_OK = 0
STATUS_MAX_STEPS = 1
STATUS_STEP_UNDERFLOW = 2
STATUS_NONFINITE = 3

HDR = 10  # parameter header length for family kind

_A = np.ascontiguousarray(_dop.A, dtype=np.float64)
_B = np.ascontiguousarray(_dop.B, dtype=np.float64)
_C = np.ascontiguousarray(_dop.C, dtype=np.float64)
_E3 = np.ascontiguousarray(_dop.E3, dtype=np.float64)
_E5 = np.ascontiguousarray(_dop.E5, dtype=np.float64)
_D = np.ascontiguousarray(_dop.D, dtype=np.float64)

TWO_PI = 2.0 * math.pi
COS1 = math.cos(1.0)


@njit(cache=True)
def smooth5(t):
    """Quintic smoothstep clamped to [0, 1]; returns (S, S', S'')."""
    if t <= 0.0:
        return 0.0, 0.0, 0.0
    if t >= 1.0:
        return 1.0, 0.0, 0.0
    t2 = t * t
    s = t2 * t * (10.0 - 15.0 * t + 6.0 * t2)
    s1 = 30.0 * t2 * (1.0 - t) * (1.0 - t)
    s2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    return s, s1, s2


@njit(cache=True)
def _smooth_int(t):
    # integral of (1 - S) over [0, t], saturating at 1/2
    if t >= 1.0:
        return 0.5
    t4 = t * t * t * t
    return t - (t4 * t * t - 3.0 * t4 * t + 2.5 * t4)


@njit(cache=True)
def reduce_y(y):
    return y - TWO_PI * math.floor((y + math.pi) / TWO_PI)


@njit(cache=True)
def curve_a(c, skew, y):
    cy = math.cos(y)
    sy = math.sin(y)
    g = cy - COS1
    h = 1.0 + skew * sy
    a = 1.0 - c * g * h
    da = -c * (-sy * h + g * skew * cy)
    return a, da


@njit(cache=True)
def smooth_clamp(lo, hi, w, y):
    """C^3 clamp of y onto the core: identity on [lo, hi], constant beyond lo - w, hi + w."""
    if y < lo:
        t = (lo - y) / w
        s, _, _ = smooth5(t)
        return lo - w * _smooth_int(t), 1.0 - s
    if y > hi:
        t = (y - hi) / w
        s, _, _ = smooth5(t)
        return hi + w * _smooth_int(t), 1.0 - s
    return y, 1.0


@njit(cache=True)
def magnitude(P, off, n, base, y):
    """|lambda| on the core for one branch and its y-derivative."""
    for k in range(n):
        j = off + 4 * k
        A = P[j]
        B = P[j + 1]
        V = P[j + 2]
        sh = P[j + 3]
        if y <= A - sh or y >= B + sh:
            continue
        if y < A:
            s, s1, _ = smooth5((y - (A - sh)) / sh)
            return base + (V - base) * s, (V - base) * s1 / sh
        if y > B:
            s, s1, _ = smooth5((B + sh - y) / sh)
            return base + (V - base) * s, -(V - base) * s1 / sh
        return V, 0.0
    return base, 0.0


@njit(cache=True)
def baseline_amplitude(P, y):
    """Amplitude realising the baseline slope on the slow curve, frozen outside the core."""
    cc, dc = smooth_clamp(P[4], P[5], P[6], y)
    a, da = curve_a(P[1], P[2], cc)
    q = 1.0 - a * a
    lb = P[3] / math.sqrt(q)
    dlb = P[3] * a * da * dc / (q * math.sqrt(q))
    return lb, dlb


@njit(cache=True)
def field_all(P, x, y):
    """Return f, f_x, f_xx, f_y at (x, y)."""
    if P[0] == KIND_CONST:
        return P[1], 0.0, 0.0, 0.0
    yr = reduce_y(y)
    base = P[3]
    smin = P[7]
    nm = int(P[8])
    np_ = int(P[9])
    a, da = curve_a(P[1], P[2], yr)
    lb, dlb = baseline_amplitude(P, yr)
    mm, dmm = magnitude(P, HDR, nm, base, yr)
    mp, dmp = magnitude(P, HDR + 4 * nm, np_, base, yr)
    sx = math.sin(x)
    cx = math.cos(x)
    km = mm / base - 1.0
    kp = mp / base - 1.0
    sm, sm1, sm2 = smooth5(sx / smin)
    sp, sp1, sp2 = smooth5(-sx / smin)
    cr = cx / smin
    rho = 1.0 + sp * kp + sm * km
    rho_x = -sp1 * cr * kp + sm1 * cr * km
    rho_xx = (sp2 * cr * cr + sp1 * sx / smin) * kp + (sm2 * cr * cr - sm1 * sx / smin) * km
    rho_y = (sp * dmp + sm * dmm) / base
    lam = lb * rho
    lx = lb * rho_x
    lxx = lb * rho_xx
    ly = dlb * rho + lb * rho_y
    g = cx - a
    f = lam * g
    fx = lx * g - lam * sx
    fxx = lxx * g - 2.0 * lx * sx - lam * cx
    fy = ly * g - lam * da
    return f, fx, fxx, fy


@njit(cache=True)
def _smooth_divdiff(t1, t2):
    # (S(t2) - S(t1)) / (t2 - t1) without cancellation
    if t1 == t2:
        _, s1, _ = smooth5(t1)
        return s1
    if 0.0 < t1 < 1.0 and 0.0 < t2 < 1.0:
        q3 = t1 * t1 + t1 * t2 + t2 * t2
        q4 = (t1 + t2) * (t1 * t1 + t2 * t2)
        q5 = t1 ** 4 + t1 ** 3 * t2 + t1 * t1 * t2 * t2 + t1 * t2 ** 3 + t2 ** 4
        return 10.0 * q3 - 15.0 * q4 + 6.0 * q5
    s2, _, _ = smooth5(t2)
    s1, _, _ = smooth5(t1)
    return (s2 - s1) / (t2 - t1)


@njit(cache=True)
def diff_quotient(P, x1, d, y):
    """(f(x1 + d, y) - f(x1, y)) / d evaluated without cancellation."""
    if P[0] == KIND_CONST:
        return 0.0
    if d == 0.0:
        return field_all(P, x1, y)[1]
    yr = reduce_y(y)
    base = P[3]
    smin = P[7]
    nm = int(P[8])
    np_ = int(P[9])
    a, _ = curve_a(P[1], P[2], yr)
    lb, _ = baseline_amplitude(P, yr)
    mm, _ = magnitude(P, HDR, nm, base, yr)
    mp, _ = magnitude(P, HDR + 4 * nm, np_, base, yr)
    km = mm / base - 1.0
    kp = mp / base - 1.0
    x2 = x1 + d
    mid = x1 + 0.5 * d
    hd = 0.5 * d
    if abs(hd) < 1e-4:
        sinc = 1.0 - hd * hd / 6.0
    else:
        sinc = math.sin(hd) / hd
    dcos = -math.sin(mid) * sinc  # (cos x2 - cos x1) / d
    dsin = math.cos(mid) * sinc  # (sin x2 - sin x1) / d
    s1 = math.sin(x1)
    s2 = math.sin(x2)
    # phi_minus = S(sin x / smin), phi_plus = S(-sin x / smin)
    dphim = _smooth_divdiff(s1 / smin, s2 / smin) * dsin / smin
    dphip = -_smooth_divdiff(-s1 / smin, -s2 / smin) * dsin / smin
    sm2, _, _ = smooth5(s2 / smin)
    sp2, _, _ = smooth5(-s2 / smin)
    lam2 = lb * (1.0 + sp2 * kp + sm2 * km)
    return lam2 * dcos + lb * (kp * dphip + km * dphim) * (math.cos(x1) - a)


@njit(cache=True)
def rhs(P, mode, eps, sgn, t, Y, out):
    if mode == MODE_REL:
        xr = Y[0]
        d = sgn * math.exp(Y[1])
        f, fx, fxx, _ = field_all(P, xr, t)
        dq = diff_quotient(P, xr, d, t)
        if abs(d) < 1e-7:
            fx2 = fx + fxx * d
        else:
            fx2 = field_all(P, xr + d, t)[1]
        out[0] = f / eps
        out[1] = dq / eps
        out[2] = fx2 / eps
        return
    f, fx, _, _ = field_all(P, Y[0], t)
    out[0] = f / eps
    out[1] = fx / eps
    if mode == MODE_EPS:
        out[2] = (fx * Y[2] - f / eps) / eps


@njit(cache=True)
def _dense_eval(F, yold, x, comp):
    v = 0.0
    for i in range(F.shape[0]):
        v += F[F.shape[0] - 1 - i, comp]
        if i % 2 == 0:
            v *= x
        else:
            v *= 1.0 - x
    return v + yold[comp]


@njit(cache=True)
def integrate(P, mode, eps, sgn, t0, t1, Y0, rtol, atol, max_steps, hmax, h0,
              compensated, ev_buf, path_buf):
    """Adaptive DOP853 from t0 to t1 (either direction).

    ``ev_buf`` (m x 3) receives crossings of component 0 through multiples
    of pi as (t, k, direction); ``path_buf`` (m x 3) receives (t, Y0, Y1) at
    accepted steps.  Buffers with zero rows disable recording.

    Returns (Y, t, status, steps, h_abs, n_events, n_path).
    """
    n = Y0.shape[0]
    direction = 1.0 if t1 > t0 else -1.0
    Y = Y0.copy()
    Ylo = np.zeros(n)
    t = t0
    K = np.empty((16, n))
    tmp = np.empty(n)
    Ynew = np.empty(n)
    incr = np.empty(n)
    F = np.empty((7, n))
    fcur = np.empty(n)
    rhs(P, mode, eps, sgn, t, Y, fcur)
    n_ev = 0
    n_path = 0
    ev_max = ev_buf.shape[0]
    path_max = path_buf.shape[0]
    if path_max > 0:
        path_buf[0, 0] = t
        path_buf[0, 1] = Y[0]
        path_buf[0, 2] = Y[1]
        n_path = 1
    if h0 > 0.0:
        h_abs = h0
    else:
        h_abs = 1e-3 * eps
    steps = 0
    status = STATUS_OK
    if t0 == t1:
        return Y, t, status, steps, h_abs, n_ev, n_path
    while True:
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        min_step = 10.0 * abs(t) * 2.220446049250313e-16 + 1e-300
        if h_abs > hmax:
            h_abs = hmax
        accepted = False
        rejected = False
        nonfinite = False
        h = 0.0
        t_new = t
        while not accepted:
            if h_abs < min_step:
                status = STATUS_NONFINITE if nonfinite else STATUS_STEP_UNDERFLOW
                return Y, t, status, steps, h_abs, n_ev, n_path
            h = h_abs * direction
            t_new = t + h
            if direction * (t_new - t1) > 0.0:
                t_new = t1
            h = t_new - t
            h_abs = abs(h)
            for i in range(n):
                K[0, i] = fcur[i]
            for s in range(1, 12):
                for i in range(n):
                    acc = 0.0
                    for j in range(s):
                        acc += _A[s, j] * K[j, i]
                    tmp[i] = Y[i] + h * acc
                rhs(P, mode, eps, sgn, t + _C[s] * h, tmp, K[s])
            for i in range(n):
                acc = 0.0
                for j in range(12):
                    acc += _B[j] * K[j, i]
                incr[i] = h * acc
                Ynew[i] = Y[i] + incr[i]
            rhs(P, mode, eps, sgn, t_new, Ynew, K[12])
            finite = True
            for i in range(n):
                if not (math.isfinite(Ynew[i]) and math.isfinite(K[12, i])):
                    finite = False
            if not finite:
                # trial stages may overshoot; retry with a smaller step
                nonfinite = True
                h_abs *= 0.2
                rejected = True
                continue
            e5 = 0.0
            e3 = 0.0
            for i in range(n):
                sc = max(abs(Y[i]), abs(Ynew[i]))
                if sc > TWO_PI:
                    sc = TWO_PI
                sc = atol + rtol * sc
                a5 = 0.0
                a3 = 0.0
                for j in range(13):
                    a5 += _E5[j] * K[j, i]
                    a3 += _E3[j] * K[j, i]
                a5 /= sc
                a3 /= sc
                e5 += a5 * a5
                e3 += a3 * a3
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = h_abs * e5 / math.sqrt((e5 + 0.01 * e3) * n)
            if err < 1.0:
                if err == 0.0:
                    factor = 10.0
                else:
                    factor = min(10.0, 0.9 * err ** (-1.0 / 8.0))
                if rejected:
                    factor = min(1.0, factor)
                h_abs *= factor
                accepted = True
            else:
                h_abs *= max(0.2, 0.9 * err ** (-1.0 / 8.0))
                rejected = True

        if ev_max > 0:
            xo = Y[0]
            xn = Ynew[0]
            lo_x = min(xo, xn)
            hi_x = max(xo, xn)
            k_lo = math.ceil(lo_x / math.pi)
            k_hi = math.floor(hi_x / math.pi)
            if k_hi >= k_lo:
                for s in range(13, 16):
                    for i in range(n):
                        acc = 0.0
                        for j in range(s):
                            acc += _A[s, j] * K[j, i]
                        tmp[i] = Y[i] + h * acc
                    rhs(P, mode, eps, sgn, t + _C[s] * h, tmp, K[s])
                for i in range(n):
                    dy = Ynew[i] - Y[i]
                    F[0, i] = dy
                    F[1, i] = h * K[0, i] - dy
                    F[2, i] = 2.0 * dy - h * (K[12, i] + K[0, i])
                    for r in range(4):
                        acc = 0.0
                        for j in range(16):
                            acc += _D[r, j] * K[j, i]
                        F[3 + r, i] = h * acc
                up = xn > xo
                for k in range(int(k_lo), int(k_hi) + 1):
                    target = k * math.pi
                    # half-open convention: count x_old < target <= x_new
                    if up and not (xo < target <= xn):
                        continue
                    if (not up) and not (xn <= target < xo):
                        continue
                    a_ = 0.0
                    b_ = 1.0
                    for _ in range(80):
                        m_ = 0.5 * (a_ + b_)
                        v = _dense_eval(F, Y, m_, 0) - target
                        if (v < 0.0) == up:
                            a_ = m_
                        else:
                            b_ = m_
                        if (b_ - a_) * h_abs < 1e-13:
                            break
                    if n_ev < ev_max:
                        ev_buf[n_ev, 0] = t + 0.5 * (a_ + b_) * h
                        ev_buf[n_ev, 1] = k
                        ev_buf[n_ev, 2] = 1.0 if up else -1.0
                    n_ev += 1

        if compensated:
            for i in range(n):
                s_, e_ = two_sum(Y[i], incr[i])
                e_ += Ylo[i]
                Y[i], Ylo[i] = quick_two_sum(s_, e_)
        else:
            for i in range(n):
                Y[i] = Ynew[i]
        t = t_new
        for i in range(n):
            fcur[i] = K[12, i]
        steps += 1
        if path_max > 0 and n_path < path_max:
            path_buf[n_path, 0] = t
            path_buf[n_path, 1] = Y[0]
            path_buf[n_path, 2] = Y[1]
            n_path += 1
        if t == t1:
            break
    return Y, t, status, steps, h_abs, n_ev, n_path


@njit(cache=True)
def field_grid(P, xs, ys):
    """Vectorised field evaluation for numpy callers: rows (f, fx, fxx, fy)."""
    out = np.empty((4, xs.shape[0]))
    for i in range(xs.shape[0]):
        f, fx, fxx, fy = field_all(P, xs[i], ys[i])
        out[0, i] = f
        out[1, i] = fx
        out[2, i] = fxx
        out[3, i] = fy
    return out


@njit(cache=True)
def profile_values(P, branch, ys):
    """|lambda| core magnitude (no taper) for branch -1 (minus) / +1 (plus)."""
    nm = int(P[8])
    if branch < 0:
        off = HDR
        n = nm
    else:
        off = HDR + 4 * nm
        n = int(P[9])
    out = np.empty(ys.shape[0])
    for i in range(ys.shape[0]):
        out[i] = magnitude(P, off, n, P[3], ys[i])[0]
    return out
