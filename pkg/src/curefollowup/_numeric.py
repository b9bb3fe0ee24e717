"""Compiled inner loops.

Everything here works on plain float64/bool arrays so the same code serves the
public API and the bootstrap hot path. Inputs are assumed validated by callers.
"""

import numpy as np
from numba import njit

_TW = 35.0 / 32.0


@njit(cache=True)
def tw_m0(s):
    """int_{-1}^{s} k(v) dv for the tri-weight kernel."""
    s2 = s * s
    return _TW * (s * (1.0 - s2 + 0.6 * s2 * s2 - s2 * s2 * s2 / 7.0) + 16.0 / 35.0)


@njit(cache=True)
def tw_m1(s):
    """int_{-1}^{s} v k(v) dv."""
    s2 = s * s
    return _TW * (s2 * (0.5 - 0.75 * s2 + 0.5 * s2 * s2 - 0.125 * s2 * s2 * s2) - 0.125)


@njit(cache=True)
def tw_m2(s):
    """int_{-1}^{s} v^2 k(v) dv."""
    s2 = s * s
    s3 = s2 * s
    return _TW * (
        s3 * (1.0 / 3.0 - 0.6 * s2 + 3.0 * s2 * s2 / 7.0 - s2 * s2 * s2 / 9.0)
        + 16.0 / 315.0
    )


@njit(cache=True)
def coeffs(s):
    m0 = tw_m0(s)
    m1 = tw_m1(s)
    m2 = tw_m2(s)
    det = m0 * m2 - m1 * m1
    return m2 / det, -m1 / det


@njit(cache=True)
def km_steps(ts, ev, censoring):
    """Product-limit jumps for time-sorted data.

    Returns (jump_times, cdf_values). With ``censoring`` the roles of events
    and censorings are swapped and events at a tied time leave the risk set
    first.
    """
    n = ts.shape[0]
    out_t = np.empty(n)
    out_v = np.empty(n)
    m = 0
    surv = 1.0
    i = 0
    while i < n:
        t = ts[i]
        j = i
        d1 = 0
        d0 = 0
        while j < n and ts[j] == t:
            if ev[j]:
                d1 += 1
            else:
                d0 += 1
            j += 1
        at_risk = n - i
        if censoring:
            d = d0
            r = at_risk - d1
        else:
            d = d1
            r = at_risk
        if d > 0:
            surv *= 1.0 - d / r
            out_t[m] = t
            out_v[m] = 1.0 - surv
            m += 1
        i = j
    return out_t[:m].copy(), out_v[:m].copy()


@njit(cache=True)
def upper_hull(x, y):
    """Indices of the upper convex hull of points with strictly increasing x.

    Collinear interior points are dropped.
    """
    n = x.shape[0]
    h = np.empty(n, np.int64)
    k = 0
    for i in range(n):
        while k >= 2:
            o = h[k - 2]
            a = h[k - 1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross >= 0.0:
                k -= 1
            else:
                break
        h[k] = i
        k += 1
    return h[:k].copy()


@njit(cache=True)
def step_value(jt, jv, t):
    idx = np.searchsorted(jt, t, side="right")
    if idx == 0:
        return 0.0
    return jv[idx - 1]


@njit(cache=True)
def majorant_points(jt, jv, a, y):
    """Anchor points of the KME graph on [a, y]: (a, F(a)), jumps in (a, y], (y, F(y))."""
    start = np.searchsorted(jt, a, side="right")
    stop = np.searchsorted(jt, y, side="right")
    m = stop - start
    px = np.empty(m + 2)
    py = np.empty(m + 2)
    px[0] = a
    py[0] = step_value(jt, jv, a)
    k = 1
    for i in range(start, stop):
        px[k] = jt[i]
        py[k] = jv[i]
        k += 1
    if px[k - 1] < y:
        px[k] = y
        py[k] = py[k - 1]
        k += 1
    return px[:k].copy(), py[:k].copy()


@njit(cache=True)
def grenander_from_steps(jt, jv, a, y):
    px, py = majorant_points(jt, jv, a, y)
    idx = upper_hull(px, py)
    knots = px[idx]
    heights = py[idx]
    slopes = np.diff(heights) / np.diff(knots)
    return knots, heights, slopes


@njit(cache=True)
def _antideriv(v, phi, psi_signed):
    if v < -1.0:
        v = -1.0
    elif v > 1.0:
        v = 1.0
    return phi * tw_m0(v) + psi_signed * tw_m1(v)


@njit(cache=True)
def smoothed_at(knots, slopes, t, b, a, y):
    """Boundary-corrected kernel smoothing of a step density, in closed form."""
    dl = t - a
    dr = y - t
    if dl < b and dl <= dr:
        phi, psi = coeffs(dl / b)
        psi_signed = psi
    elif dr < b:
        phi, psi = coeffs(dr / b)
        psi_signed = -psi
    else:
        phi = 1.0
        psi_signed = 0.0
    lo = max(a, t - b)
    hi = min(t + b, y)
    m = knots.shape[0]
    j = np.searchsorted(knots, lo, side="right") - 1
    if j < 0:
        j = 0
    total = 0.0
    while j < m - 1 and knots[j] < hi:
        u1 = max(knots[j], lo)
        u2 = min(knots[j + 1], hi)
        if u2 > u1:
            vb = (t - u1) / b
            va = (t - u2) / b
            total += slopes[j] * (
                _antideriv(vb, phi, psi_signed) - _antideriv(va, phi, psi_signed)
            )
        j += 1
    return total


@njit(cache=True)
def smoothed_many(knots, slopes, ts, b, a, y):
    out = np.empty(ts.shape[0])
    for i in range(ts.shape[0]):
        out[i] = smoothed_at(knots, slopes, ts[i], b, a, y)
    return out


@njit(cache=True)
def clipped_cdf_grid(knots, slopes, b, a, y, grid_size, panels):
    """Cumulative integral of max(smoothed density, 0) on an equispaced grid.

    Each grid cell is integrated with composite Simpson over ``panels``
    sub-panels.
    """
    h = (y - a) / grid_size
    hp = h / panels
    cdf = np.zeros(grid_size + 1)
    left = max(smoothed_at(knots, slopes, a, b, a, y), 0.0)
    acc = 0.0
    for i in range(grid_size):
        x0 = a + i * h
        cell = 0.0
        for p in range(panels):
            xl = x0 + p * hp
            xm = xl + 0.5 * hp
            xr = xl + hp
            if i == grid_size - 1 and p == panels - 1:
                xr = y
            fm = max(smoothed_at(knots, slopes, xm, b, a, y), 0.0)
            fr = max(smoothed_at(knots, slopes, xr, b, a, y), 0.0)
            cell += hp * (left + 4.0 * fm + fr) / 6.0
            left = fr
        acc += cell
        cdf[i + 1] = acc
    return cdf


@njit(cache=True)
def draw_event(u, fjt, fval, f_at_a, a, cdf, h, mass):
    """Inverse-transform draw of a bootstrap event time; inf means cured."""
    if f_at_a > 0.0 and u <= f_at_a:
        return fjt[np.searchsorted(fval, u, side="left")]
    w = u - f_at_a
    if w <= mass:
        i = np.searchsorted(cdf, w, side="left")
        if i == 0:
            return a
        c0 = cdf[i - 1]
        return a + h * (i - 1) + h * (w - c0) / (cdf[i] - c0)
    return np.inf


@njit(cache=True)
def draw_censoring(v, gjt, gval, fallback):
    idx = np.searchsorted(gval, v, side="left")
    if idx >= gval.shape[0]:
        return fallback
    return gjt[idx]


@njit(cache=True)
def draw_sample(U, V, fjt, fval, f_at_a, a, cdf, h, mass, gjt, gval, y_max):
    n = U.shape[0]
    ys = np.empty(n)
    ev = np.empty(n, np.bool_)
    for i in range(n):
        t = draw_event(U[i], fjt, fval, f_at_a, a, cdf, h, mass)
        c = draw_censoring(V[i], gjt, gval, y_max)
        if t <= c:
            ys[i] = t
            ev[i] = True
        else:
            ys[i] = c
            ev[i] = False
    return ys, ev


@njit(cache=True)
def endpoint_statistic(ys, ev, a, bw_factor, epsilon, tau):
    """Smoothed Grenander value at the largest time, plus the penalised statistic.

    Returns (f_hat, F_hat(y_max), y_max, ok); ``ok`` is False when the sample
    carries no event or no room to the right of ``a``.
    """
    order = np.argsort(ys, kind="mergesort")
    ts = ys[order]
    es = ev[order]
    jt, jv = km_steps(ts, es, False)
    y = ts[ts.shape[0] - 1]
    if jt.shape[0] == 0 or y <= a:
        return np.nan, np.nan, y, False
    knots, heights, slopes = grenander_from_steps(jt, jv, a, y)
    b = min(y * bw_factor, 0.5 * (y - a))
    f_hat = smoothed_at(knots, slopes, y, b, a, y)
    F_y = jv[jv.shape[0] - 1]
    return f_hat, F_y, y, True


@njit(cache=True)
def bootstrap_replicate(U, V, fjt, fval, f_at_a, a, cdf, h, mass, gjt, gval,
                        y_max, bw_factor, epsilon, tau):
    ys, ev = draw_sample(U, V, fjt, fval, f_at_a, a, cdf, h, mass, gjt, gval, y_max)
    f_hat, F_y, y, ok = endpoint_statistic(ys, ev, a, bw_factor, epsilon, tau)
    if not ok:
        return np.nan, np.nan, y, False
    return f_hat, f_hat - epsilon * F_y / (tau - y), y, True
