"""Compiled loops over discretized Brownian paths.

Increments are indexed ``0..m-1``; increment ``j`` covers ``(j/m, (j+1)/m]``
and integrands are evaluated at its left endpoint ``s_j = j/m``.
"""

import math

import numpy as np
from numba import njit

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

PROFILE_U = 0  # min over alpha of U(beta, alpha), minimized in beta
NEG_U_STAR = 1  # -U*(beta), minimized in beta


@njit(cache=True)
def y_stat(dW, dS, f0):
    m = dW.shape[0]
    W = 0.0
    S = 0.0
    int_s_dw = 0.0
    int_s = 0.0
    int_w = 0.0
    for j in range(m):
        int_s_dw += S * dW[j]
        int_s += S
        int_w += W
        W += dW[j]
        S += dS[j]
    int_s /= m
    int_w /= m
    return int_s_dw - W * int_s + (W / (2.0 * f0)) * (int_w - 0.5 * W)


@njit(cache=True)
def y_laplace(dW, dV):
    m = dW.shape[0]
    w1 = 0.0
    for j in range(m):
        w1 += dW[j]
    W = 0.0
    acc = 0.0
    for j in range(m):
        acc += (w1 * (j / m) - W) * dV[j]
        W += dW[j]
    return acc - 0.5


@njit(cache=True)
def bridge_energy(dW):
    """Left-endpoint sum for the integral of (W(1) s - W(s))^2 ds."""
    m = dW.shape[0]
    w1 = 0.0
    for j in range(m):
        w1 += dW[j]
    W = 0.0
    acc = 0.0
    for j in range(m):
        v = w1 * (j / m) - W
        acc += v * v
        W += dW[j]
    return acc / m


@njit(cache=True)
def coeffs(beta, dW, dS, f0):
    """(q2, q1, q0) with U(beta, alpha) = q2 alpha^2 + q1 alpha + q0."""
    m = dW.shape[0]
    sg2 = 0.0
    sgdw = 0.0
    skg = 0.0
    skdw = 0.0
    sk2 = 0.0
    if beta <= 0.0:
        e = math.exp(beta / m)
        K = 0.0
        g = 1.0
        for j in range(m):
            sg2 += g * g
            sgdw += g * dW[j]
            skg += K * g
            skdw += K * dW[j]
            sk2 += K * K
            K = e * (K + beta * dS[j])
            g *= e
    else:
        # K excludes the diagonal increment; the off-diagonal double sum then
        # differs from product - lower triangle - [S, W](1) by (sum dS dW - 1),
        # which is added back so the covariation enters as exactly 1.
        e = math.exp(-beta / m)
        K = 0.0
        g = e
        qv = 0.0
        for j in range(m - 1, -1, -1):
            sg2 += g * g
            sgdw += g * dW[j]
            skg += K * g
            skdw += K * dW[j]
            sk2 += K * K
            qv += dS[j] * dW[j]
            K = e * (K - beta * dS[j])
            g *= e
        skdw -= beta * (qv - 1.0)
    q2 = f0 * sg2 / m
    q1 = sgdw + 2.0 * f0 * skg / m
    q0 = skdw + f0 * sk2 / m
    return q2, q1, q0


@njit(cache=True)
def criterion(kind, beta, dW, dS, f0):
    q2, q1, q0 = coeffs(beta, dW, dS, f0)
    prof = q0 - q1 * q1 / (4.0 * q2)
    if kind == PROFILE_U:
        return prof
    return prof - 0.5 * math.log(math.pi / q2)


@njit(cache=True)
def _golden(kind, lo, hi, tol, dW, dS, f0):
    a = lo
    b = hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = criterion(kind, c, dW, dS, f0)
    fd = criterion(kind, d, dW, dS, f0)
    if fc <= fd:
        bx, bf = c, fc
    else:
        bx, bf = d, fd
    while b - a > tol:
        if fc <= fd:
            b = d
            d = c
            fd = fc
            c = b - GOLDEN * (b - a)
            fc = criterion(kind, c, dW, dS, f0)
            if fc < bf:
                bx, bf = c, fc
        else:
            a = c
            c = d
            fc = fd
            d = a + GOLDEN * (b - a)
            fd = criterion(kind, d, dW, dS, f0)
            if fd < bf:
                bx, bf = d, fd
    return bx, bf


@njit(cache=True)
def nearest_min_on_side(kind, side, c0, dW, dS, f0, beta_max, step, tol):
    """Refined first grid local minimum walking outward from 0; (nan, nan) on a window miss."""
    K = int(math.floor(beta_max / step + 1e-9))
    prev = c0
    for k in range(1, K + 1):
        cur = criterion(kind, side * k * step, dW, dS, f0)
        if cur >= prev:
            kmin = k - 1
            lo = side * max(kmin - 1, 0) * step
            hi = side * (kmin + 1) * step
            if lo > hi:
                lo, hi = hi, lo
            bx, bf = _golden(kind, lo, hi, tol, dW, dS, f0)
            if kmin > 0 and prev < bf:
                return side * kmin * step, prev
            return bx, bf
        prev = cur
    return np.nan, np.nan


@njit(cache=True)
def _stable_slope(kind, side, c0, dW, dS, f0):
    s1 = side * (criterion(kind, side * 1e-4, dW, dS, f0) - c0) / 1e-4
    s2 = side * (criterion(kind, side * 1e-5, dW, dS, f0) - c0) / 1e-5
    if np.sign(s1) == np.sign(s2):
        return s1
    return s2


@njit(cache=True)
def local_nearest(kind, dW, dS, f0, beta_max, step, tol):
    """Local minimizer closest to 0 from the one-sided slopes at 0; returns (beta, missed)."""
    c0 = criterion(kind, 0.0, dW, dS, f0)
    left = _stable_slope(kind, -1, c0, dW, dS, f0)
    right = _stable_slope(kind, 1, c0, dW, dS, f0)
    best = np.nan
    if left > 0.0:
        bl, _ = nearest_min_on_side(kind, -1, c0, dW, dS, f0, beta_max, step, tol)
        best = bl
    if right < 0.0:
        br, _ = nearest_min_on_side(kind, 1, c0, dW, dS, f0, beta_max, step, tol)
        if not np.isnan(br) and (np.isnan(best) or abs(br) < abs(best)):
            best = br
    if not (left > 0.0) and not (right < 0.0):
        return 0.0, False
    return best, np.isnan(best)


@njit(cache=True)
def beta_joint(y, dW, dS, f0, beta_max, step, tol):
    """Limit joint estimator: 0 on the pile-up event -1 < Y < 0, else the nearest local min."""
    if -1.0 < y < 0.0:
        return 0.0, False
    c0 = criterion(PROFILE_U, 0.0, dW, dS, f0)
    side = -1 if y >= 0.0 else 1
    b, _ = nearest_min_on_side(PROFILE_U, side, c0, dW, dS, f0, beta_max, step, tol)
    return b, np.isnan(b)


@njit(cache=True)
def limit_batch(dW, dV, f0, c, beta_max, step, tol):
    r = dW.shape[0]
    y = np.empty(r)
    bj = np.empty(r)
    be = np.empty(r)
    mj = np.zeros(r, dtype=np.bool_)
    me = np.zeros(r, dtype=np.bool_)
    for i in range(r):
        dS = dW[i] + c * dV[i]
        y[i] = y_stat(dW[i], dS, f0)
        bj[i], mj[i] = beta_joint(y[i], dW[i], dS, f0, beta_max, step, tol)
        be[i], me[i] = local_nearest(NEG_U_STAR, dW[i], dS, f0, beta_max, step, tol)
    return y, bj, be, mj, me


@njit(cache=True)
def kernel_path(beta, dW, dS):
    """Inner kernel K(s_j), weight g(s_j) and the covariation correction.

    U(beta, alpha) = sum (K + alpha g) dW + f0 sum (K + alpha g)^2 / m + corr.
    """
    m = dW.shape[0]
    K = np.zeros(m)
    g = np.empty(m)
    corr = 0.0
    if beta <= 0.0:
        e = math.exp(beta / m)
        k = 0.0
        gg = 1.0
        for j in range(m):
            K[j] = k
            g[j] = gg
            k = e * (k + beta * dS[j])
            gg *= e
    else:
        e = math.exp(-beta / m)
        k = 0.0
        gg = e
        qv = 0.0
        for j in range(m - 1, -1, -1):
            K[j] = k
            g[j] = gg
            qv += dS[j] * dW[j]
            k = e * (k - beta * dS[j])
            gg *= e
        corr = -beta * (qv - 1.0)
    return K, g, corr


@njit(cache=True)
def profile_pileup_numeric(dW, dS, f0):
    """beta = 0 is a local minimum of the profiled U by one-sided difference quotients."""
    c0 = criterion(PROFILE_U, 0.0, dW, dS, f0)
    left = _stable_slope(PROFILE_U, -1, c0, dW, dS, f0)
    right = _stable_slope(PROFILE_U, 1, c0, dW, dS, f0)
    return not (left > 0.0) and not (right < 0.0)


@njit(cache=True)
def batch_y(dW, dV, f0, c):
    r = dW.shape[0]
    out = np.empty(r)
    for i in range(r):
        out[i] = y_stat(dW[i], dW[i] + c * dV[i], f0)
    return out


@njit(cache=True)
def batch_bridge_energy(dW):
    r = dW.shape[0]
    out = np.empty(r)
    for i in range(r):
        out[i] = bridge_energy(dW[i])
    return out
