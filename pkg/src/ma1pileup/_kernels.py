"""Compiled inner loops for the finite-sample criteria.

Everything here works on one coefficient value at a time; the ``*_many``
wrappers loop over an array of coefficients.  Residual index ``t`` runs
over ``0..n`` so every residual array has ``n + 1`` entries.
"""

import math

import numpy as np
from numba import njit

# Relative width of the flat segment treated as an exact weighted-median tie.
TIE_RTOL = 1e-12


@njit(cache=True)
def residuals_fwd(x, theta, z_init):
    n = x.shape[0]
    z = np.empty(n + 1)
    z[0] = z_init
    for t in range(1, n + 1):
        z[t] = x[t - 1] + theta * z[t - 1]
    return z


@njit(cache=True)
def residuals_bwd(x, theta, z_init):
    n = x.shape[0]
    z = np.empty(n + 1)
    s = 0.0
    for t in range(n):
        s += x[t]
    z[n] = z_init + s
    inv = 1.0 / theta
    for t in range(n, 0, -1):
        z[t - 1] = (z[t] - x[t - 1]) * inv
    return z


@njit(cache=True)
def affine(x, theta):
    """Intercepts and slopes of the residuals as affine functions of z_init."""
    n = x.shape[0]
    b = np.empty(n + 1)
    if abs(theta) <= 1.0:
        a = residuals_fwd(x, theta, 0.0)
        b[0] = 1.0
        for t in range(1, n + 1):
            b[t] = theta * b[t - 1]
    else:
        a = residuals_bwd(x, theta, 0.0)
        b[n] = 1.0
        inv = 1.0 / theta
        for t in range(n, 0, -1):
            b[t - 1] = b[t] * inv
    return a, b


@njit(cache=True)
def _breakpoints(a, b):
    """Sorted breakpoints -a/b, their weights |b|, and the constant from b == 0 terms."""
    m = a.shape[0]
    c = np.empty(m)
    w = np.empty(m)
    const = 0.0
    for t in range(m):
        if b[t] != 0.0:
            c[t] = -a[t] / b[t]
            w[t] = abs(b[t])
        else:
            c[t] = 0.0
            w[t] = 0.0
            const += abs(a[t])
    order = np.argsort(c)
    return c[order], w[order], const


@njit(cache=True)
def weighted_median(a, b):
    """Minimizer of sum |a_t + b_t z| over z; flat optimal segments resolve to the midpoint."""
    c, w, _ = _breakpoints(a, b)
    m = c.shape[0]
    total = 0.0
    for k in range(m):
        total += w[k]
    half = 0.5 * total
    cum = 0.0
    for k in range(m):
        cum += w[k]
        if cum >= half * (1.0 - TIE_RTOL):
            if abs(cum - half) <= TIE_RTOL * total and k + 1 < m:
                # skip zero-weight points sitting on the flat stretch
                j = k + 1
                while j < m - 1 and w[j] == 0.0:
                    j += 1
                return 0.5 * (c[k] + c[j])
            return c[k]
    return c[m - 1]


@njit(cache=True)
def sum_abs(a, b, z):
    s = 0.0
    for t in range(a.shape[0]):
        s += abs(a[t] + b[t] * z)
    return s


@njit(cache=True)
def joint_profile(x, theta):
    """(z_init*, sum|z_t| at z_init*, criterion value) for the joint objective."""
    a, b = affine(x, theta)
    zstar = weighted_median(a, b)
    s = sum_abs(a, b, zstar)
    ell = s * abs(theta) if abs(theta) > 1.0 else s
    return zstar, s, ell


@njit(cache=True)
def joint_profile_many(x, thetas):
    out = np.empty(thetas.shape[0])
    for i in range(thetas.shape[0]):
        out[i] = joint_profile(x, thetas[i])[2]
    return out


@njit(cache=True)
def lad_objective_many(x, thetas):
    out = np.empty(thetas.shape[0])
    for i in range(thetas.shape[0]):
        th = thetas[i]
        if abs(th) <= 1.0:
            s = np.sum(np.abs(residuals_fwd(x, th, 0.0)))
        else:
            s = np.sum(np.abs(residuals_bwd(x, th, 0.0))) * abs(th)
        out[i] = s
    return out


# ---------------------------------------------------------------------------
# exact likelihood: closed-form integral of exp(-g(u)/sigma) for piecewise
# linear convex g(u) = sum_t |a_t + b_t u|
# ---------------------------------------------------------------------------


@njit(cache=True)
def _h(d):
    # (1 - exp(-d)) / d
    if d < 1e-8:
        return 1.0 - 0.5 * d
    return -math.expm1(-d) / d


@njit(cache=True)
def _k(d):
    # (1 - exp(-d) (1 + d)) / d**2, the normalized first moment on a segment
    if d < 1e-4:
        return 0.5 - d / 3.0 + d * d / 8.0
    return (-math.expm1(-d) - d * math.exp(-d)) / (d * d)


@njit(cache=True)
def piecewise_table(a, b):
    """Breakpoints and values of g at them; returns (c, G, total slope, min G)."""
    c, w, const = _breakpoints(a, b)
    m = c.shape[0]
    total = 0.0
    twc = 0.0
    for k in range(m):
        total += w[k]
        twc += w[k] * c[k]
    g = np.empty(m)
    cw = 0.0
    cwc = 0.0
    gmin = np.inf
    for k in range(m):
        cw += w[k]
        cwc += w[k] * c[k]
        val = const + c[k] * cw - cwc + (twc - cwc) - c[k] * (total - cw)
        g[k] = val
        if val < gmin:
            gmin = val
    return c, g, total, gmin


@njit(cache=True)
def _log_mass_and_mean(c, g, total, gmin, sigma):
    """log of integral of exp(-(g - gmin)/sigma) and the mean of g under it."""
    m = c.shape[0]
    mass = 0.0
    mom = 0.0
    # left tail
    w0 = (g[0] - gmin) / sigma
    e = math.exp(-w0)
    tail = e * sigma / total
    mass += tail
    mom += tail * ((g[0] - gmin) + sigma)
    for k in range(m - 1):
        length = c[k + 1] - c[k]
        if length <= 0.0:
            continue
        lo = g[k] if g[k] < g[k + 1] else g[k + 1]
        d = abs(g[k + 1] - g[k]) / sigma
        e = math.exp(-(lo - gmin) / sigma)
        if e == 0.0:
            continue
        seg = e * length * _h(d)
        mass += seg
        mom += e * length * ((lo - gmin) * _h(d) + sigma * d * _k(d))
    wl = (g[m - 1] - gmin) / sigma
    e = math.exp(-wl)
    tail = e * sigma / total
    mass += tail
    mom += tail * ((g[m - 1] - gmin) + sigma)
    return math.log(mass), gmin + mom / mass


@njit(cache=True)
def _exact_from_table(c, g, total, gmin, n, theta, sigma):
    logi, mean_g = _log_mass_and_mean(c, g, total, gmin, sigma)
    val = -(n + 1) * math.log(2.0 * sigma) - gmin / sigma + logi
    if abs(theta) > 1.0:
        val -= n * math.log(abs(theta))
    return val, mean_g


@njit(cache=True)
def exact_loglik(x, theta, sigma):
    a, b = affine(x, theta)
    c, g, total, gmin = piecewise_table(a, b)
    return _exact_from_table(c, g, total, gmin, x.shape[0], theta, sigma)[0]


@njit(cache=True)
def exact_profile(x, theta, rtol, max_iter):
    """Maximize the exact log-likelihood over sigma at fixed theta.

    The stationarity condition is sigma = E[g] / (n + 1), with the mean
    taken under the density proportional to exp(-g/sigma).  The map is a
    contraction with factor about 1/(n+1), iterated inside the bracket
    [s/20, 20 s] where s is the joint profile scale at this theta.
    Returns (loglik, sigma, iterations); sigma = 0 flags all-zero residuals.
    """
    n = x.shape[0]
    a, b = affine(x, theta)
    c, g, total, gmin = piecewise_table(a, b)
    if not gmin > 0.0:
        return np.inf, 0.0, 0
    s_joint = gmin / (n + 1)
    lo = s_joint / 20.0
    hi = s_joint * 20.0
    sigma = s_joint
    it = 0
    for it in range(1, max_iter + 1):
        _, mean_g = _exact_from_table(c, g, total, gmin, n, theta, sigma)
        new = mean_g / (n + 1)
        if new < lo:
            new = lo
        elif new > hi:
            new = hi
        done = abs(new - sigma) <= rtol * sigma
        sigma = new
        if done:
            break
    val = _exact_from_table(c, g, total, gmin, n, theta, sigma)[0]
    return val, sigma, it


@njit(cache=True)
def exact_profile_many(x, thetas, rtol, max_iter):
    out = np.empty(thetas.shape[0])
    for i in range(thetas.shape[0]):
        out[i] = exact_profile(x, thetas[i], rtol, max_iter)[0]
    return out
