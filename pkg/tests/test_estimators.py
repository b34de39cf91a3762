import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from ma1pileup import _kernels
from ma1pileup.estimators import (
    Method,
    Mode,
    SearchConfig,
    WindowMissError,
    exact_loglik,
    exact_profile,
    fit,
    fit_exact,
    fit_joint,
    fit_lad,
    golden_section,
    inner_zinit,
    pileup_test_joint,
)
from ma1pileup.residuals import affine_decomposition, objective, residuals

from .conftest import make_sample


def _phi(x, theta):
    return inner_zinit(x, theta)[1]


# --- inner problem -----------------------------------------------------------


def test_inner_theta_zero_single_breakpoint(rng):
    x = rng.normal(size=8)
    z, ell = inner_zinit(x, 0.0)
    assert z == 0.0  # a_0 = 0 and only the t = 0 term depends on z_init
    assert ell == pytest.approx(np.sum(np.abs(x)))


def test_inner_matches_dense_grid(rng):
    x = rng.normal(size=10)
    z, ell = inner_zinit(x, 0.7)
    grid = np.arange(-6, 6, 1e-4)
    aff = affine_decomposition(x, 0.7)
    vals = np.abs(aff.a[:, None] + aff.b[:, None] * grid[None, :]).sum(axis=0)
    k = int(np.argmin(vals))
    assert abs(z - grid[k]) <= 1e-4
    assert ell <= vals[k] + 1e-8


def test_inner_improves_on_truth():
    s = make_sample(n=100, seed=4)
    assert inner_zinit(s.x, 1.0)[1] <= np.sum(np.abs(s.z)) + 1e-12


def test_weighted_median_optimal_on_window():
    gen = np.random.default_rng(101)
    probes = np.arange(-3, 3 + 1e-12, 1e-3)
    for _ in range(1000):
        n = int(gen.integers(2, 15))
        x = gen.normal(size=n) * gen.uniform(0.1, 3)
        theta = float(gen.uniform(-2.5, 2.5))
        z, ell = inner_zinit(x, theta)
        aff = affine_decomposition(x, theta)
        scale = abs(theta) if abs(theta) > 1 else 1.0
        vals = scale * np.abs(aff.a[:, None] + aff.b[:, None] * (z + probes)[None, :]).sum(axis=0)
        assert vals.min() >= ell - 1e-9


def test_weighted_median_tie_midpoint():
    # two equal-weight breakpoints at 0 and 1: every point between is optimal
    a = np.array([0.0, -1.0])
    b = np.array([1.0, 1.0])
    assert _kernels.weighted_median(a, b) == pytest.approx(0.5)


@settings(max_examples=100, deadline=None)
@given(
    x=st.lists(st.floats(-5, 5), min_size=2, max_size=20).map(np.array),
    theta=st.floats(-2, 2),
    z=st.floats(-50, 50),
)
def test_profile_dominance(x, theta, z):
    assert _phi(x, theta) <= objective(x, theta, z).ell + 1e-9 * (1 + abs(z)) * (1 + np.abs(x).sum())


# --- pile-up test and joint fits ---------------------------------------------


def test_zero_data_degenerate():
    for fitter in (fit_joint, fit_exact, fit_lad):
        res = fitter(np.zeros(10))
        assert res.theta_hat == 1.0 and res.pileup and res.degenerate and res.sigma_hat == 0.0
    assert pileup_test_joint(np.zeros(5))


def test_ramp_is_not_a_pileup():
    n = 30
    x = -10.0 * np.arange(1, n + 1)
    h = 1e-4 / n
    left, mid, right = _phi(x, 1 - h), _phi(x, 1.0), _phi(x, 1 + h)
    # brute-force oracle: phi is monotone through theta = 1
    assert (left - mid) * (mid - right) > 0
    assert not pileup_test_joint(x)


def test_pileup_test_consistent_with_local_fit():
    cfg = SearchConfig()
    for r in range(1000):
        x = make_sample(n=30, seed=21, replicate=r).x
        try:
            res = fit_joint(x, cfg)
        except WindowMissError:
            continue
        assert pileup_test_joint(x) == (res.theta_hat == 1.0) == res.pileup


def test_pileup_implies_theta_exactly_one():
    for r in range(100):
        res = fit_joint(make_sample(n=40, seed=5, replicate=r).x)
        if res.pileup:
            assert res.theta_hat == 1.0 and res.beta_hat == 0.0
        else:
            assert res.theta_hat != 1.0
        assert res.sigma_hat > 0


def test_joint_local_is_local_minimum():
    s = make_sample(theta0=0.9, n=60, seed=31)
    res = fit_joint(s.x)
    assert not res.pileup
    h = 1e-3 / s.n
    assert _phi(s.x, res.theta_hat) <= min(_phi(s.x, res.theta_hat - h), _phi(s.x, res.theta_hat + h)) + 1e-9
    assert res.z_init_hat == pytest.approx(inner_zinit(s.x, res.theta_hat)[0])
    z = residuals(s.x, res.theta_hat, res.z_init_hat)
    assert res.sigma_hat == pytest.approx(np.sum(np.abs(z)) / (s.n + 1))


def test_global_never_worse_than_local():
    for r in range(200):
        x = make_sample(theta0=0.95, n=40, seed=8, replicate=r).x
        try:
            loc = fit_joint(x, SearchConfig(mode=Mode.LOCAL))
            glo = fit_joint(x, SearchConfig(mode=Mode.GLOBAL))
        except WindowMissError:
            continue
        assert glo.objective <= loc.objective + 1e-12


def test_window_miss_reported():
    s = make_sample(theta0=0.5, n=50, seed=1)
    with pytest.raises(WindowMissError):
        fit_joint(s.x, SearchConfig(beta_max=0.2, grid_step=0.05))


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(0.01, 100), replicate=st.integers(0, 10**4))
def test_scale_equivariance(scale, replicate):
    x = make_sample(n=40, seed=12, replicate=replicate).x
    for method in (Method.JOINT, Method.EXACT):
        try:
            a = fit(x, method)
        except WindowMissError:
            continue
        b = fit(scale * x, method)
        assert b.pileup == a.pileup
        assert b.theta_hat == pytest.approx(a.theta_hat, abs=1e-5 / 40)
        assert b.sigma_hat == pytest.approx(scale * a.sigma_hat, rel=1e-5)


def test_determinism():
    x = make_sample(n=50, seed=3).x
    for method in Method:
        a, b = fit(x, method), fit(x, method)
        assert repr(a) == repr(b)  # nan-safe, bitwise via repr of floats
        assert a.diagnostics == b.diagnostics


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(beta_max=0)
    with pytest.raises(ValueError):
        SearchConfig(beta_max=1, grid_step=2)
    with pytest.raises(ValueError):
        SearchConfig(refine_tol=0)


def test_golden_section_quadratic():
    x, fx = golden_section(lambda t: (t - 0.3) ** 2, -1, 2, 1e-8)
    assert x == pytest.approx(0.3, abs=1e-7)


# --- exact likelihood --------------------------------------------------------


def _quad_loglik(x, theta, sigma, dps=30):
    # arbitrary-precision quadrature with the kinks of g as interval endpoints;
    # for small |theta| the breakpoints spread over many orders of magnitude,
    # which defeats fixed-precision adaptive quadrature on the long segments
    n = len(x)
    aff = affine_decomposition(x, theta)
    with mpmath.workdps(dps):
        a = [mpmath.mpf(float(v)) for v in aff.a]
        b = [mpmath.mpf(float(v)) for v in aff.b]
        g = lambda u: mpmath.fsum(abs(ai + bi * u) for ai, bi in zip(a, b))  # noqa: E731
        bps = sorted(-ai / bi for ai, bi in zip(a, b) if bi != 0)
        gmin = min(g(u) for u in bps)
        f = lambda u: mpmath.exp(-(g(u) - gmin) / sigma)  # noqa: E731
        total = mpmath.quad(f, [-mpmath.inf, *bps, mpmath.inf])
        val = -(n + 1) * mpmath.log(2 * sigma) - gmin / sigma + mpmath.log(total)
    if abs(theta) > 1:
        val -= n * math.log(abs(theta))
    return float(val)


def test_exact_loglik_against_quadrature():
    gen = np.random.default_rng(202)
    for _ in range(200):
        n = int(gen.integers(2, 12))
        x = gen.laplace(size=n)
        theta = float(gen.choice([-1, 1]) * gen.uniform(0.05, 2.5))
        sigma = float(gen.uniform(0.2, 3))
        ref = _quad_loglik(x, theta, sigma)
        assert exact_loglik(x, theta, sigma) == pytest.approx(ref, rel=1e-7)


def test_exact_loglik_rejects_bad_sigma():
    with pytest.raises(ValueError):
        exact_loglik(np.ones(3), 0.5, 0.0)


@pytest.mark.parametrize("theta", [0.6, 1.0, 1.3])
def test_exact_profile_maximizes_sigma(theta):
    x = make_sample(n=40, seed=6).x
    val, sigma = exact_profile(x, theta)
    ref = optimize.minimize_scalar(
        lambda ls: -exact_loglik(x, theta, math.exp(ls)), bounds=(-5, 5), method="bounded",
        options={"xatol": 1e-10},
    )  # fmt: skip
    assert sigma == pytest.approx(math.exp(ref.x), rel=1e-5)
    assert val >= -ref.fun - 1e-9


def test_exact_fit_is_local_maximum():
    s = make_sample(theta0=1.0, n=60, seed=14)
    res = fit_exact(s.x)
    h = 1e-3 / s.n
    prof = lambda t: exact_profile(s.x, t)[0]  # noqa: E731
    assert res.objective >= max(prof(res.theta_hat - h), prof(res.theta_hat + h)) - 1e-9
    assert res.objective == pytest.approx(exact_loglik(s.x, res.theta_hat, res.sigma_hat))


# --- LAD -----------------------------------------------------------------------


def test_lad_matches_grid_oracle():
    x = make_sample(theta0=0.4, n=12, seed=44).x
    grid = np.arange(-3, 3 + 1e-12, 1e-4)
    vals = _kernels.lad_objective_many(x, grid)
    ref = grid[int(np.argmin(vals))]
    res = fit_lad(x, SearchConfig(beta_max=4 * 12.0, mode=Mode.GLOBAL))
    assert abs(res.theta_hat - ref) <= 1e-4
    assert res.objective <= vals.min() + 1e-9
    assert res.z_init_hat == 0.0


def test_lad_defaults_to_global():
    assert fit_lad(make_sample(n=30, seed=2).x).mode is Mode.GLOBAL
