import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from ma1pileup.noise import (
    Ma1Config,
    NoiseFamily,
    NoiseSpec,
    derive_constants,
    ma1_from_innovations,
    replicate_rng,
    sample_noise,
    simulate_ma1,
)


def _standardized_moments(pdf, lo, hi, points=1_000_001):
    # brute-force trapezoid moments on a dense grid
    u = np.linspace(lo, hi, points)
    p = pdf(u)
    mean_abs = integrate.trapezoid(np.abs(u) * p, u)
    var = integrate.trapezoid(u * u * p, u)
    return mean_abs, var


def test_laplace_constants_exact():
    assert derive_constants(NoiseFamily.LAPLACE) == (0.5, 1.0)


def test_gaussian_constants_against_grid_integration():
    s = math.sqrt(math.pi / 2)  # 1 / E|N(0,1)|
    mean_abs, var = _standardized_moments(lambda u: stats.norm.pdf(u / s) / s, -12 * s, 12 * s)
    f0, c = derive_constants("gaussian")
    assert mean_abs == pytest.approx(1.0, abs=1e-9)
    assert f0 == pytest.approx(stats.norm.pdf(0) / s, abs=1e-12)
    assert f0 == pytest.approx(1 / math.pi, abs=1e-12)
    assert c == pytest.approx(math.sqrt(var - 1), abs=1e-8)
    assert c == pytest.approx(0.75551, abs=1e-5)


def test_uniform_constants_against_grid_integration():
    mean_abs, var = _standardized_moments(lambda u: np.where(np.abs(u) <= 2, 0.25, 0.0), -2, 2)
    f0, c = derive_constants("uniform")
    assert mean_abs == pytest.approx(1.0, abs=1e-6)
    assert (f0, c) == pytest.approx((0.25, math.sqrt(var - 1)), abs=1e-6)
    assert c == pytest.approx(1 / math.sqrt(3), abs=1e-14)


def test_t5_constants_against_gamma_formula():
    mean_abs = 2 * math.sqrt(5) * special.gamma(3) / (4 * math.sqrt(math.pi) * special.gamma(2.5))
    f0_ref = stats.t.pdf(0, 5) * mean_abs
    c_ref = math.sqrt((5 / 3) / mean_abs**2 - 1)
    f0, c = derive_constants(NoiseFamily.STUDENT_T5)
    assert f0 == pytest.approx(f0_ref, abs=1e-10)
    assert c == pytest.approx(c_ref, abs=1e-10)


@pytest.mark.parametrize("family", list(NoiseFamily))
def test_constants_positive_finite(family):
    f0, c = derive_constants(family)
    assert 0 < f0 < math.inf and 0 < c < math.inf


@pytest.mark.parametrize(
    "alias, family",
    [("LAP", NoiseFamily.LAPLACE), ("normal", NoiseFamily.GAUSSIAN), ("t(5)", NoiseFamily.STUDENT_T5)],
)
def test_family_aliases(alias, family):
    assert NoiseFamily.parse(alias) is family


def test_unknown_family():
    with pytest.raises(ValueError):
        NoiseFamily.parse("cauchy")


def test_sample_noise_deterministic():
    spec = NoiseSpec.of("laplace")
    a = sample_noise(spec, 3, replicate_rng(11, 0))
    b = sample_noise(spec, 3, replicate_rng(11, 0))
    assert a.tobytes() == b.tobytes()


def test_sample_noise_rejects_empty():
    with pytest.raises(ValueError):
        sample_noise(NoiseSpec.of("laplace"), 0, np.random.default_rng(0))


def test_gaussian_mean_abs():
    z = sample_noise(NoiseSpec.of("gaussian"), 10**6, replicate_rng(1, 0))
    assert abs(np.mean(np.abs(z)) - 1) < 0.005


def test_uniform_support():
    z = sample_noise(NoiseSpec.of("uniform"), 10**6, replicate_rng(2, 0))
    assert np.all((z > -2) & (z < 2))


@pytest.mark.parametrize("family", list(NoiseFamily))
def test_standardization_within_four_se(family):
    z = np.abs(sample_noise(NoiseSpec.of(family), 10**6, replicate_rng(3, 0)))
    se = z.std(ddof=1) / math.sqrt(z.size)
    assert abs(z.mean() - 1) <= 4 * se


def test_replicate_streams_depend_only_on_index():
    forward = [replicate_rng(5, r).normal() for r in range(5)]
    backward = [replicate_rng(5, r).normal() for r in reversed(range(5))][::-1]
    assert forward == backward
    assert len(set(forward)) == 5


def test_direct_substitution():
    assert ma1_from_innovations([1.0, 0.0], 1.0).tolist() == [-1.0]


def test_theta_zero_is_white_noise():
    s = simulate_ma1(Ma1Config(0.0, 20), NoiseSpec.of("gaussian"), replicate_rng(0, 0))
    np.testing.assert_array_equal(s.x, s.z[1:])


def test_unit_root_telescopes():
    s = simulate_ma1(Ma1Config(1.0, 500), NoiseSpec.of("t5"), replicate_rng(0, 1))
    assert math.isclose(np.sum(s.x), s.z[-1] - s.z[0], rel_tol=0, abs_tol=1e-10)


@settings(max_examples=50, deadline=None)
@given(
    theta0=st.floats(-3, 3),
    n=st.integers(2, 60),
    family=st.sampled_from(list(NoiseFamily)),
    seed=st.integers(0, 2**32),
)
def test_reconstruction_invariant(theta0, n, family, seed):
    s = simulate_ma1(Ma1Config(theta0, n, seed), NoiseSpec.of(family), replicate_rng(seed, 0))
    assert s.z.shape == (n + 1,) and s.x.shape == (n,)
    np.testing.assert_allclose(s.x, s.z[1:] - theta0 * s.z[:-1], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("kw", [dict(theta0=1.0, n=1), dict(theta0=math.nan, n=10), dict(theta0=1.0, n=2.5)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        Ma1Config(**kw)
