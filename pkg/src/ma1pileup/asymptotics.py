"""Monte Carlo over the limiting Brownian functionals at the unit root.

Paths are discretized on a uniform grid of ``m`` increments and every
stochastic integral is a left-endpoint (Ito) sum.  ``S = W + c V`` with
``W`` and ``V`` independent standard Brownian motions.

The limit criterion is a quadratic in ``alpha``,
``U(beta, alpha) = q2 alpha^2 + q1 alpha + q0``, so both the profile
``min_alpha U`` and ``U*(beta) = log int exp(-U) d alpha`` are closed form.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _limit_kernels as lk
from .noise import NoiseSpec, replicate_rng

# spawn-key tag separating limit-path streams from finite-sample streams
PATH_STREAM = 0x4C494D  # "LIM"


@dataclass(frozen=True)
class BrownianPair:
    """Increments of two independent Brownian motions on ``[0, 1]``."""

    m: int
    dW: np.ndarray
    dV: np.ndarray

    @property
    def w1(self) -> float:
        return float(np.sum(self.dW))

    def w_left(self) -> np.ndarray:
        """``W`` at the left endpoints ``0, 1/m, ..., (m-1)/m``."""
        return np.concatenate(([0.0], np.cumsum(self.dW)[:-1]))

    def ds(self, c: float) -> np.ndarray:
        return self.dW + c * self.dV


def simulate_brownian_pair(m: int, rng: np.random.Generator) -> BrownianPair:
    if m < 1:
        raise ValueError("m must be >= 1")
    sd = 1.0 / math.sqrt(m)
    dW = rng.normal(0.0, sd, size=m)
    dV = rng.normal(0.0, sd, size=m)
    return BrownianPair(m, dW, dV)


def _check_f0(f0: float):
    if not (f0 > 0 and math.isfinite(f0)):
        raise ValueError(f"f0 must be positive and finite, got {f0!r}")


def y_statistic(pair: BrownianPair, f0: float, c: float) -> float:
    """``Y = int S dW - W(1) int S ds + W(1)/(2 f0) (int W ds - W(1)/2)``."""
    _check_f0(f0)
    return float(lk.y_stat(pair.dW, pair.ds(c), f0))


def y_laplace_rep(pair: BrownianPair) -> float:
    """Laplace-case representation ``int (W(1) s - W(s)) dV(s) - 1/2``."""
    return float(lk.y_laplace(pair.dW, pair.dV))


def bridge_energy(pair: BrownianPair) -> float:
    """``R = int (W(1) s - W(s))^2 ds``."""
    return float(lk.bridge_energy(pair.dW))


def limit_u_coefficients(beta: float, pair: BrownianPair, f0: float, c: float):
    """``(q2, q1, q0)`` of ``U(beta, .)``; ``q2 > 0`` always."""
    _check_f0(f0)
    return lk.coeffs(float(beta), pair.dW, pair.ds(c), f0)


def limit_u(beta: float, alpha: float, pair: BrownianPair, f0: float, c: float) -> float:
    """Discretized ``U(beta, alpha)`` evaluated term by term on the grid."""
    _check_f0(f0)
    K, g, corr = lk.kernel_path(float(beta), pair.dW, pair.ds(c))
    h = K + alpha * g
    return float(np.dot(h, pair.dW) + f0 * np.dot(h, h) / pair.m + corr)


def limit_u_profile(beta: float, pair: BrownianPair, f0: float, c: float) -> tuple[float, float]:
    """``(min over alpha of U(beta, alpha), argmin alpha)``."""
    q2, q1, q0 = limit_u_coefficients(beta, pair, f0, c)
    return q0 - q1 * q1 / (4.0 * q2), -q1 / (2.0 * q2)


def limit_u_star(beta: float, pair: BrownianPair, f0: float, c: float) -> float:
    """``U*(beta) = log int exp(-U(beta, alpha)) d alpha``."""
    q2, q1, q0 = limit_u_coefficients(beta, pair, f0, c)
    if not q2 > 0:
        raise FloatingPointError("non-positive quadratic coefficient")
    return -q0 + q1 * q1 / (4.0 * q2) + 0.5 * math.log(math.pi / q2)


@dataclass(frozen=True)
class AsymptoticConfig:
    m: int = 2000
    reps: int = 20000
    f0: float = 0.5
    c: float = 1.0
    beta_max: float = 25.0
    grid_step: float = 0.05
    refine_tol: float = 1e-6
    seed: int = 0
    batch: int = 1000
    workers: int = 1

    def __post_init__(self):
        if self.m < 100:
            raise ValueError("m must be >= 100")
        if self.reps < 100:
            raise ValueError("reps must be >= 100")
        _check_f0(self.f0)
        if not self.c >= 0:
            raise ValueError("c must be non-negative")
        if not (self.beta_max > 0 and 0 < self.grid_step < self.beta_max and self.refine_tol > 0):
            raise ValueError("invalid beta window")
        if self.batch < 1 or self.workers < 1:
            raise ValueError("batch and workers must be >= 1")

    @classmethod
    def for_noise(cls, family, **kw) -> "AsymptoticConfig":
        spec = NoiseSpec.of(family)
        return cls(f0=spec.f0, c=spec.c, **kw)


def minimize_limit_u(pair: BrownianPair, f0: float, c: float, cfg: AsymptoticConfig | None = None):
    """Limit joint estimator ``(beta_J, alpha_J)``; beta_J is nan on a window miss."""
    cfg = cfg or AsymptoticConfig(f0=f0, c=c)
    _check_f0(f0)
    dS = pair.ds(c)
    y = lk.y_stat(pair.dW, dS, f0)
    beta, _ = lk.beta_joint(y, pair.dW, dS, f0, cfg.beta_max, cfg.grid_step, cfg.refine_tol)
    if math.isnan(beta):
        return beta, float("nan")
    return float(beta), float(limit_u_profile(beta, pair, f0, c)[1])


def maximize_limit_u_star(pair: BrownianPair, f0: float, c: float, cfg: AsymptoticConfig | None = None):
    """Limit exact estimator: the local maximum of ``U*`` nearest 0 (nan on a window miss)."""
    cfg = cfg or AsymptoticConfig(f0=f0, c=c)
    _check_f0(f0)
    beta, _ = lk.local_nearest(
        lk.NEG_U_STAR, pair.dW, pair.ds(c), f0, cfg.beta_max, cfg.grid_step, cfg.refine_tol
    )
    return float(beta)


@dataclass(frozen=True)
class LimitSample:
    y: float
    beta_J: float
    beta_E: float
    alpha_at_zero: float


def limit_sample(pair: BrownianPair, f0: float, c: float, cfg: AsymptoticConfig | None = None) -> LimitSample:
    beta_j, _ = minimize_limit_u(pair, f0, c, cfg)
    return LimitSample(
        y=y_statistic(pair, f0, c),
        beta_J=beta_j,
        beta_E=maximize_limit_u_star(pair, f0, c, cfg),
        alpha_at_zero=-pair.w1 / (2.0 * f0),
    )


# ---------------------------------------------------------------------------
# replicated runs
# ---------------------------------------------------------------------------


def replicate_pair(seed: int, replicate: int, m: int) -> BrownianPair:
    """The path pair used for ``replicate`` in every replicated run under ``seed``."""
    return simulate_brownian_pair(m, replicate_rng(seed, replicate, PATH_STREAM))


def _increments(seed: int, m: int, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
    dW = np.empty((stop - start, m))
    dV = np.empty((stop - start, m))
    for i, r in enumerate(range(start, stop)):
        p = replicate_pair(seed, r, m)
        dW[i] = p.dW
        dV[i] = p.dV
    return dW, dV


def _batches(cfg: AsymptoticConfig):
    return [(s, min(s + cfg.batch, cfg.reps)) for s in range(0, cfg.reps, cfg.batch)]


def _map_batches(fn, cfg: AsymptoticConfig, *args):
    """Apply ``fn(cfg, start, stop, *args)`` over replicate batches, merged in index order."""
    jobs = _batches(cfg)
    if cfg.workers == 1 or len(jobs) == 1:
        parts = [fn(cfg, s, e, *args) for s, e in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            futs = [ex.submit(fn, cfg, s, e, *args) for s, e in jobs]
            parts = [f.result() for f in futs]
    return parts


def _y_job(cfg, start, stop, f0, c):
    dW, dV = _increments(cfg.seed, cfg.m, start, stop)
    return lk.batch_y(dW, dV, f0, c)


def _r_job(cfg, start, stop):
    dW, _ = _increments(cfg.seed, cfg.m, start, stop)
    return lk.batch_bridge_energy(dW)


def _limit_job(cfg, start, stop):
    dW, dV = _increments(cfg.seed, cfg.m, start, stop)
    return lk.limit_batch(dW, dV, cfg.f0, cfg.c, cfg.beta_max, cfg.grid_step, cfg.refine_tol)


def simulate_y(cfg: AsymptoticConfig, f0: float | None = None, c: float | None = None) -> np.ndarray:
    """``Y`` on replicates ``0..reps-1`` of the configured path streams."""
    f0 = cfg.f0 if f0 is None else f0
    c = cfg.c if c is None else c
    _check_f0(f0)
    return np.concatenate(_map_batches(_y_job, cfg, f0, c))


def pileup_prob_mc(cfg: AsymptoticConfig, f0: float | None = None, c: float | None = None):
    """``P(-1 < Y < 0)`` by direct Monte Carlo; returns ``(estimate, binomial s.e.)``."""
    y = simulate_y(cfg, f0, c)
    p = float(np.mean((y > -1.0) & (y < 0.0)))
    return p, math.sqrt(p * (1.0 - p) / y.size)


def conditional_pileup_laplace(r):
    """``2 Phi(1 / (2 sqrt(R))) - 1`` elementwise, with 1 where ``R = 0``."""
    r = np.asarray(r, dtype=float)
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, special.erf(0.5 / np.sqrt(2.0 * safe)), 1.0)


def pileup_prob_laplace_rb(cfg: AsymptoticConfig):
    """Rao-Blackwellized Laplace pile-up probability.

    Given W, the Laplace-case ``Y + 1/2`` is centered normal with variance
    ``R``, so ``P(-1 < Y < 0 | W) = 2 Phi(1 / (2 sqrt(R))) - 1`` (1 when
    ``R = 0``).  Returns ``(estimate, replicate s.e.)``.
    """
    vals = conditional_pileup_laplace(np.concatenate(_map_batches(_r_job, cfg)))
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(vals.size))


@dataclass(frozen=True)
class LimitSummary:
    reps: int
    sd_joint: float
    sd_exact: float
    pileup_joint: float
    pileup_exact: float
    pileup_y: float
    excluded_joint: int
    excluded_exact: int
    quantiles_joint: dict = field(default_factory=dict)
    quantiles_exact: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


def simulate_limit(cfg: AsymptoticConfig):
    """Per-replicate ``(Y, beta_J, beta_E, miss_J, miss_E)`` arrays."""
    parts = _map_batches(_limit_job, cfg)
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(5))


def _quantiles(v: np.ndarray) -> dict:
    if v.size == 0:
        return {q: float("nan") for q in QUANTILE_LEVELS}
    return {q: float(x) for q, x in zip(QUANTILE_LEVELS, np.quantile(v, QUANTILE_LEVELS))}


def limit_beta_distributions(cfg: AsymptoticConfig) -> LimitSummary:
    """Limit laws of beta_J and beta_E; window misses are excluded and counted."""
    y, bj, be, mj, me = simulate_limit(cfg)
    bj_ok = bj[~mj]
    be_ok = be[~me]
    return LimitSummary(
        reps=cfg.reps,
        sd_joint=float(np.std(bj_ok)),
        sd_exact=float(np.std(be_ok)),
        pileup_joint=float(np.mean(bj_ok == 0.0)),
        pileup_exact=float(np.mean(be_ok == 0.0)),
        pileup_y=float(np.mean((y > -1.0) & (y < 0.0))),
        excluded_joint=int(mj.sum()),
        excluded_exact=int(me.sum()),
        quantiles_joint=_quantiles(bj_ok),
        quantiles_exact=_quantiles(be_ok),
    )
