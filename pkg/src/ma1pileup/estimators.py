"""Finite-sample estimators of the MA(1) coefficient near the unit root.

Three criteria are searched over ``theta = 1 + beta/n``:

* joint: the Laplace objective profiled over ``z_init`` (exact weighted median),
* exact: the Laplace likelihood with ``z_init`` integrated out in closed form
  and the scale profiled numerically,
* LAD: the joint objective with ``z_init`` pinned to 0.

The search is a uniform grid in ``beta`` plus golden-section refinement.  A
pile-up (``theta_hat == 1`` exactly) is declared from the signs of the
one-sided difference quotients at ``beta = 0``, never from float equality.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _kernels

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# beta-scale steps for the one-sided derivative test, i.e. theta steps of 1e-4/n and 1e-5/n
KINK_STEPS = (1e-4, 1e-5)


class Method(str, enum.Enum):
    JOINT = "joint"
    EXACT = "exact"
    LAD = "lad"


class Mode(str, enum.Enum):
    LOCAL = "local"
    GLOBAL = "global"

    @classmethod
    def parse(cls, value: "str | Mode") -> "Mode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class WindowMissError(RuntimeError):
    """No interior optimum inside the beta window."""


@dataclass(frozen=True)
class SearchConfig:
    beta_max: float = 25.0
    grid_step: float = 0.05
    refine_tol: float = 1e-6
    mode: Mode = Mode.LOCAL
    sigma_profile_tol: float = 1e-8
    sigma_max_iter: int = 500
    chunk: int = 64
    # number of lowest grid minima refined in global mode
    global_candidates: int = 4

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if not self.beta_max > 0:
            raise ValueError("beta_max must be positive")
        if not 0 < self.grid_step < self.beta_max:
            raise ValueError("grid_step must lie in (0, beta_max)")
        if not (self.refine_tol > 0 and self.sigma_profile_tol > 0):
            raise ValueError("tolerances must be positive")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.beta_max / self.grid_step + 1e-9))


@dataclass(frozen=True)
class FitResult:
    theta_hat: float
    z_init_hat: float
    sigma_hat: float
    objective: float
    pileup: bool
    method: Method
    mode: Mode
    degenerate: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def beta_hat(self) -> float:
        return self.diagnostics.get("beta_hat", float("nan"))


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float):
    """Minimize ``f`` on ``[lo, hi]``; returns ``(x, f(x))`` for the best point seen."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
            if fc < best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
            if fd < best_f:
                best_x, best_f = d, fd
    return best_x, best_f


def _stable_slope(values_at: Callable[[np.ndarray], np.ndarray], c0: float, side: int) -> float:
    hs = np.array(KINK_STEPS)
    vals = values_at(side * hs)
    slopes = side * (vals - c0) / hs
    if np.sign(slopes[0]) == np.sign(slopes[1]):
        return float(slopes[0])
    return float(slopes[1])


class _Search:
    """Grid-plus-refinement search of a criterion ``C(beta)`` to be minimized."""

    def __init__(self, values: Callable[[np.ndarray], np.ndarray], cfg: SearchConfig):
        self.values = values
        self.cfg = cfg
        self.c0 = float(values(np.zeros(1))[0])
        self.left = _stable_slope(values, self.c0, -1)
        self.right = _stable_slope(values, self.c0, +1)
        self._refined: dict = {}

    @property
    def pileup(self) -> bool:
        # beta = 0 is a local minimum iff no side offers descent
        return not (self.left > 0.0) and not (self.right < 0.0)

    def descent_sides(self) -> list[int]:
        sides = []
        if self.left > 0.0:
            sides.append(-1)
        if self.right < 0.0:
            sides.append(+1)
        return sides

    def _scalar(self, beta: float) -> float:
        return float(self.values(np.array([beta]))[0])

    def refine(self, lo: float, hi: float) -> tuple[float, float]:
        key = (lo, hi)
        if key not in self._refined:
            self._refined[key] = golden_section(self._scalar, lo, hi, self.cfg.refine_tol)
        return self._refined[key]

    def _bracket(self, side: int, k: int) -> tuple[float, float]:
        step = self.cfg.grid_step
        ends = sorted((side * max(k - 1, 0) * step, side * (k + 1) * step))
        return ends[0], ends[1]

    def _refine_grid_min(self, side: int, k: int, grid_val: float) -> tuple[float, float]:
        b, v = self.refine(*self._bracket(side, k))
        if k > 0 and grid_val < v:
            return side * k * self.cfg.grid_step, grid_val
        return b, v

    def nearest_on_side(self, side: int, grid: np.ndarray | None = None):
        """First grid local minimum walking outward from 0, refined; None on a window miss."""
        cfg = self.cfg
        K = cfg.n_steps
        prev = self.c0
        k0 = 0
        while k0 < K:
            ks = np.arange(k0 + 1, min(k0 + cfg.chunk, K) + 1)
            vals = grid[ks] if grid is not None else self.values(side * ks * cfg.grid_step)
            seq = np.concatenate(([prev], vals))
            rises = np.nonzero(seq[1:] >= seq[:-1])[0]
            if rises.size:
                k = k0 + int(rises[0])
                return self._refine_grid_min(side, k, float(seq[rises[0]]))
            prev = float(vals[-1])
            k0 = int(ks[-1])
        return None

    def local_nearest(self):
        """(beta_hat, criterion, tie) for the local minimum closest to 0."""
        if self.pileup:
            return 0.0, self.c0, False
        found = []
        for side in self.descent_sides():
            res = self.nearest_on_side(side)
            if res is not None:
                found.append(res)
        if not found:
            raise WindowMissError("no interior local optimum inside the beta window")
        found.sort(key=lambda r: (abs(r[0]), r[0]))
        tie = len(found) == 2 and abs(found[0][0]) == abs(found[1][0])
        return found[0][0], found[0][1], tie

    def global_min(self):
        cfg = self.cfg
        K = cfg.n_steps
        ks = np.arange(1, K + 1)
        step = cfg.grid_step
        right = self.values(ks * step)
        left = self.values(-ks * step)
        full = np.concatenate((left[::-1], [self.c0], right))
        i_best = int(np.argmin(full))
        if i_best in (0, 2 * K):
            raise WindowMissError("global grid minimum sits on the edge of the beta window")
        cands = []
        if self.pileup:
            cands.append((0.0, self.c0))
        grid_r = np.concatenate(([self.c0], right))
        grid_l = np.concatenate(([self.c0], left))
        for side in self.descent_sides():
            res = self.nearest_on_side(side, grid_r if side > 0 else grid_l)
            if res is not None:
                cands.append(res)
        interior = np.arange(1, 2 * K)
        is_min = (full[interior] <= full[interior - 1]) & (full[interior] <= full[interior + 1])
        mins = interior[is_min]
        mins = mins[mins != K]
        mins = mins[np.argsort(full[mins], kind="stable")][: cfg.global_candidates]
        for i in mins:
            j = int(i) - K
            side = 1 if j > 0 else -1
            cands.append(self._refine_grid_min(side, abs(j), float(full[i])))
        # prefer the exact pile-up point, then the invertible side, on ties
        cands.sort(key=lambda r: (r[1], r[0] != 0.0, r[0]))
        return cands[0][0], cands[0][1], False


def _prepare(x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("x must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    return x


def _degenerate(method: Method, mode: Mode) -> FitResult:
    return FitResult(
        theta_hat=1.0,
        z_init_hat=0.0,
        sigma_hat=0.0,
        objective=0.0,
        pileup=True,
        method=method,
        mode=mode,
        degenerate=True,
        diagnostics={"beta_hat": 0.0},
    )


def _run(search: _Search, mode: Mode):
    if mode is Mode.GLOBAL:
        return search.global_min()
    return search.local_nearest()


def inner_zinit(x, theta: float) -> tuple[float, float]:
    """Exact minimizer over z_init of the joint objective at fixed theta, and the profiled value."""
    x = _prepare(x)
    z, _, ell = _kernels.joint_profile(x, float(theta))
    return float(z), float(ell)


def _joint_values(x: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    n = x.shape[0]
    return lambda betas: _kernels.joint_profile_many(x, 1.0 + np.asarray(betas, float) / n)


def pileup_test_joint(x) -> bool:
    """True iff theta = 1 is a local minimum of the profiled joint objective."""
    x = _prepare(x)
    if not np.any(x):
        return True
    return _Search(_joint_values(x), SearchConfig()).pileup


def fit_joint(x, cfg: SearchConfig | None = None) -> FitResult:
    cfg = cfg or SearchConfig()
    x = _prepare(x)
    if not np.any(x):
        return _degenerate(Method.JOINT, cfg.mode)
    n = x.shape[0]
    search = _Search(_joint_values(x), cfg)
    beta, _, tie = _run(search, cfg.mode)
    pileup = beta == 0.0
    theta = 1.0 if pileup else 1.0 + beta / n
    z, s, ell = _kernels.joint_profile(x, theta)
    return FitResult(
        theta_hat=theta,
        z_init_hat=float(z),
        sigma_hat=float(s) / (n + 1),
        objective=float(ell),
        pileup=pileup,
        method=Method.JOINT,
        mode=cfg.mode,
        diagnostics={"beta_hat": beta, "tie": tie, "kink_slopes": (search.left, search.right)},
    )


def exact_loglik(x, theta: float, sigma: float) -> float:
    """Log of the Laplace likelihood with the augmented initial value integrated out."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = _prepare(x)
    return float(_kernels.exact_loglik(x, float(theta), float(sigma)))


def exact_profile(x, theta: float, cfg: SearchConfig | None = None) -> tuple[float, float]:
    """``(max over sigma of exact_loglik, argmax sigma)`` at fixed theta."""
    cfg = cfg or SearchConfig()
    x = _prepare(x)
    val, sigma, _ = _kernels.exact_profile(x, float(theta), cfg.sigma_profile_tol, cfg.sigma_max_iter)
    return float(val), float(sigma)


def fit_exact(x, cfg: SearchConfig | None = None) -> FitResult:
    cfg = cfg or SearchConfig()
    x = _prepare(x)
    if not np.any(x):
        return _degenerate(Method.EXACT, cfg.mode)
    n = x.shape[0]
    tol, iters = cfg.sigma_profile_tol, cfg.sigma_max_iter

    def values(betas):
        return -_kernels.exact_profile_many(x, 1.0 + np.asarray(betas, float) / n, tol, iters)

    search = _Search(values, cfg)
    beta, _, tie = _run(search, cfg.mode)
    pileup = beta == 0.0
    theta = 1.0 if pileup else 1.0 + beta / n
    val, sigma, _ = _kernels.exact_profile(x, theta, tol, iters)
    return FitResult(
        theta_hat=theta,
        z_init_hat=float("nan"),
        sigma_hat=float(sigma),
        objective=float(val),
        pileup=pileup,
        method=Method.EXACT,
        mode=cfg.mode,
        diagnostics={"beta_hat": beta, "tie": tie, "kink_slopes": (search.left, search.right)},
    )


def fit_lad(x, cfg: SearchConfig | None = None) -> FitResult:
    cfg = cfg or SearchConfig(mode=Mode.GLOBAL)
    x = _prepare(x)
    if not np.any(x):
        return _degenerate(Method.LAD, cfg.mode)
    n = x.shape[0]

    def values(betas):
        return _kernels.lad_objective_many(x, 1.0 + np.asarray(betas, float) / n)

    search = _Search(values, cfg)
    beta, crit, tie = _run(search, cfg.mode)
    pileup = beta == 0.0
    theta = 1.0 if pileup else 1.0 + beta / n
    z = _kernels.residuals_fwd(x, theta, 0.0) if abs(theta) <= 1 else _kernels.residuals_bwd(x, theta, 0.0)
    return FitResult(
        theta_hat=theta,
        z_init_hat=0.0,
        sigma_hat=float(np.sum(np.abs(z))) / (n + 1),
        objective=float(crit),
        pileup=pileup,
        method=Method.LAD,
        mode=cfg.mode,
        diagnostics={"beta_hat": beta, "tie": tie, "kink_slopes": (search.left, search.right)},
    )


FITTERS = {Method.JOINT: fit_joint, Method.EXACT: fit_exact, Method.LAD: fit_lad}


def fit(x, method: "Method | str", cfg: SearchConfig | None = None) -> FitResult:
    method = Method(method)
    if cfg is None and method is Method.LAD:
        cfg = SearchConfig(mode=Mode.GLOBAL)
    return FITTERS[method](x, cfg)


def with_mode(cfg: SearchConfig, mode: "Mode | str") -> SearchConfig:
    return replace(cfg, mode=Mode.parse(mode))
