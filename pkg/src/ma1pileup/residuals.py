"""Residual recursions and the concentrated joint Laplace objective.

For the model ``X_t = Z_t - theta Z_{t-1}`` the residuals ``z_0..z_n`` are
solved forward from ``z_0 = z_init`` when ``|theta| <= 1`` and backward from
``z_n = z_init + sum(X)`` otherwise.  Both recursions are affine in
``z_init``, which is what makes the profile over ``z_init`` exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .noise import Ma1Sample


def _as_series(x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("x must be a non-empty 1-d sequence")
    return x


def residuals_forward(x, theta: float, z_init: float) -> np.ndarray:
    if abs(theta) > 1.0:
        raise ValueError(f"forward recursion needs |theta| <= 1, got {theta}")
    return _kernels.residuals_fwd(_as_series(x), float(theta), float(z_init))


def residuals_backward(x, theta: float, z_init: float) -> np.ndarray:
    if theta == 0.0:
        raise ValueError("backward recursion is undefined at theta = 0")
    if abs(theta) < 1.0:
        raise ValueError(f"backward recursion needs |theta| >= 1, got {theta}")
    return _kernels.residuals_bwd(_as_series(x), float(theta), float(z_init))


def residuals(x, theta: float, z_init: float) -> np.ndarray:
    """Residuals from whichever recursion the branch of ``theta`` prescribes."""
    if abs(theta) <= 1.0:
        return residuals_forward(x, theta, z_init)
    return residuals_backward(x, theta, z_init)


@dataclass(frozen=True)
class AffineResiduals:
    """``z_t(z_init) = a[t] + b[t] * z_init`` at a fixed ``theta``."""

    a: np.ndarray
    b: np.ndarray
    theta: float

    def at(self, z_init: float) -> np.ndarray:
        return self.a + self.b * z_init


def affine_decomposition(x, theta: float) -> AffineResiduals:
    x = _as_series(x)
    theta = float(theta)
    a, b = _kernels.affine(x, theta)
    return AffineResiduals(a, b, theta)


@dataclass(frozen=True)
class ObjectiveValue:
    ell: float
    sum_abs: float
    sigma_hat: float


def objective(x, theta: float, z_init: float) -> ObjectiveValue:
    """The joint objective: ``sum|z_t|``, times ``|theta|`` in the non-invertible branch."""
    z = residuals(x, theta, z_init)
    s = float(np.sum(np.abs(z)))
    ell = s * abs(theta) if abs(theta) > 1.0 else s
    return ObjectiveValue(ell=ell, sum_abs=s, sigma_hat=s / len(z))


def u_n(beta: float, alpha: float, sample: Ma1Sample) -> float:
    """Centered objective in the local parameterization around the truth.

    ``theta = 1 + beta/n`` and ``z_init = Z_0 + alpha/sqrt(n)``; the noise is
    standardized so the scale is 1.  Needs the true innovations, hence
    simulation diagnostics only.
    """
    n = sample.n
    theta = 1.0 + beta / n
    z_init = sample.z[0] + alpha / math.sqrt(n)
    base = objective(sample.x, 1.0, sample.z[0]).ell
    return objective(sample.x, theta, z_init).ell - base
