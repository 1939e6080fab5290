"""
von Mises-Fisher and Kent distributions on the unit sphere.

Unnormalized log-densities, ambient score functions (gradients of the log
density with respect to the data point), score Jacobians, and the two
model-specific quantities the sphere objective consumes: the tangential
squared score and the intrinsic Laplacian of the log density. Normalising
constants are deliberately absent; nothing here needs them.

Every operation broadcasts over leading point axes, so `x` may be a single
(3,) vector or an (n, 3) batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .geometry import laplace_beltrami, manifold_inner, unit_vector

# Concentrations above this are treated as degenerate by the baselines and
# flagged rather than refined further.
KAPPA_CAP = 1e6


@dataclass(frozen=True)
class VmfParams:
    """
    von Mises-Fisher parameters: mean direction and concentration.

    `mu` is normalized at construction; `kappa` must be positive.
    """

    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        mu = unit_vector(np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "kappa", float(self.kappa))
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")


@dataclass(frozen=True)
class KentParams:
    """
    Kent parameters on S^2: orthonormal frame, concentration and ovalness.

    The frame {mu, gamma1, gamma2} is re-orthonormalized by Gram-Schmidt
    from the supplied vectors, so inputs need only be roughly orthogonal.
    The ovalness convention pairs +alpha with gamma1 and -alpha with
    gamma2 (the two ovalness coefficients sum to zero). Unimodality
    requires 2*alpha < kappa, enforced here.
    """

    mu: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    kappa: float
    alpha: float = 0.0

    def __post_init__(self):
        mu = unit_vector(np.asarray(self.mu, dtype=float))
        g1 = np.asarray(self.gamma1, dtype=float)
        g1 = g1 - np.dot(mu, g1) * mu
        n1 = np.linalg.norm(g1)
        if n1 < 1e-8:
            raise ValueError("gamma1 is (near-)parallel to mu; cannot build a frame")
        g1 = g1 / n1
        g2 = np.asarray(self.gamma2, dtype=float)
        g2 = g2 - np.dot(mu, g2) * mu - np.dot(g1, g2) * g1
        n2 = np.linalg.norm(g2)
        if n2 < 1e-8:
            raise ValueError("gamma2 lies in the span of mu and gamma1")
        g2 = g2 / n2
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma1", g1)
        object.__setattr__(self, "gamma2", g2)
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "alpha", float(self.alpha))
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if not 2.0 * self.alpha < self.kappa:
            raise ValueError(
                f"unimodality requires 2*alpha < kappa, got alpha={self.alpha}, "
                f"kappa={self.kappa}"
            )

    def frame(self) -> np.ndarray:
        """Orthonormal frame as columns (mu, gamma1, gamma2) of a 3x3 matrix."""
        return np.stack([self.mu, self.gamma1, self.gamma2], axis=1)


ModelParams = Union[VmfParams, KentParams]


def log_unnormalized_density(params: ModelParams, x: np.ndarray) -> float | np.ndarray:
    """
    Log density without the normalising constant.

    vMF: kappa * mu.x; Kent adds alpha * ((gamma1.x)^2 - (gamma2.x)^2).
    """
    x = np.asarray(x, dtype=float)
    if isinstance(params, VmfParams):
        out = params.kappa * (x @ params.mu)
    else:
        t1 = x @ params.gamma1
        t2 = x @ params.gamma2
        out = params.kappa * (x @ params.mu) + params.alpha * (t1 * t1 - t2 * t2)
    return float(out) if np.ndim(out) == 0 else out


def score(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """
    Ambient gradient of the log density at x.

    vMF: kappa * mu, independent of x. Kent adds
    2*alpha*(gamma1 (gamma1.x) - gamma2 (gamma2.x)). Tangential projection
    is left to the call sites that need it.
    """
    x = np.asarray(x, dtype=float)
    base = params.kappa * params.mu
    if isinstance(params, VmfParams):
        return np.broadcast_to(base, x.shape).copy()
    t1 = x @ params.gamma1
    t2 = x @ params.gamma2
    return (
        base
        + 2.0 * params.alpha * (np.multiply.outer(t1, params.gamma1) - np.multiply.outer(t2, params.gamma2))
    )


def score_jacobian(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """
    Ambient Jacobian of the score at x.

    Zero for vMF; the constant outer-product form
    2*alpha*(gamma1 gamma1^T - gamma2 gamma2^T) for Kent.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(params, VmfParams):
        jac = np.zeros((3, 3))
    else:
        jac = 2.0 * params.alpha * (
            np.outer(params.gamma1, params.gamma1) - np.outer(params.gamma2, params.gamma2)
        )
    return np.broadcast_to(jac, x.shape[:-1] + (3, 3)).copy()


def model_inner_product_term(params: ModelParams, x: np.ndarray) -> float | np.ndarray:
    """Tangential squared score <psi, psi>_M at x; kappa^2 (1 - (mu.x)^2) for vMF."""
    psi = score(params, x)
    return manifold_inner(x, psi, psi)


def model_laplacian_term(params: ModelParams, x: np.ndarray) -> float | np.ndarray:
    """Intrinsic Laplacian of the log density at x; -2 kappa mu.x for vMF."""
    return laplace_beltrami(x, score(params, x), score_jacobian(params, x))


@dataclass(frozen=True)
class _KentArrays:
    """Frame unpacked for the vectorized objective; internal."""

    mu: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    kappa: float
    alpha: float


def batch_terms(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-point (score, <psi,psi>_M, Laplacian) for a batch of points.

    Equivalent to calling the three scalar operations pointwise; kept as a
    single pass so the estimator's hot loop stays cheap.

    Args:
        params: model parameters.
        x: Points (n, 3).

    Returns:
        (psi (n, 3), inner (n,), laplacian (n,)).
    """
    x = np.asarray(x, dtype=float)
    if isinstance(params, VmfParams):
        t = x @ params.mu
        psi = np.broadcast_to(params.kappa * params.mu, x.shape).copy()
        inner = params.kappa**2 * (1.0 - t * t)
        lap = -2.0 * params.kappa * t
        return psi, inner, lap
    t0 = x @ params.mu
    t1 = x @ params.gamma1
    t2 = x @ params.gamma2
    psi = (
        params.kappa * params.mu
        + 2.0 * params.alpha * (np.multiply.outer(t1, params.gamma1) - np.multiply.outer(t2, params.gamma2))
    )
    xpsi = np.sum(x * psi, axis=-1)
    inner = np.sum(psi * psi, axis=-1) - xpsi * xpsi
    # tr(P H) = tr(H) - x^T H x with tr(H) = 0 for the Kent Jacobian.
    lap = -2.0 * params.alpha * (t1 * t1 - t2 * t2) - 2.0 * xpsi
    return psi, inner, lap
