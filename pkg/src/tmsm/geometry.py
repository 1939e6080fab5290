"""
Core geometry of the unit 2-sphere embedded in R^3.

Coordinate charts, tangent-space projection, the manifold inner product and
the Laplace-Beltrami evaluation that every spherical model shares. All
functions are pure and broadcast over leading axes: points are arrays whose
last axis has length 3 (embedding coordinates) or scalar/array pairs of
chart angles.

Chart convention: a point is (a, b) with a in [0, pi] the polar angle
measured from the +x1 axis and b in [0, 2*pi) the azimuth in the x2-x3
plane, so x = (cos a, sin a cos b, sin a sin b). All angles are radians.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * np.pi

# Chart points closer to a pole than this use rotated-frame fallbacks where
# the (a, b) Jacobian is singular.
POLE_SIN_TOL = 1e-6


class SphericalCoord(NamedTuple):
    """Chart angles (a, b); fields may be scalars or broadcastable arrays."""

    a: float | np.ndarray
    b: float | np.ndarray


def wrap_azimuth(b: float | np.ndarray) -> float | np.ndarray:
    """Wrap an azimuth to [0, 2*pi)."""
    return np.mod(b, TWO_PI)


def unit_vector(x: np.ndarray) -> np.ndarray:
    """
    Normalize vector(s) onto the unit sphere.

    Args:
        x: Array [..., 3] of nonzero vectors.

    Returns:
        Array of the same shape with unit rows.

    Raises:
        ValueError: if any input row has vanishing norm.
    """
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norm < 1e-300):
        raise ValueError("cannot normalize a zero vector onto the sphere")
    return x / norm


def is_unit(x: np.ndarray, tol: float = 1e-12) -> bool:
    """Check the unit-norm invariant (squared norm within tol of 1)."""
    x = np.asarray(x, dtype=float)
    return bool(np.all(np.abs(np.sum(x * x, axis=-1) - 1.0) <= tol))


def to_euclidean(a: float | np.ndarray, b: float | np.ndarray) -> np.ndarray:
    """
    Map chart angles to embedding coordinates.

    Args:
        a: Polar angle(s) in [0, pi] (values outside are accepted and wrap
            through the trig functions; callers should stay in range).
        b: Azimuth(s), any real, taken mod 2*pi.

    Returns:
        Array [..., 3] of unit vectors (cos a, sin a cos b, sin a sin b).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sa = np.sin(a)
    return np.stack([np.cos(a), sa * np.cos(b), sa * np.sin(b)], axis=-1)


def to_spherical(x: np.ndarray) -> SphericalCoord:
    """
    Map embedding coordinates to chart angles.

    Inverse of :func:`to_euclidean` away from the poles. At a pole
    (|x1| = 1) the azimuth is set to 0 by convention.

    Args:
        x: Unit vector(s) [..., 3].

    Returns:
        SphericalCoord with a = arccos(x1) and b = atan2(x3, x2) in [0, 2*pi).
    """
    x = np.asarray(x, dtype=float)
    a = np.arccos(np.clip(x[..., 0], -1.0, 1.0))
    b = wrap_azimuth(np.arctan2(x[..., 2], x[..., 1]))
    # atan2(0, 0) already yields 0 at the poles; make the convention explicit
    # for points that are numerically on-axis.
    on_pole = np.hypot(x[..., 1], x[..., 2]) == 0.0
    b = np.where(on_pole, 0.0, b)
    if b.ndim == 0:
        return SphericalCoord(float(a), float(b))
    return SphericalCoord(a, b)


def projection(x: np.ndarray) -> np.ndarray:
    """
    Orthogonal projection onto the tangent plane at x.

    Args:
        x: Unit vector(s) [..., 3].

    Returns:
        Matrix [..., 3, 3] equal to I - x x^T; symmetric, idempotent,
        annihilates x, trace 2.
    """
    x = np.asarray(x, dtype=float)
    eye = np.broadcast_to(np.eye(3), x.shape + (3,))
    return eye - x[..., :, None] * x[..., None, :]


def project_tangent(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Project ambient vector(s) v onto the tangent plane at x."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - np.sum(x * v, axis=-1, keepdims=True) * x


def manifold_inner(x: np.ndarray, u: np.ndarray, v: np.ndarray) -> float | np.ndarray:
    """
    Inner product of two ambient vectors after projection at x.

    (P u)^T (P v) = u^T v - (x^T u)(x^T v) since P is an orthogonal
    projection.

    Args:
        x: Base point(s) [..., 3].
        u, v: Ambient vector(s) [..., 3].

    Returns:
        Scalar or array of tangential inner products.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    out = np.sum(u * v, axis=-1) - np.sum(x * u, axis=-1) * np.sum(x * v, axis=-1)
    return float(out) if out.ndim == 0 else out


def laplace_beltrami(x: np.ndarray, grad: np.ndarray, hess: np.ndarray) -> float | np.ndarray:
    """
    Laplace-Beltrami value from ambient first and second derivatives.

    For a function on the sphere with ambient extension f, the intrinsic
    Laplacian at x is tr(P H) - 2 x^T grad where grad and H are the ambient
    gradient and Hessian of f at x. Reproduces the classical identity
    Delta(c^T x) = -2 c^T x for linear forms.

    Args:
        x: Base point(s) [..., 3].
        grad: Ambient gradient(s) [..., 3].
        hess: Ambient Hessian(s) [..., 3, 3].

    Returns:
        Scalar or array of intrinsic Laplacian values.
    """
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    tr = np.trace(hess, axis1=-2, axis2=-1)
    xhx = np.sum(x * np.matmul(hess, x[..., None])[..., 0], axis=-1)
    out = tr - xhx - 2.0 * np.sum(x * grad, axis=-1)
    return float(out) if out.ndim == 0 else out


def geodesic_angle(x: np.ndarray, y: np.ndarray) -> float | np.ndarray:
    """Great-circle angle between unit vectors, arccos of the clipped dot."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.arccos(np.clip(np.sum(x * y, axis=-1), -1.0, 1.0))
    return float(out) if out.ndim == 0 else out


def complete_frame(mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Build two unit vectors completing mu to an orthonormal triad.

    The completion is deterministic: the seed axis is whichever coordinate
    axis is least aligned with mu.

    Args:
        mu: Unit vector (3,).

    Returns:
        (v1, v2) with {mu, v1, v2} orthonormal and right-handed.
    """
    mu = unit_vector(np.asarray(mu, dtype=float))
    seed = np.zeros(3)
    seed[int(np.argmin(np.abs(mu)))] = 1.0
    v1 = unit_vector(np.cross(mu, seed))
    v2 = np.cross(mu, v1)
    return v1, v2


def rotation_between(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """
    Rotation matrix carrying unit vector src onto unit vector dst.

    Uses the Rodrigues form about src x dst; falls back to identity for
    src == dst and to a half-turn about a perpendicular axis for
    antipodal inputs.
    """
    src = unit_vector(np.asarray(src, dtype=float))
    dst = unit_vector(np.asarray(dst, dtype=float))
    c = float(np.dot(src, dst))
    axis = np.cross(src, dst)
    s = float(np.linalg.norm(axis))
    if s < 1e-15:
        if c > 0.0:
            return np.eye(3)
        perp, _ = complete_frame(src)
        return 2.0 * np.outer(perp, perp) - np.eye(3)
    axis = axis / s
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def rotation_from_angles(r1: float, r2: float, r3: float) -> np.ndarray:
    """Rotation matrix Rx(r1) Ry(r2) Rz(r3) from three angles."""
    c1, s1 = np.cos(r1), np.sin(r1)
    c2, s2 = np.cos(r2), np.sin(r2)
    c3, s3 = np.cos(r3), np.sin(r3)
    rx = np.array([[1, 0, 0], [0, c1, -s1], [0, s1, c1]], dtype=float)
    ry = np.array([[c2, 0, s2], [0, 1, 0], [-s2, 0, c2]], dtype=float)
    rz = np.array([[c3, -s3, 0], [s3, c3, 0], [0, 0, 1]], dtype=float)
    return rx @ ry @ rz
