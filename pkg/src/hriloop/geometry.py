"""Point-set alignment utilities."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateGeometryError
from .rotations import matrix_to_quat
from .skeleton import RigidTransform

_RANK_TOL = 1e-10


def procrustes_align(
    source: np.ndarray, target: np.ndarray
) -> tuple[RigidTransform, float]:
    """Best similarity transform (rotation, translation, scale) mapping
    source points onto target points in the least-squares sense.

    Returns the transform and the RMS residual after alignment. Degenerate
    configurations (cross-covariance rank below 3) raise rather than
    returning a pseudo-solution.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape or source.ndim != 2 or source.shape[1] != 3:
        raise ValueError(f"point sets must both be (N, 3), got {source.shape} vs {target.shape}")
    n = source.shape[0]
    if n < 3:
        raise DegenerateGeometryError("need at least 3 point correspondences")

    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    sc = source - mu_s
    tc = target - mu_t
    var_s = float(np.mean(np.sum(sc * sc, axis=1)))
    if var_s < _RANK_TOL:
        raise DegenerateGeometryError("source points are coincident")

    cov = (tc.T @ sc) / n
    u, d, vt = np.linalg.svd(cov)
    if d[0] < _RANK_TOL or d[2] < _RANK_TOL * d[0]:
        raise DegenerateGeometryError(
            f"cross-covariance is rank deficient (singular values {d})"
        )
    s = np.eye(3)
    if np.linalg.det(u @ vt) < 0:
        s[2, 2] = -1.0
    rot = u @ s @ vt
    scale = float(np.trace(np.diag(d) @ s)) / var_s
    trans = mu_t - scale * (rot @ mu_s)

    transform = RigidTransform(rotation=matrix_to_quat(rot), translation=trans, scale=scale)
    aligned = transform.apply(source)
    residual = float(np.sqrt(np.mean(np.sum((aligned - target) ** 2, axis=1))))
    return transform, residual
