"""Rigid-transform estimation from matched node centers, with RTE/RRE scoring.

The estimator is RANSAC over 3-point minimal samples with a closed-form
least-squares rotation (SVD of the cross-covariance, reflection-corrected),
refit on the final inlier set. Errors are reported as the translation norm
and rotation angle of the relative transform against ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidInputError

DEFAULT_RANSAC_ITERS = 256
DEFAULT_INLIER_EPS = 0.2
COLLINEAR_EPS = 1e-9

# Success-rate reporting bins: (RTE meters, RRE degrees).
SUCCESS_THRESHOLDS = ((0.5, 5.0), (1.0, 10.0), (2.0, 15.0))


@dataclass(frozen=True)
class RigidTransform:
    """x_b = R @ x_a + t."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        if not np.allclose(self.R.T @ self.R, np.eye(3), atol=1e-9):
            raise InvalidInputError("R is not orthonormal")
        if not math.isclose(float(np.linalg.det(self.R)), 1.0, abs_tol=1e-9):
            raise InvalidInputError("R is not a proper rotation (det != +1)")

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.R.T + self.t

    def to_dict(self) -> dict:
        return {"R": [[float(v) for v in row] for row in self.R],
                "t": [float(v) for v in self.t]}


@dataclass(frozen=True)
class RegistrationError:
    rte: float  # meters
    rre: float  # degrees


def _kabsch(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation/translation mapping point set a onto b."""
    ca = a.mean(axis=0)
    cb = b.mean(axis=0)
    h = (a - ca).T @ (b - cb)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return rot, cb - rot @ ca


def _collinear(points: np.ndarray) -> bool:
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    return s[1] <= COLLINEAR_EPS * max(1.0, s[0])


def estimate_rigid(pairs, iters: int = DEFAULT_RANSAC_ITERS,
                   inlier_eps: float = DEFAULT_INLIER_EPS,
                   seed: int = 0) -> tuple[RigidTransform, list[int]]:
    """RANSAC rigid fit of A positions onto B; returns (transform, inliers)."""
    a = np.asarray([p[0] for p in pairs], dtype=float)
    b = np.asarray([p[1] for p in pairs], dtype=float)
    n = len(pairs)
    if n < 3:
        raise InvalidInputError(f"estimate_rigid needs >= 3 pairs, got {n}")
    if _collinear(a):
        raise DegenerateGeometryError("A positions are collinear")

    rng = np.random.default_rng(seed)
    best_inliers: np.ndarray | None = None
    for _ in range(iters):
        idx = rng.choice(n, size=3, replace=False)
        if _collinear(a[idx]):
            continue
        rot, t = _kabsch(a[idx], b[idx])
        residuals = np.linalg.norm(a @ rot.T + t - b, axis=1)
        inliers = np.where(residuals <= inlier_eps)[0]
        if best_inliers is None or len(inliers) > len(best_inliers):
            best_inliers = inliers
    if best_inliers is None or len(best_inliers) < 3 or _collinear(a[best_inliers]):
        # fall back to a full fit when no hypothesis separated an inlier set
        best_inliers = np.arange(n)
    rot, t = _kabsch(a[best_inliers], b[best_inliers])
    return RigidTransform(R=rot, t=t), [int(i) for i in best_inliers]


def registration_error(est: RigidTransform, gt: RigidTransform) -> RegistrationError:
    """Errors of the relative transform gt^-1 composed with est.

    The rotation angle theta satisfies cos t = (trace(R) - 1) / 2; it is
    extracted with atan2 of the skew part so near-zero angles keep full
    double precision (plain arccos floors out around 1e-6 degrees).
    """
    rel = gt.R.T @ est.R
    cos_angle = np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)
    sin_angle = 0.5 * math.sqrt((rel[2, 1] - rel[1, 2]) ** 2 +
                                (rel[0, 2] - rel[2, 0]) ** 2 +
                                (rel[1, 0] - rel[0, 1]) ** 2)
    rre = math.degrees(math.atan2(sin_angle, cos_angle))
    rte = float(np.linalg.norm(gt.R.T @ (est.t - gt.t)))
    return RegistrationError(rte=rte, rre=rre)


def success_flags(err: RegistrationError) -> list[dict]:
    """Pass/fail against the three standard (RTE, RRE) threshold pairs."""
    return [
        {"rte_threshold": rte_th, "rre_threshold": rre_th,
         "success": err.rte <= rte_th and err.rre <= rre_th}
        for rte_th, rre_th in SUCCESS_THRESHOLDS
    ]
