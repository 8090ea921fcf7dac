"""Point cloud geometry: sensor ranges, surface normals, incidence angles.

All functions accept either a single point of shape (3,) or a cloud of
shape (n, 3) and return matching scalar/array results. Clouds are plain
float64 numpy arrays; no wrapper classes.
"""

from typing import NamedTuple

import numpy as np

from .errors import DegenerateRay, InsufficientPoints

# chunk size for the pairwise-distance sweep in k-NN search; bounds peak
# memory at roughly chunk * n * 8 bytes
_KNN_CHUNK = 512


class NormalEstimate(NamedTuple):
    """Per-point unit normals plus a flag for ill-conditioned neighborhoods."""

    vectors: np.ndarray    # (n, 3) unit normals, oriented toward the sensor
    degenerate: np.ndarray  # (n,) bool, True where the PCA fallback was used


def _as_cloud(points):
    """Coerce input to a float64 (n, 3) array, remembering if it was a single point."""
    arr = np.asarray(points, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected shape (n, 3) or (3,), got {arr.shape}")
    return arr, single


def _as_vec3(v, name):
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {np.shape(v)}")
    return arr


def range_to_sensor(points, sensor):
    """Euclidean distance from each point to the sensor position.

    Returns a scalar for a (3,) input, an (n,) array for an (n, 3) cloud.
    """
    pts, single = _as_cloud(points)
    sensor = _as_vec3(sensor, "sensor")
    r = np.linalg.norm(pts - sensor, axis=1)
    return float(r[0]) if single else r


def incidence_cosine(points, normals, sensor):
    """Absolute cosine between the sensor->point ray and the surface normal.

    Clamped to [0, 1]. Raises DegenerateRay if any point sits exactly at
    the sensor position.
    """
    pts, single = _as_cloud(points)
    nrm, nsingle = _as_cloud(normals)
    if single != nsingle or len(pts) != len(nrm):
        raise ValueError("points and normals must have matching shapes")
    sensor = _as_vec3(sensor, "sensor")
    rays = pts - sensor
    r = np.linalg.norm(rays, axis=1)
    if np.any(r == 0.0):
        raise DegenerateRay("point coincides with the sensor position")
    cos = np.abs(np.sum(rays / r[:, None] * nrm, axis=1))
    cos = np.clip(cos, 0.0, 1.0)
    return float(cos[0]) if single else cos


def _knn_indices(pts, k):
    """Indices of the k nearest neighbors of every point (self excluded).

    Neighbors are ordered by squared distance; exact ties are broken by the
    lower point index (stable sort), which keeps results reproducible across
    platforms. Brute force in chunks: clouds here are benchmark-sized
    (thousands of points), where this beats tree construction and has no
    tie-ordering ambiguity.
    """
    n = len(pts)
    sq = np.einsum("ij,ij->i", pts, pts)
    out = np.empty((n, k), dtype=np.intp)
    for start in range(0, n, _KNN_CHUNK):
        stop = min(start + _KNN_CHUNK, n)
        block = pts[start:stop]
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (block @ pts.T)
        np.maximum(d2, 0.0, out=d2)  # clip rounding negatives
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")
        out[start:stop] = order[:, :k]
    return out


def estimate_normals(points, k, sensor):
    """Per-point surface normals from PCA over k-nearest-neighbor sets.

    For each point the k nearest neighbors (Euclidean, ties to the lower
    index) are gathered, and the normal is the eigenvector of the smallest
    eigenvalue of the neighborhood covariance. Normals are flipped to face
    the sensor: dot(normal, sensor - point) >= 0.

    A neighborhood is degenerate when its two smallest principal variances
    are indistinguishable at relative tolerance 1e-9 (collinear or isotropic
    sets included); those points fall back to the unit vector pointing at
    the sensor and are flagged.

    :param points: (n, 3) cloud; n must exceed k.
    :param k: neighborhood size, at least 3.
    :param sensor: sensor position, 3-vector.
    :returns: NormalEstimate(vectors, degenerate).
    """
    pts, _ = _as_cloud(points)
    sensor = _as_vec3(sensor, "sensor")
    if k < 3:
        raise ValueError(f"k must be >= 3, got {k}")
    n = len(pts)
    if n <= k:
        raise InsufficientPoints(f"need more than k={k} points, got {n}")

    nbrs = _knn_indices(pts, k)
    nbhd = pts[nbrs]                                   # (n, k, 3)
    centered = nbhd - nbhd.mean(axis=1, keepdims=True)
    cov = centered.transpose(0, 2, 1) @ centered / k   # (n, 3, 3)

    evals, evecs = np.linalg.eigh(cov)                 # ascending eigenvalues
    normals = evecs[:, :, 0].copy()
    lam0, lam1, lam2 = evals[:, 0], evals[:, 1], evals[:, 2]
    degenerate = (lam1 - lam0) <= 1e-9 * np.maximum(lam2, 0.0)

    to_sensor = sensor - pts
    flip = np.sum(normals * to_sensor, axis=1) < 0.0
    normals[flip] *= -1.0

    # eigh vectors are orthonormal to machine precision; renormalize anyway
    # so the unit-length contract holds exactly where it is cheap to enforce
    normals /= np.linalg.norm(normals, axis=1)[:, None]

    if degenerate.any():
        d = to_sensor[degenerate]
        dist = np.linalg.norm(d, axis=1)
        if np.any(dist == 0.0):
            raise DegenerateRay(
                "degenerate neighborhood at the sensor position has no fallback normal"
            )
        normals[degenerate] = d / dist[:, None]

    return NormalEstimate(vectors=normals, degenerate=degenerate)
