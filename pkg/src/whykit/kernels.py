"""RBF kernel helpers shared by prototype selection and distribution metrics."""

from __future__ import annotations

import numpy as np

from .errors import InvalidBandwidth


def pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    aa = (A * A).sum(axis=1)[:, None]
    bb = (B * B).sum(axis=1)[None, :]
    sq = aa + bb - 2.0 * (A @ B.T)
    return np.maximum(sq, 0.0)


def rbf_kernel(A: np.ndarray, B: np.ndarray, bandwidth: float) -> np.ndarray:
    """exp(-||a - b||^2 / (2 * bandwidth^2))"""
    if not np.isfinite(bandwidth) or bandwidth <= 0:
        raise InvalidBandwidth(f"bandwidth must be positive, got {bandwidth!r}")
    return np.exp(-pairwise_sq_dists(A, B) / (2.0 * bandwidth**2))


def median_bandwidth(Z: np.ndarray) -> float:
    """Median of the positive pairwise distances (the usual heuristic)."""
    Z = np.atleast_2d(Z)
    if Z.shape[0] < 2:
        raise InvalidBandwidth("need at least two points to derive a bandwidth")
    d = np.sqrt(pairwise_sq_dists(Z, Z))
    vals = d[np.triu_indices(Z.shape[0], k=1)]
    vals = vals[vals > 0]
    if vals.size == 0:
        raise InvalidBandwidth("all points coincide; bandwidth is undefined")
    return float(np.median(vals))


def resolve_bandwidth(Z: np.ndarray, bandwidth: float | str) -> float:
    if isinstance(bandwidth, str):
        if bandwidth != "median":
            raise InvalidBandwidth(f"unknown bandwidth rule {bandwidth!r}")
        return median_bandwidth(Z)
    if not np.isfinite(bandwidth) or bandwidth <= 0:
        raise InvalidBandwidth(f"bandwidth must be positive, got {bandwidth!r}")
    return float(bandwidth)
