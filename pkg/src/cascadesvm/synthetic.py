"""Seeded synthetic datasets used by the tests, the acceptance suite and the CLI."""

from __future__ import annotations

import numpy as np

from .dataset import Dataset

__all__ = ["separable", "collinear", "noisy_blobs", "xor"]


def separable(n: int, seed: int, dim: int = 2, margin: float = 0.1) -> Dataset:
    """Linearly separable points in ``[-1, 1]^dim`` with a gap of ``2*margin``.

    The separating hyperplane has a random unit normal and offset; points
    falling inside the gap are rejected and redrawn.  Both classes get about
    ``n / 2`` points.
    """
    rng = np.random.default_rng(seed)
    w = rng.normal(size=dim)
    w /= np.linalg.norm(w)
    b = rng.uniform(-0.2, 0.2)
    pts = []
    while len(pts) < n:
        x = rng.uniform(-1, 1, size=(2 * n, dim))
        s = x @ w + b
        keep = np.abs(s) > margin
        pts.extend(x[keep])
    X = np.asarray(pts[:n])
    y = np.where(X @ w + b > 0, 1, -1)
    return Dataset.from_arrays(X, y)


def collinear(n: int, seed: int, margin: float = 0.2) -> Dataset:
    """Separable points on a single line through the plane.

    Positives lie at distance ``margin..3`` along a fixed direction, negatives
    the same distance the other way.  With a linear kernel the innermost point
    of each class is the whole support set, and any subset holding both
    classes keeps its own innermost points, so filtering never loses them.
    """
    rng = np.random.default_rng(seed)
    n_pos = n // 2
    s = np.concatenate([rng.uniform(margin, 3, n_pos), -rng.uniform(margin, 3, n - n_pos)])
    X = s[:, None] * np.array([0.6, 0.8]) + np.array([0.1, -0.3])
    order = rng.permutation(n)
    return Dataset.from_arrays(X[order], np.where(s > 0, 1, -1)[order])


def noisy_blobs(n: int, seed: int, pos_fraction: float = 0.5, spread: float = 1.0, dim: int = 2) -> Dataset:
    """Two overlapping Gaussian blobs centred at ``-1`` and ``+1`` on every axis."""
    rng = np.random.default_rng(seed)
    n_pos = int(round(n * pos_fraction))
    n_neg = n - n_pos
    Xp = rng.normal(loc=1.0, scale=spread, size=(n_pos, dim))
    Xn = rng.normal(loc=-1.0, scale=spread, size=(n_neg, dim))
    X = np.vstack([Xp, Xn])
    y = np.concatenate([np.ones(n_pos, dtype=int), -np.ones(n_neg, dtype=int)])
    order = rng.permutation(n)
    return Dataset.from_arrays(X[order], y[order])


def xor() -> Dataset:
    """The four XOR corners in 2-D."""
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    return Dataset.from_arrays(X, [-1, -1, 1, 1])
