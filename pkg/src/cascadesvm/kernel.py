"""Kernel functions on sparse vectors and an LRU cache of kernel-matrix rows."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .dataset import SparseVector

__all__ = ["KernelSpec", "KernelCache", "kernel_eval", "cache_get_row", "MB"]

MB = 1 << 20
KINDS = ("linear", "rbf", "polynomial")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice and parameters.

    rbf: ``exp(-gamma * |a - b|^2)``; linear: ``<a, b>``;
    polynomial: ``(gamma * <a, b> + coef0) ** degree``.
    """

    kind: str = "rbf"
    gamma: float = 1.0
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel {self.kind!r}; choose from {KINDS}")
        if self.kind in ("rbf", "polynomial") and not self.gamma > 0:
            raise ValueError(f"gamma must be > 0 for {self.kind} kernel, got {self.gamma}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError(f"degree must be a positive integer, got {self.degree}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(kind=d["kind"], gamma=float(d["gamma"]), degree=int(d["degree"]), coef0=float(d["coef0"]))


def _sparse_dot(a: SparseVector, b: SparseVector) -> float:
    bd = b.to_dict()
    return math.fsum(v * bd[i] for i, v in zip(a.indices, a.values) if i in bd)


def _sq_dist(a: SparseVector, b: SparseVector) -> float:
    ad, bd = a.to_dict(), b.to_dict()
    return math.fsum((ad.get(i, 0.0) - bd.get(i, 0.0)) ** 2 for i in ad.keys() | bd.keys())


def kernel_eval(spec: KernelSpec, a: SparseVector, b: SparseVector) -> float:
    """Evaluate ``K(a, b)`` for one pair; exactly symmetric in its arguments."""
    if spec.kind == "rbf":
        return math.exp(-spec.gamma * _sq_dist(a, b))
    dot = _sparse_dot(a, b)
    if spec.kind == "linear":
        return dot
    return (spec.gamma * dot + spec.coef0) ** spec.degree


class KernelCache:
    """Rows of the kernel matrix of one dataset, kept under a byte budget.

    ``capacity_bytes=None`` means unbounded; ``0`` disables caching.  Rows are
    computed over the full dataset and evicted least-recently-used first.
    Cached and recomputed rows are bitwise identical since both come from
    :meth:`compute_row`.
    """

    def __init__(self, X: sp.csr_matrix, spec: KernelSpec, capacity_bytes: Optional[int] = None):
        if capacity_bytes is not None and capacity_bytes < 0:
            raise ValueError("capacity_bytes must be >= 0")
        self.X = sp.csr_matrix(X)
        self.spec = spec
        self.capacity_bytes = capacity_bytes
        self.sq_norms = np.asarray(self.X.multiply(self.X).sum(axis=1)).ravel()
        self._rows: "OrderedDict[int, np.ndarray]" = OrderedDict()
        self.nbytes = 0
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def _dense_row(self, i: int) -> np.ndarray:
        X = self.X
        s, e = X.indptr[i], X.indptr[i + 1]
        x = np.zeros(X.shape[1])
        x[X.indices[s:e]] = X.data[s:e]
        return x

    def compute_row(self, i: int) -> np.ndarray:
        dots = self.X @ self._dense_row(i)
        kind = self.spec.kind
        if kind == "linear":
            return dots
        if kind == "polynomial":
            return (self.spec.gamma * dots + self.spec.coef0) ** self.spec.degree
        d2 = self.sq_norms + self.sq_norms[i] - 2.0 * dots
        np.maximum(d2, 0.0, out=d2)
        d2[i] = 0.0
        return np.exp(-self.spec.gamma * d2)

    def diagonal(self) -> np.ndarray:
        kind = self.spec.kind
        if kind == "rbf":
            return np.ones(self.n)
        if kind == "linear":
            return self.sq_norms.copy()
        return (self.spec.gamma * self.sq_norms + self.spec.coef0) ** self.spec.degree

    def get_row(self, i: int, active=None) -> np.ndarray:
        """Kernel values ``K(x_i, x_j)`` for ``j`` in ``active`` (all rows by default)."""
        row = self._rows.get(i)
        if row is not None:
            self.hits += 1
            self._rows.move_to_end(i)
        else:
            self.misses += 1
            row = self.compute_row(i)
            row.setflags(write=False)
            self._store(i, row)
        return row if active is None else row[active]

    def _store(self, i: int, row: np.ndarray) -> None:
        cap = self.capacity_bytes
        if cap is not None and row.nbytes > cap:
            return
        self._rows[i] = row
        self.nbytes += row.nbytes
        while cap is not None and self.nbytes > cap:
            _, old = self._rows.popitem(last=False)
            self.nbytes -= old.nbytes
            self.evictions += 1

    def invalidate(self, i: Optional[int] = None) -> None:
        if i is None:
            self._rows.clear()
            self.nbytes = 0
        elif i in self._rows:
            self.nbytes -= self._rows.pop(i).nbytes

    def __contains__(self, i: int) -> bool:
        return i in self._rows

    def stats(self) -> dict:
        return {
            "hits": self.hits,
            "misses": self.misses,
            "evictions": self.evictions,
            "rows": len(self._rows),
            "bytes": self.nbytes,
        }


def cache_get_row(cache: KernelCache, i: int, active=None) -> np.ndarray:
    return cache.get_row(i, active)
