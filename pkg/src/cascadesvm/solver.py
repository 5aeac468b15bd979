"""Soft-margin kernel SVM trained by SMO, and the resulting model."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .dataset import Dataset, SparseVector
from .kernel import MB, KernelCache, KernelSpec

__all__ = [
    "TrainingError",
    "SolverConfig",
    "SvmModel",
    "smo_train",
    "decision_value",
    "predict",
    "accuracy",
    "SV_THRESHOLD",
]

log = logging.getLogger(__name__)

# alpha above this counts as a support vector
SV_THRESHOLD = 1e-12
# curvature floor for non-positive-definite pairs (LibSVM's TAU)
TAU = 1e-12
MODEL_FORMAT = "cascadesvm-model"


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """SMO parameters.  ``cache_mb=None`` means an unbounded row cache."""

    C: float = 1.0
    tol: float = 1e-3
    max_iter: int = 10_000_000
    cache_mb: Optional[float] = 100
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be > 0, got {self.C}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.cache_mb is not None and self.cache_mb < 0:
            raise ValueError("cache_mb must be >= 0")

    @property
    def cache_bytes(self) -> Optional[int]:
        return None if self.cache_mb is None else int(self.cache_mb * MB)

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "cache_mb": self.cache_mb,
            "kernel": self.kernel.to_dict(),
        }


def _kernel_block(spec: KernelSpec, A: sp.csr_matrix, A_sq: np.ndarray, B: sp.csr_matrix) -> np.ndarray:
    """``K[i, j] = K(A_i, B_j)`` as a dense array."""
    dots = (A @ B.T).toarray()
    if spec.kind == "linear":
        return dots
    if spec.kind == "polynomial":
        return (spec.gamma * dots + spec.coef0) ** spec.degree
    B_sq = np.asarray(B.multiply(B).sum(axis=1)).ravel()
    d2 = A_sq[:, None] + B_sq[None, :] - 2.0 * dots
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-spec.gamma * d2)


@dataclass(eq=False)
class SvmModel:
    """Trained binary classifier ``f(x) = sum_i coef_i K(sv_i, x) + bias``.

    ``svs`` keeps the support vectors with their labels and sample ids;
    ``coef`` holds the signed duals ``y_i * alpha_i``.  ``support`` gives the
    support vectors' row positions in the training dataset when the model
    came out of :func:`smo_train`.
    """

    svs: Dataset
    coef: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float = float("inf")
    converged: bool = True
    iterations: int = 0
    gap: float = 0.0
    support: Optional[np.ndarray] = None
    n_train: Optional[int] = None

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=np.float64).reshape(-1)
        if len(self.svs) != self.coef.size:
            raise ValueError("one coefficient per support vector required")
        self._sv_sq = np.asarray(self.svs.X.multiply(self.svs.X).sum(axis=1)).ravel()

    @property
    def n_sv(self) -> int:
        return self.coef.size

    @property
    def sv_ids(self) -> np.ndarray:
        return self.svs.ids

    def decision_function(self, X: Union[Dataset, sp.spmatrix, np.ndarray], chunk: int = 4096) -> np.ndarray:
        if isinstance(X, Dataset):
            X = X.X
        X = sp.csr_matrix(X, dtype=np.float64)
        out = np.full(X.shape[0], self.bias, dtype=np.float64)
        if self.n_sv == 0 or X.shape[0] == 0:
            return out
        S = self.svs.X
        dim = max(S.shape[1], X.shape[1])
        if S.shape[1] != dim:
            S = sp.csr_matrix((S.data, S.indices, S.indptr), shape=(S.shape[0], dim))
        if X.shape[1] != dim:
            X = sp.csr_matrix((X.data, X.indices, X.indptr), shape=(X.shape[0], dim))
        for start in range(0, X.shape[0], chunk):
            block = _kernel_block(self.kernel, S, self._sv_sq, X[start:start + chunk])
            out[start:start + chunk] = self.coef @ block + self.bias
        return out

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1).astype(np.int8)

    def summary(self) -> dict:
        return {
            "n_sv": self.n_sv,
            "n_sv_positive": int(np.count_nonzero(self.coef > 0)),
            "n_sv_negative": int(np.count_nonzero(self.coef < 0)),
            "bias": self.bias,
            "converged": self.converged,
            "iterations": self.iterations,
            "gap": self.gap,
        }

    # serialization

    def to_dict(self) -> dict:
        X = self.svs.X
        svs = []
        for k in range(self.n_sv):
            s, e = X.indptr[k], X.indptr[k + 1]
            svs.append({
                "label": int(self.svs.y[k]),
                "coef": float(self.coef[k]),
                "id": int(self.svs.ids[k]),
                "features": [[int(j) + 1, float(v)] for j, v in zip(X.indices[s:e], X.data[s:e])],
            })
        return {
            "format": MODEL_FORMAT,
            "version": 1,
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "bias": self.bias,
            "dim": self.svs.dim,
            "converged": self.converged,
            "iterations": self.iterations,
            "support_vectors": svs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} document")
        rows = d["support_vectors"]
        indptr, indices, data = [0], [], []
        for r in rows:
            for j, v in r["features"]:
                indices.append(int(j) - 1)
                data.append(float(v))
            indptr.append(len(indices))
        X = sp.csr_matrix(
            (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int32), np.asarray(indptr)),
            shape=(len(rows), int(d["dim"])),
        )
        svs = Dataset(X, np.array([r["label"] for r in rows], dtype=np.int8),
                      np.array([r.get("id", k) for k, r in enumerate(rows)], dtype=np.int64))
        return cls(
            svs=svs,
            coef=np.array([r["coef"] for r in rows], dtype=np.float64),
            bias=float(d["bias"]),
            kernel=KernelSpec.from_dict(d["kernel"]),
            C=float(d["C"]),
            converged=bool(d.get("converged", True)),
            iterations=int(d.get("iterations", 0)),
        )

    def dumps(self) -> str:
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=1, allow_nan=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SvmModel":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "SvmModel":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


@dataclass
class SmoState:
    """Final dual state of one SMO run (full-length arrays over the training set)."""

    alpha: np.ndarray
    grad: np.ndarray
    bias: float
    iterations: int
    gap: float
    converged: bool
    seconds: float
    cache_stats: dict


def _bias(alpha, grad, y, C) -> float:
    score = -y * grad
    free = (alpha > SV_THRESHOLD) & (alpha < C)
    if np.any(free):
        return float(np.mean(score[free]))
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    lo = score[up].max() if np.any(up) else score[low].min()
    hi = score[low].min() if np.any(low) else score[up].max()
    return float((lo + hi) / 2.0)


def smo_solve(ds: Dataset, cfg: SolverConfig) -> SmoState:
    """Run SMO with maximal-violating-pair selection and return the dual state.

    Minimizes ``0.5 a'Qa - e'a`` with ``Q_ij = y_i y_j K_ij`` under
    ``0 <= a <= C`` and ``y'a = 0``.  Terminates when the violating-pair gap
    ``max_{I_up} -y_t G_t - min_{I_low} -y_t G_t`` drops to ``tol``.
    """
    n = len(ds)
    if ds.n_positive == 0 or ds.n_negative == 0:
        raise TrainingError(
            f"training set needs both classes (got {ds.n_positive} positive, {ds.n_negative} negative)"
        )
    t0 = time.perf_counter()
    y = ds.y.astype(np.float64)
    C = float(cfg.C)
    cache = KernelCache(ds.X, cfg.kernel, cfg.cache_bytes)
    diag = cache.diagonal()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    neg = ~pos

    it = 0
    gap = np.inf
    converged = False
    while True:
        score = -y * grad
        at_upper = alpha >= C
        at_lower = alpha <= 0
        up = (pos & ~at_upper) | (neg & ~at_lower)
        low = (pos & ~at_lower) | (neg & ~at_upper)
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = float(score[i] - score[j])
        if gap <= cfg.tol:
            converged = True
            break
        if it >= cfg.max_iter:
            break
        it += 1

        Ki = cache.get_row(i)
        Kj = cache.get_row(j)
        curv = diag[i] + diag[j] - 2.0 * Ki[j]
        if curv <= 0:
            curv = TAU
        # step along alpha_i += y_i*lam, alpha_j -= y_j*lam
        lam = gap / curv
        bound_i = C - alpha[i] if y[i] > 0 else alpha[i]
        bound_j = alpha[j] if y[j] > 0 else C - alpha[j]
        snap_i = snap_j = False
        if bound_i <= lam or bound_j <= lam:
            lam = min(bound_i, bound_j)
            snap_i = bound_i == lam
            snap_j = bound_j == lam

        alpha[i] += y[i] * lam
        alpha[j] -= y[j] * lam
        # clipped variables land exactly on the box
        if snap_i:
            alpha[i] = C if y[i] > 0 else 0.0
        if snap_j:
            alpha[j] = 0.0 if y[j] > 0 else C
        alpha[i] = min(max(alpha[i], 0.0), C)
        alpha[j] = min(max(alpha[j], 0.0), C)

        grad += (lam * y) * (Ki - Kj)

    if not converged:
        log.warning("SMO stopped at max_iter=%d with gap %.3g > tol %.3g", cfg.max_iter, gap, cfg.tol)
    return SmoState(
        alpha=alpha,
        grad=grad,
        bias=_bias(alpha, grad, y, C),
        iterations=it,
        gap=gap,
        converged=converged,
        seconds=time.perf_counter() - t0,
        cache_stats=cache.stats(),
    )


def smo_train(ds: Dataset, cfg: SolverConfig, return_state: bool = False):
    """Train an SVM on ``ds``.

    The model keeps exactly the samples with ``alpha > SV_THRESHOLD``.  A run
    that hits ``cfg.max_iter`` still returns a model, flagged
    ``converged=False``.  With ``return_state=True`` returns
    ``(model, SmoState)``.
    """
    state = smo_solve(ds, cfg)
    support = np.flatnonzero(state.alpha > SV_THRESHOLD)
    model = SvmModel(
        svs=ds.take(support),
        coef=ds.y[support] * state.alpha[support],
        bias=state.bias,
        kernel=cfg.kernel,
        C=cfg.C,
        converged=state.converged,
        iterations=state.iterations,
        gap=state.gap,
        support=support,
        n_train=len(ds),
    )
    return (model, state) if return_state else model


def decision_value(model: SvmModel, x: SparseVector) -> float:
    if model.n_sv == 0:
        return float(model.bias)
    dim = max(model.svs.dim, x.max_index)
    row = sp.csr_matrix(
        (np.asarray(x.values, dtype=np.float64), np.asarray(x.indices, dtype=np.int32) - 1, [0, len(x)]),
        shape=(1, dim),
    )
    return float(model.decision_function(row)[0])


def predict(model: SvmModel, x: Union[SparseVector, float]) -> int:
    """Sign of the decision value; a value of exactly 0 maps to +1.

    ``x`` may also be a precomputed decision value.
    """
    f = x if isinstance(x, (int, float, np.floating)) else decision_value(model, x)
    return 1 if f >= 0 else -1


def accuracy(model: SvmModel, test: Dataset) -> float:
    if len(test) == 0:
        raise ValueError("accuracy needs a non-empty test set")
    return float(np.mean(model.predict(test) == test.y))
