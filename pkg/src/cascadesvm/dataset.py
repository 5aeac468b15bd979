"""Labeled sparse binary datasets: LIBSVM I/O, shuffling and partitioning.

A :class:`Dataset` stores its features as a CSR matrix whose column ``j``
holds feature index ``j + 1`` of the LIBSVM text format.  Each row also
carries an integer *id*, the sample's position in the dataset it was
originally parsed from, so samples can be followed through shuffles,
partitions and support-vector filtering.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import IO, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from ._rng import stream

__all__ = [
    "DatasetError",
    "ParseError",
    "LabelError",
    "PartitionError",
    "SparseVector",
    "Sample",
    "Dataset",
    "parse_libsvm",
    "load_libsvm",
    "write_libsvm",
    "shuffle",
    "split_by_class",
    "partition_random",
    "partition_balanced",
    "stratified_subsample",
    "concat",
]


class DatasetError(ValueError):
    pass


class ParseError(DatasetError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class LabelError(ParseError):
    pass


class PartitionError(DatasetError):
    pass


@dataclass(frozen=True)
class SparseVector:
    """Feature vector as parallel tuples of 1-based indices and nonzero values."""

    indices: Tuple[int, ...] = ()
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values differ in length")
        prev = 0
        for i, v in zip(self.indices, self.values):
            if i <= prev:
                raise ValueError("indices must be >= 1 and strictly increasing")
            if v == 0:
                raise ValueError(f"explicit zero stored at index {i}")
            prev = i

    @classmethod
    def from_dict(cls, d: Dict[int, float]) -> "SparseVector":
        items = sorted((int(k), float(v)) for k, v in d.items() if v != 0)
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    @classmethod
    def from_dense(cls, x: Sequence[float]) -> "SparseVector":
        return cls.from_dict({i + 1: float(v) for i, v in enumerate(x)})

    def to_dict(self) -> Dict[int, float]:
        return dict(zip(self.indices, self.values))

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        if self.indices:
            out[np.asarray(self.indices) - 1] = self.values
        return out

    @property
    def max_index(self) -> int:
        return self.indices[-1] if self.indices else 0

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class Sample:
    features: SparseVector
    label: int

    def __post_init__(self):
        if self.label not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.label!r}")


def _as_csr(X, dim: Optional[int] = None) -> sp.csr_matrix:
    X = sp.csr_matrix(X, dtype=np.float64)
    if not X.has_sorted_indices or np.any(X.data == 0):
        X = X.copy()
        X.eliminate_zeros()
        X.sort_indices()
    if dim is not None and dim != X.shape[1]:
        if dim < X.shape[1]:
            raise DatasetError(f"dim={dim} is smaller than max feature index {X.shape[1]}")
        X = sp.csr_matrix((X.data, X.indices, X.indptr), shape=(X.shape[0], dim))
    return X


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered binary-labeled samples.

    ``X`` is an ``n x dim`` CSR matrix, ``y`` holds +1/-1 labels and ``ids``
    the identity of each sample (defaults to ``0..n-1``).  Instances are
    treated as immutable; subsetting returns new objects.
    """

    X: sp.csr_matrix
    y: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        X = _as_csr(self.X)
        y = np.asarray(self.y, dtype=np.int8).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise DatasetError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if y.size and not np.all((y == 1) | (y == -1)):
            raise DatasetError("labels must be +1 or -1")
        ids = np.arange(y.size, dtype=np.int64) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if ids.shape != y.shape:
            raise DatasetError("ids must have one entry per sample")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def empty(cls, dim: int = 0) -> "Dataset":
        return cls(sp.csr_matrix((0, dim)), np.zeros(0, dtype=np.int8))

    @classmethod
    def from_samples(cls, samples: Iterable[Sample], dim: Optional[int] = None) -> "Dataset":
        samples = list(samples)
        indptr = [0]
        indices: List[int] = []
        data: List[float] = []
        for s in samples:
            indices.extend(i - 1 for i in s.features.indices)
            data.extend(s.features.values)
            indptr.append(len(indices))
        max_idx = max((s.features.max_index for s in samples), default=0)
        d = max_idx if dim is None else dim
        if d < max_idx:
            raise DatasetError(f"dim={d} is smaller than max feature index {max_idx}")
        X = sp.csr_matrix(
            (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int32), np.asarray(indptr)),
            shape=(len(samples), d),
        )
        return cls(X, np.array([s.label for s in samples], dtype=np.int8))

    @classmethod
    def from_arrays(cls, X, y, dim: Optional[int] = None) -> "Dataset":
        return cls(_as_csr(X, dim), np.asarray(y))

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(self.y == 1))

    @property
    def n_negative(self) -> int:
        return int(np.count_nonzero(self.y == -1))

    def __len__(self) -> int:
        return self.y.shape[0]

    def row(self, i: int) -> SparseVector:
        s, e = self.X.indptr[i], self.X.indptr[i + 1]
        return SparseVector(
            tuple(int(j) + 1 for j in self.X.indices[s:e]),
            tuple(float(v) for v in self.X.data[s:e]),
        )

    def __getitem__(self, i: int) -> Sample:
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return Sample(self.row(i), int(self.y[i]))

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    def take(self, positions) -> "Dataset":
        positions = np.asarray(positions, dtype=np.int64)
        return Dataset(self.X[positions], self.y[positions], self.ids[positions])

    def with_dim(self, dim: int) -> "Dataset":
        return Dataset(_as_csr(self.X, dim), self.y, self.ids)

    def same_samples(self, other: "Dataset") -> bool:
        """Sample-by-sample equality of features and labels (ids ignored)."""
        if len(self) != len(other) or not np.array_equal(self.y, other.y):
            return False
        a, b = self.X, other.X
        return (
            np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )

    def summary(self) -> dict:
        return {
            "n": len(self),
            "dim": self.dim,
            "positives": self.n_positive,
            "negatives": self.n_negative,
        }


def concat(parts: Sequence[Dataset]) -> Dataset:
    if not parts:
        return Dataset.empty()
    dim = max(p.dim for p in parts)
    return Dataset(
        sp.vstack([p.with_dim(dim).X for p in parts], format="csr"),
        np.concatenate([p.y for p in parts]),
        np.concatenate([p.ids for p in parts]),
    )


def _parse_label(tok: str, line_no: int, remap01: bool) -> int:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(line_no, f"label {tok!r} is not a number") from None
    if v == 1:
        return 1
    if v == -1:
        return -1
    if v == 0 and remap01:
        return -1
    hint = "" if v != 0 else " (pass remap01=True to read 0/1 labels)"
    raise LabelError(line_no, f"label {tok!r} is not binary +1/-1{hint}")


def parse_libsvm(
    text: Union[str, bytes, IO],
    *,
    remap01: bool = False,
    dim: Optional[int] = None,
) -> Dataset:
    """Parse LIBSVM/svmlight sparse text into a :class:`Dataset`.

    Accepts ``str``, ``bytes`` or a file object.  Blank lines are skipped and
    sample order is preserved.  ``dim`` defaults to the largest feature index
    seen; a larger override pads the feature space.

    Raises :class:`ParseError` (with the 1-based line number) on malformed
    tokens or non-increasing indices and :class:`LabelError` on labels other
    than +1/-1, unless ``remap01`` maps 0 to -1.
    """
    if isinstance(text, bytes):
        text = text.decode("ascii")
    lines = io.StringIO(text) if isinstance(text, str) else text

    labels: List[int] = []
    indptr = [0]
    indices: List[int] = []
    data: List[float] = []
    max_idx = 0
    for line_no, line in enumerate(lines, start=1):
        if isinstance(line, bytes):
            line = line.decode("ascii")
        toks = line.split()
        if not toks:
            continue
        labels.append(_parse_label(toks[0], line_no, remap01))
        prev = 0
        for tok in toks[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(line_no, f"expected index:value, got {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(line_no, f"bad index:value pair {tok!r}") from None
            if idx < 1:
                raise ParseError(line_no, f"feature index {idx} < 1")
            if idx <= prev:
                raise ParseError(line_no, f"feature index {idx} not greater than previous {prev}")
            prev = idx
            if val != 0.0:
                indices.append(idx - 1)
                data.append(val)
        max_idx = max(max_idx, prev)
        indptr.append(len(indices))

    d = max_idx if dim is None else dim
    if d < max_idx:
        raise DatasetError(f"dim={d} is smaller than max feature index {max_idx}")
    X = sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int32), np.asarray(indptr)),
        shape=(len(labels), d),
    )
    return Dataset(X, np.asarray(labels, dtype=np.int8))


def load_libsvm(path, **kwargs) -> Dataset:
    with open(path, "r", encoding="ascii") as fh:
        return parse_libsvm(fh, **kwargs)


def write_libsvm(ds: Dataset) -> bytes:
    """Serialize to LIBSVM text; values use the shortest exact float repr."""
    out = []
    X = ds.X
    for i in range(len(ds)):
        s, e = X.indptr[i], X.indptr[i + 1]
        parts = ["+1" if ds.y[i] == 1 else "-1"]
        parts.extend(f"{j + 1}:{float(v)!r}" for j, v in zip(X.indices[s:e], X.data[s:e]))
        out.append(" ".join(parts) + "\n")
    return "".join(out).encode("ascii")


def shuffle(ds: Dataset, seed: int) -> Dataset:
    """Seeded Fisher-Yates permutation of the samples (xoshiro256**)."""
    return ds.take(stream(seed).permutation(len(ds)))


def split_by_class(ds: Dataset) -> Tuple[Dataset, Dataset]:
    """Order-stable split into (positives, negatives)."""
    return ds.take(np.flatnonzero(ds.y == 1)), ds.take(np.flatnonzero(ds.y == -1))


def _chunk_bounds(n: int, k: int) -> List[Tuple[int, int]]:
    # remainder goes to the lowest-indexed chunks
    base, extra = divmod(n, k)
    bounds, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def partition_random(ds: Dataset, k: int, seed: int) -> List[Dataset]:
    """Shuffle, then cut into ``k`` contiguous groups whose sizes differ by at most one."""
    if k < 1:
        raise PartitionError(f"group count must be >= 1, got {k}")
    if len(ds) < k:
        raise PartitionError(f"cannot split {len(ds)} samples into {k} non-empty groups")
    perm = np.asarray(stream(seed).permutation(len(ds)), dtype=np.int64)
    return [ds.take(perm[a:b]) for a, b in _chunk_bounds(len(ds), k)]


def partition_balanced(ds: Dataset, k: int, seed: int) -> List[Dataset]:
    """Class-stratified partition into ``k`` groups.

    Positives and negatives are shuffled separately (positives first, from one
    seeded stream) and each class is cut into ``k`` contiguous chunks.  Group
    ``i`` is positive chunk ``i`` followed by negative chunk ``i``.
    """
    if k < 1:
        raise PartitionError(f"group count must be >= 1, got {k}")
    pos = np.flatnonzero(ds.y == 1)
    neg = np.flatnonzero(ds.y == -1)
    for name, cls in (("positive", pos), ("negative", neg)):
        if len(cls) < k:
            raise PartitionError(
                f"balanced partition into {k} groups needs >= {k} {name} samples, found {len(cls)}"
            )
    rng = stream(seed)
    pos = pos[rng.permutation(len(pos))]
    neg = neg[rng.permutation(len(neg))]
    pb = _chunk_bounds(len(pos), k)
    nb = _chunk_bounds(len(neg), k)
    return [
        ds.take(np.concatenate([pos[pa:pe], neg[na:ne]]))
        for (pa, pe), (na, ne) in zip(pb, nb)
    ]


def stratified_subsample(ds: Dataset, size: int, seed: int) -> Dataset:
    """Class-proportional random subsample of ``size`` samples, original order kept."""
    if size >= len(ds):
        return ds
    pos = np.flatnonzero(ds.y == 1)
    neg = np.flatnonzero(ds.y == -1)
    n_pos = int(round(size * len(pos) / len(ds)))
    n_pos = min(max(n_pos, 1 if len(pos) else 0), len(pos))
    n_neg = min(size - n_pos, len(neg))
    rng = stream(seed)
    pick = np.concatenate([
        pos[rng.permutation(len(pos))[:n_pos]],
        neg[rng.permutation(len(neg))[:n_neg]],
    ])
    return ds.take(np.sort(pick))
