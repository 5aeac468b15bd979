"""Grouped (cascade) SVM training: CSVM and balanced BCSVM.

A layer partitions the working set into groups, trains one SVM per group in
parallel and keeps only each group's support vectors.  With the *pooled*
merge every layer's support vectors are concatenated into the next working
set, which is re-partitioned; with the *pairwise* merge the support-vector
sets of groups ``2k`` and ``2k+1`` become group ``k`` of the next layer.
The last layer always holds a single group, whose model is the result.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset, PartitionError, concat, partition_balanced, partition_random
from .solver import SolverConfig, SvmModel, TrainingError, smo_train

__all__ = [
    "PlanError",
    "CascadeError",
    "CascadePlan",
    "LayerReport",
    "CascadeResult",
    "validate_plan",
    "run_cascade",
    "csvm",
    "bcsvm",
]

log = logging.getLogger(__name__)

PARTITIONS = ("random", "balanced")
MERGES = ("pooled", "pairwise")


class PlanError(ValueError):
    pass


class CascadeError(RuntimeError):
    pass


@dataclass(frozen=True)
class CascadePlan:
    """Group count per layer plus grouping and merge strategies."""

    layers: Tuple[int, ...] = (8, 1)
    partition: str = "balanced"
    merge: str = "pooled"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(int(g) for g in self.layers))

    @classmethod
    def parse(cls, layers: str, **kwargs) -> "CascadePlan":
        """Build from a comma-separated layer string such as ``"8,1"``."""
        try:
            counts = tuple(int(tok) for tok in layers.split(",") if tok.strip())
        except ValueError:
            raise PlanError(f"layers must be comma-separated integers, got {layers!r}") from None
        return cls(counts, **kwargs)

    def to_dict(self) -> dict:
        return {"layers": list(self.layers), "partition": self.partition, "merge": self.merge}


def validate_plan(plan: CascadePlan) -> None:
    """Raise :class:`PlanError` listing every problem with ``plan``."""
    problems = []
    if not plan.layers:
        problems.append("at least one layer is required")
    if any(g < 1 for g in plan.layers):
        problems.append(f"group counts must be positive, got {list(plan.layers)}")
    if plan.layers and plan.layers[-1] != 1:
        problems.append(f"last layer must have exactly 1 group to yield a single model, got {plan.layers[-1]}")
    if plan.partition not in PARTITIONS:
        problems.append(f"partition must be one of {PARTITIONS}, got {plan.partition!r}")
    if plan.merge not in MERGES:
        problems.append(f"merge must be one of {MERGES}, got {plan.merge!r}")
    if plan.merge == "pairwise" and plan.layers:
        if any(g & (g - 1) for g in plan.layers if g > 0):
            problems.append("pairwise merge needs power-of-two group counts")
        for a, b in zip(plan.layers, plan.layers[1:]):
            if a != 2 * b:
                problems.append(f"pairwise merge needs each layer to halve the previous ({a} -> {b})")
                break
    if problems:
        raise PlanError("; ".join(problems))


@dataclass
class LayerReport:
    layer_index: int
    n_groups: int
    subset_sizes: List[int]
    sv_counts_per_subset: List[int]
    merged_size: int
    subset_seconds: List[float]
    total_seconds: float
    iterations: List[int] = field(default_factory=list)
    # ids of the samples surviving this layer (not serialized)
    merged_ids: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("merged_ids")
        return d


@dataclass
class CascadeResult:
    model: SvmModel
    reports: List[LayerReport]

    def __iter__(self):
        return iter((self.model, self.reports))


def _train_group(args) -> Tuple[SvmModel, float]:
    subset, cfg = args
    t0 = time.perf_counter()
    model = smo_train(subset, cfg)
    return model, time.perf_counter() - t0


def _default_workers() -> int:
    return os.cpu_count() or 1


def _partition(ds: Dataset, g: int, plan: CascadePlan, seed: int) -> List[Dataset]:
    if g == 1:
        return [ds]
    if plan.partition == "balanced":
        return partition_balanced(ds, g, seed)
    return partition_random(ds, g, seed)


def run_cascade(
    ds: Dataset,
    plan: CascadePlan,
    cfg: SolverConfig,
    seed: int = 0,
    *,
    workers: Optional[int] = 1,
    allow_nonconverged: bool = False,
) -> CascadeResult:
    """Train ``ds`` layer by layer according to ``plan``.

    Layer ``l`` partitions with seed ``seed + l``.  A layer with one group
    trains on the working set as-is, so ``layers=(1,)`` is plain
    :func:`~cascadesvm.solver.smo_train`.  Group models are collected in group
    order, which keeps results independent of ``workers``.
    """
    validate_plan(plan)
    workers = _default_workers() if workers is None else max(1, int(workers))
    reports: List[LayerReport] = []
    working = ds
    groups: Optional[List[Dataset]] = None
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 and max(plan.layers) > 1 else None
    try:
        for layer, g in enumerate(plan.layers):
            t0 = time.perf_counter()
            if groups is None:
                try:
                    groups = _partition(working, g, plan, seed + layer)
                except PartitionError as exc:
                    raise CascadeError(f"layer {layer}: {exc}") from exc
            for k, sub in enumerate(groups):
                if sub.n_positive == 0 or sub.n_negative == 0:
                    raise CascadeError(
                        f"layer {layer}, group {k}: subset of {len(sub)} samples holds a single class; "
                        "use fewer or larger groups (or balanced partitioning)"
                    )
            tasks = [(sub, cfg) for sub in groups]
            try:
                if pool is not None and len(tasks) > 1:
                    results = list(pool.map(_train_group, tasks))
                else:
                    results = [_train_group(t) for t in tasks]
            except TrainingError as exc:
                raise CascadeError(f"layer {layer}: {exc}") from exc
            models = [m for m, _ in results]
            for k, m in enumerate(models):
                if not m.converged and not allow_nonconverged:
                    raise CascadeError(
                        f"layer {layer}, group {k}: SMO did not converge in {cfg.max_iter} iterations "
                        f"(gap {m.gap:.3g}); raise max_iter or pass allow_nonconverged"
                    )
            sv_sets = [m.svs for m in models]
            merged = concat(sv_sets)
            if np.unique(merged.ids).size != len(merged):
                raise AssertionError("groups overlap: merged support vectors contain duplicates")
            reports.append(LayerReport(
                layer_index=layer,
                n_groups=len(groups),
                subset_sizes=[len(s) for s in groups],
                sv_counts_per_subset=[m.n_sv for m in models],
                merged_size=len(merged),
                subset_seconds=[t for _, t in results],
                total_seconds=time.perf_counter() - t0,
                iterations=[m.iterations for m in models],
                merged_ids=merged.ids.copy(),
            ))
            log.info("layer %d: %d groups, %d -> %d samples", layer, len(groups),
                     sum(len(s) for s in groups), len(merged))
            if layer == len(plan.layers) - 1:
                return CascadeResult(models[0], reports)
            if plan.merge == "pairwise":
                groups = [concat(sv_sets[k:k + 2]) for k in range(0, len(sv_sets), 2)]
            else:
                working = merged
                groups = None
    finally:
        if pool is not None:
            pool.shutdown()
    raise AssertionError("unreachable: plan has no layers")


def csvm(ds: Dataset, layers: Sequence[int], cfg: SolverConfig, seed: int = 0, **kwargs) -> CascadeResult:
    """Cascade SVM: random grouping, pooled merge."""
    return run_cascade(ds, CascadePlan(tuple(layers), "random", "pooled"), cfg, seed, **kwargs)


def bcsvm(ds: Dataset, layers: Sequence[int], cfg: SolverConfig, seed: int = 0, **kwargs) -> CascadeResult:
    """Balanced cascade SVM: class-stratified grouping, pooled merge."""
    return run_cascade(ds, CascadePlan(tuple(layers), "balanced", "pooled"), cfg, seed, **kwargs)
