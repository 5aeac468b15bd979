"""Global-support-vector retention: sample census and exact subset probabilities.

Samples of a dataset are split, relative to a model trained on the whole
dataset, into support vectors, noise (misclassified) and common samples per
class.  For one subset of a grouping, a global positive support vector is
taken to survive when the subset draws

* case 1: at least one positive SV, no noise of either sign, any number of
  common positives and any negatives from ``nDS + nSv``; or
* case 2: at least one positive SV, at least one positive noise point, at
  least one negative noise point, and anything from ``pDS`` and ``nDS + nSv``.

The probabilities are exact rationals, summed over every feasible draw tuple,
for uniformly random subsets of ``t`` samples and for class-stratified subsets
of ``p`` positives and ``n`` negatives.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cascade import CascadePlan, run_cascade
from .dataset import Dataset
from .solver import SV_THRESHOLD, SolverConfig, SvmModel, smo_train

__all__ = [
    "CensusError",
    "RetentionCensus",
    "binomial",
    "census",
    "retention_prob_random",
    "retention_prob_balanced",
    "denominator_inequality",
    "measure_retention",
    "RetentionRun",
    "fraction_to_json",
    "MAX_T",
]

# exact sums stay cheap below this population size
MAX_T = 10_000


class CensusError(ValueError):
    pass


def binomial(n: int, k: int) -> int:
    """Exact ``C(n, k)``; zero outside ``0 <= k <= n``."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


@dataclass(frozen=True)
class RetentionCensus:
    """Per-class sample counts and the number of groups ``m``."""

    pSv: int
    nSv: int
    pN: int
    nN: int
    pDS: int
    nDS: int
    m: int = 1

    def __post_init__(self):
        for name in ("pSv", "nSv", "pN", "nN", "pDS", "nDS"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise CensusError(f"{name} must be a nonnegative integer, got {v}")
        if int(self.m) != self.m or self.m < 1:
            raise CensusError(f"m must be a positive integer, got {self.m}")

    @property
    def pT(self) -> int:
        return self.pSv + self.pDS + self.pN

    @property
    def nT(self) -> int:
        return self.nSv + self.nDS + self.nN

    @property
    def T(self) -> int:
        return self.pT + self.nT

    # subset sizes round down, matching the smallest groups of the partitioners
    @property
    def t(self) -> int:
        return self.T // self.m

    @property
    def p(self) -> int:
        return self.pT // self.m

    @property
    def n(self) -> int:
        return self.nT // self.m

    def with_m(self, m: int) -> "RetentionCensus":
        return RetentionCensus(self.pSv, self.nSv, self.pN, self.nN, self.pDS, self.nDS, m)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(pT=self.pT, nT=self.nT, T=self.T, t=self.t, p=self.p, n=self.n)
        return d


def census(
    ds: Dataset,
    model: SvmModel,
    alpha: Optional[np.ndarray] = None,
    decision: Optional[np.ndarray] = None,
    m: int = 1,
) -> RetentionCensus:
    """Classify every sample of ``ds`` against a model trained on all of it.

    Noise (``y f(x) < 0``) takes precedence over support vector
    (``alpha > SV_THRESHOLD``); everything else is common.  ``alpha`` and
    ``decision`` default to the values implied by ``model`` (its
    ``support`` positions and :meth:`SvmModel.decision_function`).
    """
    n = len(ds)
    if alpha is None:
        if model.support is None or model.n_train != n:
            raise CensusError("model carries no per-sample duals for this dataset; pass alpha")
        alpha = np.zeros(n)
        alpha[model.support] = np.abs(model.coef)
    alpha = np.asarray(alpha, dtype=np.float64)
    if decision is None:
        decision = model.decision_function(ds)
    decision = np.asarray(decision, dtype=np.float64)
    if alpha.shape != (n,) or decision.shape != (n,):
        raise CensusError(f"need {n} alpha and decision values, got {alpha.shape} and {decision.shape}")

    y = ds.y
    noise = y * decision < 0
    sv = ~noise & (alpha > SV_THRESHOLD)
    common = ~noise & ~sv
    pos = y == 1
    neg = ~pos
    return RetentionCensus(
        pSv=int(np.count_nonzero(sv & pos)),
        nSv=int(np.count_nonzero(sv & neg)),
        pN=int(np.count_nonzero(noise & pos)),
        nN=int(np.count_nonzero(noise & neg)),
        pDS=int(np.count_nonzero(common & pos)),
        nDS=int(np.count_nonzero(common & neg)),
        m=m,
    )


def _ways(pools: Sequence[Tuple[int, int]], total: int) -> int:
    """Number of ways to draw ``total`` items from disjoint pools.

    ``pools`` holds ``(size, minimum)`` pairs; the count is the sum, over every
    tuple ``(k_1, ..., k_r)`` with ``k_i >= minimum_i`` and
    ``sum k_i = total``, of ``prod C(size_i, k_i)``.  Computed as the
    coefficient of ``x^total`` in the product of truncated binomial series.
    """
    if total < 0:
        return 0
    acc = [1] + [0] * total
    for size, lo in pools:
        series = [binomial(size, k) if k >= lo else 0 for k in range(min(size, total) + 1)]
        nxt = [0] * (total + 1)
        for a, ca in enumerate(acc):
            if ca:
                for k, ck in enumerate(series[: total - a + 1]):
                    if ck:
                        nxt[a + k] += ca * ck
        acc = nxt
    return acc[total]


def _check_size(c: RetentionCensus) -> None:
    if c.T > MAX_T:
        raise CensusError(f"exact sums limited to T <= {MAX_T}, got T={c.T}")


def _numerator_random(c: RetentionCensus, t: int) -> int:
    neg_pool = c.nDS + c.nSv
    case1 = _ways([(c.pSv, 1), (c.pDS, 0), (neg_pool, 0)], t)
    case2 = _ways([(c.pSv, 1), (c.pN, 1), (c.nN, 1), (c.pDS, 0), (neg_pool, 0)], t)
    return case1 + case2


def retention_prob_random(c: RetentionCensus) -> Fraction:
    """Probability that a uniformly drawn ``t``-subset falls in case 1 or case 2."""
    _check_size(c)
    t = c.t
    if t < 1:
        raise CensusError(f"subset size t = T // m = {c.T} // {c.m} must be >= 1")
    if t > c.T:
        raise CensusError(f"subset size {t} exceeds population {c.T}")
    return Fraction(_numerator_random(c, t), binomial(c.T, t))


def retention_prob_balanced(c: RetentionCensus) -> Fraction:
    """Same events for a subset of ``p`` positives and ``n`` negatives drawn per class."""
    _check_size(c)
    p, n = c.p, c.n
    if p < 1 or n < 1:
        raise CensusError(
            f"stratified subsets need p = pT // m >= 1 and n = nT // m >= 1 (got p={p}, n={n})"
        )
    neg_pool = c.nDS + c.nSv
    case1 = _ways([(c.pSv, 1), (c.pDS, 0)], p) * _ways([(neg_pool, 0)], n)
    case2 = _ways([(c.pSv, 1), (c.pN, 1), (c.pDS, 0)], p) * _ways([(c.nN, 1), (neg_pool, 0)], n)
    return Fraction(case1 + case2, binomial(c.pT, p) * binomial(c.nT, n))


def denominator_inequality(c: RetentionCensus) -> Tuple[int, int, bool]:
    """``(C(T, t), C(pT, p) * C(nT, n), lhs > rhs)``.

    Requires ``1 <= p <= pT``, ``1 <= n <= nT`` and ``p + n == t``.  Equality
    occurs when ``m == 1`` and is reported, not hidden.
    """
    p, n, t = c.p, c.n, c.t
    if not (1 <= p <= c.pT and 1 <= n <= c.nT):
        raise CensusError(f"need 1 <= p <= pT and 1 <= n <= nT (p={p}, pT={c.pT}, n={n}, nT={c.nT})")
    if p + n != t:
        raise CensusError(f"per-class subset sizes p={p}, n={n} do not add up to t={t}")
    lhs = binomial(c.T, t)
    rhs = binomial(c.pT, p) * binomial(c.nT, n)
    return lhs, rhs, lhs > rhs


def fraction_to_json(q: Fraction) -> dict:
    return {"fraction": f"{q.numerator}/{q.denominator}", "decimal": f"{float(q):.12f}"}


@dataclass
class RetentionRun:
    seed: int
    layer1: float
    final: float
    layer1_retained: int
    final_retained: int


@dataclass
class RetentionResult:
    global_sv_ids: np.ndarray
    runs: List[RetentionRun]

    @property
    def layer1(self) -> np.ndarray:
        return np.array([r.layer1 for r in self.runs])

    @property
    def final(self) -> np.ndarray:
        return np.array([r.final for r in self.runs])


def measure_retention(
    ds: Dataset,
    plan: CascadePlan,
    cfg: SolverConfig,
    seeds: Sequence[int],
    *,
    direct: Optional[SvmModel] = None,
    workers: Optional[int] = 1,
) -> RetentionResult:
    """Fraction of the direct model's support vectors that survive a cascade.

    For each seed, reports the fraction present in the working set after the
    first layer and in the final model.  Membership is by sample id.
    """
    if direct is None:
        direct = smo_train(ds, cfg)
    global_ids = np.asarray(direct.sv_ids)
    n_global = global_ids.size
    runs = []
    for seed in seeds:
        model, reports = run_cascade(ds, plan, cfg, seed, workers=workers)
        l1 = int(np.isin(global_ids, reports[0].merged_ids).sum())
        fin = int(np.isin(global_ids, model.sv_ids).sum())
        runs.append(RetentionRun(
            seed=int(seed),
            layer1=l1 / n_global if n_global else 1.0,
            final=fin / n_global if n_global else 1.0,
            layer1_retained=l1,
            final_retained=fin,
        ))
    return RetentionResult(global_ids, runs)
