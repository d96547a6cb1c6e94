"""Label-permutation tests for gene-set scores.

A :class:`PermutationPlan` materializes every label shuffle once; all sets
and all reduction steps of a run are scored against the same shuffles.
p-values use the add-one estimator ``(1 + #{null >= observed}) / (1 + B)``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._rng import derive_rng
from .connectivity import WeightVector
from .data import DataError, ExpressionDataset, GeneSetCollection
from .sam import S0Rule, _as_rule, _GroupStats, positive_mask, resolve_positive

# Permutations are processed in blocks of this many draws regardless of the
# worker count, so every block sees the same BLAS shapes.
CHUNK = 64
# Relative slack under which a null score counts as tying the observed one.
TIE_RTOL = 1e-10
MAX_EXHAUSTIVE = 200_000


def thread_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class StatConfig:
    """What statistic the engine computes.

    ``weights`` holds *normalized* connectivity weights; when present the
    weighted statistic is used everywhere.
    """

    positive: str | None = None
    s0: S0Rule = field(default_factory=S0Rule)
    weights: WeightVector | None = None

    @property
    def weighted(self) -> bool:
        return self.weights is not None


@dataclass(frozen=True, eq=False)
class PermutationPlan:
    """Materialized label shuffles.

    ``assignments`` is draws x samples of class codes into ``classes``. In
    exhaustive mode it lists every distinct relabeling *except* the observed
    one; counting the observed labeling through the add-one term then makes
    the estimator the exact permutation p-value over ``n_assignments``.
    """

    labels: tuple[str, ...]
    classes: tuple[str, ...]
    assignments: np.ndarray
    B: int
    seed: int
    exhaustive: bool = False
    n_assignments: int | None = None

    @property
    def n_draws(self) -> int:
        return self.assignments.shape[0]

    def masks(self, positive: str) -> np.ndarray:
        return self.assignments == self.classes.index(positive)


def count_assignments(labels: Sequence[str]) -> int:
    """Number of distinct relabelings preserving class sizes (multinomial)."""
    counts = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    total, out = 0, 1
    for k in counts.values():
        total += k
        out *= math.comb(total, k)
    return out


def build_plan(labels: Sequence[str], B: int = 1000, seed: int = 0) -> PermutationPlan:
    """Draw ``B`` uniform label shuffles, or enumerate when that is cheaper.

    If ``B`` reaches the number of distinct class-size-preserving
    relabelings of a two-class design, the plan enumerates them all and
    sets ``exhaustive``.
    """
    if B < 1:
        raise ValueError("permutation count B must be at least 1")
    labels = tuple(str(lab) for lab in labels)
    classes = tuple(sorted(set(labels)))
    codes = np.array([classes.index(lab) for lab in labels], dtype=np.int8)
    n = len(labels)
    n_distinct = count_assignments(labels)
    if len(classes) == 2 and B >= n_distinct and n_distinct <= MAX_EXHAUSTIVE:
        n1 = int((codes == 1).sum())
        rows = []
        for combo in itertools.combinations(range(n), n1):
            row = np.zeros(n, dtype=np.int8)
            row[list(combo)] = 1
            if not np.array_equal(row, codes):
                rows.append(row)
        assignments = np.array(rows, dtype=np.int8).reshape(len(rows), n)
        return PermutationPlan(labels, classes, assignments, B, seed, True, n_distinct)
    rng = derive_rng(seed, "permutations")
    assignments = np.empty((B, n), dtype=np.int8)
    for b in range(B):
        assignments[b] = codes[rng.permutation(n)]
    return PermutationPlan(labels, classes, assignments, B, seed, False, None)


@dataclass(frozen=True, eq=False)
class NullStatistics:
    """Observed and permuted (possibly weighted) statistics for some genes."""

    gene_ids: tuple[str, ...]
    observed: np.ndarray
    permuted: np.ndarray
    s0: float
    positive: str
    weighted: bool

    def __post_init__(self):
        object.__setattr__(self, "_index", {g: i for i, g in enumerate(self.gene_ids)})

    @property
    def n_draws(self) -> int:
        return self.permuted.shape[0]

    def index(self, genes: Sequence[str]) -> np.ndarray:
        try:
            return np.fromiter((self._index[g] for g in genes), dtype=np.intp, count=len(genes))
        except KeyError as exc:
            raise DataError(f"gene {exc.args[0]!r} not covered by the null statistics") from None

    def score(self, genes: Sequence[str]) -> tuple[float, np.ndarray]:
        idx = self.index(genes)
        obs = float(np.sum(self.observed[idx] ** 2))
        null = np.sum(self.permuted[:, idx] ** 2, axis=1)
        return obs, null

    def pvalue(self, genes: Sequence[str]) -> float:
        if len(genes) == 0:
            raise DataError("cannot test an empty gene subset")
        obs, null = self.score(genes)
        return exceedance_pvalue(obs, null)

    def residual_pvalues(self, ordered: Sequence[str]) -> np.ndarray:
        """p-values of every proper suffix ``ordered[k:]``, ``k = 1..m-1``."""
        idx = self.index(ordered)
        if idx.size < 2:
            return np.empty(0)
        obs = np.cumsum((self.observed[idx] ** 2)[::-1])[::-1]
        null = np.cumsum((self.permuted[:, idx] ** 2)[:, ::-1], axis=1)[:, ::-1]
        out = np.empty(idx.size - 1)
        for k in range(1, idx.size):
            out[k - 1] = exceedance_pvalue(obs[k], null[:, k])
        return out

    def scaled(self, weights: np.ndarray) -> "NullStatistics":
        return NullStatistics(self.gene_ids, self.observed * weights, self.permuted * weights,
                              self.s0, self.positive, True)


def exceedance_pvalue(observed: float, null: np.ndarray) -> float:
    """Add-one permutation p-value with inclusive (tolerant) ties."""
    count = int(np.count_nonzero(null >= observed - TIE_RTOL * abs(observed)))
    return (1 + count) / (1 + null.shape[0])


def null_statistics(dataset: ExpressionDataset, plan: PermutationPlan, config: StatConfig,
                    genes: Sequence[str] | None = None, threads: int = 1) -> NullStatistics:
    """Observed and per-permutation statistics for ``genes``.

    ``s0`` is re-derived for every permutation from the permuted pooled SDs
    of *all* genes in ``dataset``; connectivity weights are label-free and
    applied unchanged.
    """
    if tuple(dataset.labels) != plan.labels:
        raise DataError("permutation plan was built for different labels")
    positive = resolve_positive(dataset, config.positive)
    rule = _as_rule(config.s0)
    genes = tuple(dataset.gene_ids if genes is None else genes)
    cols = dataset.gene_index(genes)
    gs = _GroupStats(dataset.values)
    d_obs, _, s0 = gs.d_block(positive_mask(dataset, positive)[None, :], rule, cols)

    masks = plan.masks(positive)
    blocks = [masks[i:i + CHUNK] for i in range(0, masks.shape[0], CHUNK)]
    parts = thread_map(lambda blk: gs.d_block(blk, rule, cols)[0], blocks, threads)
    permuted = np.concatenate(parts, axis=0) if parts else np.empty((0, len(genes)))

    stats = NullStatistics(genes, d_obs[0], permuted, float(s0[0]), positive, False)
    if config.weights is not None:
        stats = stats.scaled(config.weights.aligned(genes))
    return stats


@dataclass(frozen=True)
class SetPValue:
    set_name: str
    score: float
    pvalue: float
    size: int
    B: int


@dataclass(frozen=True)
class SetPValueTable:
    rows: tuple[SetPValue, ...]
    exhaustive: bool = False
    s0_recomputed_per_permutation: bool = True

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def get(self, name: str) -> SetPValue:
        for r in self.rows:
            if r.set_name == name:
                return r
        raise KeyError(name)

    def pvalues(self) -> dict[str, float]:
        return {r.set_name: r.pvalue for r in self.rows}

    def to_dict(self) -> dict:
        return {
            "exhaustive": self.exhaustive,
            "s0_recomputed_per_permutation": self.s0_recomputed_per_permutation,
            "sets": [
                {"set": r.set_name, "score": r.score, "pvalue": r.pvalue, "size": r.size, "B": r.B}
                for r in self.rows
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SetPValueTable":
        rows = tuple(SetPValue(r["set"], r["score"], r["pvalue"], r["size"], r["B"])
                     for r in d["sets"])
        return cls(rows, d["exhaustive"], d["s0_recomputed_per_permutation"])


def pvalue_table(stats: NullStatistics, collection: GeneSetCollection,
                 plan: PermutationPlan) -> SetPValueTable:
    rows = []
    for name, genes in collection.items():
        obs, null = stats.score(genes)
        rows.append(SetPValue(name, obs, exceedance_pvalue(obs, null), len(genes), stats.n_draws))
    return SetPValueTable(tuple(rows), plan.exhaustive)


def set_pvalues(dataset: ExpressionDataset, collection: GeneSetCollection,
                plan: PermutationPlan, config: StatConfig = StatConfig(),
                threads: int = 1) -> SetPValueTable:
    """Permutation p-value of every set's (weighted) score."""
    stats = null_statistics(dataset, plan, config, collection.genes(), threads)
    return pvalue_table(stats, collection, plan)


def subset_pvalue(dataset: ExpressionDataset, gene_subset: Sequence[str],
                  plan: PermutationPlan, config: StatConfig = StatConfig(),
                  threads: int = 1) -> float:
    """Permutation p-value of one gene subset, same estimator as :func:`set_pvalues`."""
    gene_subset = list(gene_subset)
    if not gene_subset:
        raise DataError("cannot test an empty gene subset")
    stats = null_statistics(dataset, plan, config, gene_subset, threads)
    return stats.pvalue(gene_subset)
