"""Gene-set screening and core-subset reduction (SAMGSR and its weighted form).

Within each significant set the genes are ordered by decreasing absolute
statistic. For ``k = 1, 2, ...`` the residual set (everything after the
first ``k`` genes) is tested; the first ``k`` whose residual p-value
exceeds ``c_star`` ends the search and the first ``k`` genes form the core.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .connectivity import (ConnectivityGraph, WeightVector, build_graph,
                           connectivity_weights, normalize_weights)
from .data import ExpressionDataset, GeneSetCollection, restrict_collection
from .permutation import (NullStatistics, PermutationPlan, SetPValueTable, StatConfig,
                          build_plan, null_statistics, pvalue_table)
from .sam import S0Rule

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SamgsrConfig:
    weighted: bool = False
    alpha: float = 0.05
    c_star: float = 0.5
    B: int = 1000
    seed: int = 0
    s0: S0Rule = field(default_factory=S0Rule)
    normalization: str = "mean-one"
    positive: str | None = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if not 0 < self.c_star < 1:
            raise ConfigError("c_star must lie in (0, 1)")
        if self.B < 1:
            raise ConfigError("B must be at least 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["s0"] = str(self.s0)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SamgsrConfig":
        d = dict(d)
        d["s0"] = S0Rule.parse(d["s0"])
        return cls(**d)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ReductionTrace:
    set_name: str
    ordered_genes: tuple[str, ...]
    statistics: tuple[float, ...]
    c_values: tuple[float, ...]
    stop_k: int
    exhausted: bool = False
    ties: tuple[tuple[str, ...], ...] = ()

    @property
    def core(self) -> tuple[str, ...]:
        return self.ordered_genes[:self.stop_k]

    def to_dict(self) -> dict:
        return {
            "set": self.set_name,
            "ordered_genes": list(self.ordered_genes),
            "statistics": list(self.statistics),
            "c_values": list(self.c_values),
            "stop_k": self.stop_k,
            "core": list(self.core),
            "exhausted": self.exhausted,
            "ties": [list(t) for t in self.ties],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReductionTrace":
        return cls(d["set"], tuple(d["ordered_genes"]), tuple(d["statistics"]),
                   tuple(d["c_values"]), d["stop_k"], d["exhausted"],
                   tuple(tuple(t) for t in d["ties"]))


@dataclass(frozen=True)
class Signature:
    """Union of core subsets, in screening order then core order."""

    genes: tuple[str, ...]
    provenance: dict
    fingerprint: str = ""

    def __len__(self):
        return len(self.genes)

    def to_dict(self) -> dict:
        return {"genes": list(self.genes), "provenance": self.provenance,
                "fingerprint": self.fingerprint}

    @classmethod
    def from_dict(cls, d: dict) -> "Signature":
        return cls(tuple(d["genes"]), d["provenance"], d["fingerprint"])


@dataclass(frozen=True)
class SamgsrResult:
    signature: Signature
    traces: tuple[ReductionTrace, ...]
    pvalues: SetPValueTable
    screened: tuple[str, ...]
    warnings: tuple[str, ...] = ()


def screen_sets(pvalue_table: SetPValueTable, alpha: float) -> list[str]:
    """Names of sets with ``p <= alpha``, by ascending p then name."""
    if not 0 < alpha <= 1:
        raise ConfigError("alpha must lie in (0, 1]")
    hits = [r for r in pvalue_table if r.pvalue <= alpha]
    return [r.set_name for r in sorted(hits, key=lambda r: (r.pvalue, r.set_name))]


def order_genes(stats: NullStatistics, genes: Sequence[str]):
    """Genes by decreasing |statistic|, ties broken by gene name."""
    idx = stats.index(list(genes))
    mag = np.abs(stats.observed[idx])
    keyed = sorted(zip(genes, mag.tolist(), stats.observed[idx].tolist()),
                   key=lambda t: (-t[1], t[0]))
    ties = []
    i = 0
    while i < len(keyed):
        j = i
        while j + 1 < len(keyed) and keyed[j + 1][1] == keyed[i][1]:
            j += 1
        if j > i:
            ties.append(tuple(k[0] for k in keyed[i:j + 1]))
        i = j + 1
    return (tuple(k[0] for k in keyed), tuple(k[2] for k in keyed), tuple(ties))


def stop_index(c_values: Sequence[float], c_star: float) -> tuple[int, bool]:
    """First ``k`` (1-based) with ``c_k > c_star``; ``(m, True)`` if none fires."""
    for k, c in enumerate(c_values, start=1):
        if c > c_star:
            return k, False
    return len(c_values) + 1, True


class _CurveTrace:
    """A set's full residual p-value curve, from which any c_star's trace follows."""

    def __init__(self, name: str, stats: NullStatistics, genes: Sequence[str]):
        self.name = name
        self.ordered, self.statistics, self.ties = order_genes(stats, genes)
        self.curve = stats.residual_pvalues(self.ordered)

    def trace(self, c_star: float) -> ReductionTrace:
        k, exhausted = stop_index(self.curve, c_star)
        seen = tuple(float(c) for c in self.curve[:k])
        return ReductionTrace(self.name, self.ordered, self.statistics, seen, k,
                              exhausted, self.ties)


def reduce_set(dataset: ExpressionDataset, gene_set: Sequence[str], plan: PermutationPlan,
               stat_config: StatConfig, c_star: float, set_name: str = "",
               stats: NullStatistics | None = None, threads: int = 1) -> ReductionTrace:
    """Reduce one gene set to its core.

    ``stats`` may carry precomputed null statistics covering the set (the
    run-level object); otherwise they are computed for this set alone,
    which gives identical values since ``s0`` always uses every gene in
    ``dataset``.
    """
    if not 0 < c_star < 1:
        raise ConfigError("c_star must lie in (0, 1)")
    if stats is None:
        stats = null_statistics(dataset, plan, stat_config, list(gene_set), threads)
    return _CurveTrace(set_name, stats, list(gene_set)).trace(c_star)


def connectivity_for(dataset: ExpressionDataset, graph: ConnectivityGraph,
                     scheme: str = "mean-one") -> WeightVector:
    """Normalized weights over the dataset's genes; genes outside the graph are isolated."""
    if graph.gene_ids != dataset.gene_ids:
        graph = build_graph(graph.edges, dataset.gene_ids)
    return normalize_weights(connectivity_weights(graph), scheme)


class PreparedRun:
    """Everything in a run that does not depend on ``c_star``.

    Building the null statistics, the set p-values and every screened set's
    residual curve is the expensive part; :meth:`result` then assembles the
    signature for any threshold at negligible cost. Tuning relies on this.
    """

    def __init__(self, dataset: ExpressionDataset, collection: GeneSetCollection,
                 graph: ConnectivityGraph | None, config: SamgsrConfig, threads: int = 1,
                 plan: PermutationPlan | None = None):
        if config.weighted and graph is None:
            raise ConfigError("weighted run requires a connectivity graph")
        self.config = config
        self.collection = restrict_collection(collection, dataset)
        weights = connectivity_for(dataset, graph, config.normalization) if config.weighted else None
        self.stat_config = StatConfig(config.positive, config.s0, weights)
        self.plan = plan if plan is not None else build_plan(dataset.labels, config.B, config.seed)
        self.stats = null_statistics(dataset, self.plan, self.stat_config,
                                     self.collection.genes(), threads)
        self.pvalues = pvalue_table(self.stats, self.collection, self.plan)
        self.screened = tuple(screen_sets(self.pvalues, config.alpha))
        self.curves = [_CurveTrace(name, self.stats, self.collection[name])
                       for name in self.screened]

    def result(self, c_star: float | None = None) -> SamgsrResult:
        c_star = self.config.c_star if c_star is None else c_star
        if not 0 < c_star < 1:
            raise ConfigError("c_star must lie in (0, 1)")
        traces = tuple(c.trace(c_star) for c in self.curves)
        genes: dict[str, list] = {}
        for tr in traces:
            for rank, (g, stat) in enumerate(zip(tr.core, tr.statistics), start=1):
                genes.setdefault(g, []).append({"set": tr.set_name, "rank": rank,
                                                "statistic": stat})
        warnings = []
        if not self.screened:
            warnings.append(f"no gene set passed screening at alpha={self.config.alpha}")
        warnings += [f"reduction of {t.set_name!r} exhausted; whole set kept"
                     for t in traces if t.exhausted]
        warnings += [f"tie in |statistic| within {t.set_name!r}: {', '.join(g)}"
                     for t in traces for g in t.ties]
        if self.collection.dropped:
            warnings.append(f"{len(self.collection.dropped)} gene sets dropped "
                            "(no measured genes)")
        cfg = self.config if c_star == self.config.c_star else _replace_c(self.config, c_star)
        sig = Signature(tuple(genes), genes, cfg.fingerprint())
        return SamgsrResult(sig, traces, self.pvalues, self.screened, tuple(warnings))


def _replace_c(config: SamgsrConfig, c_star: float) -> SamgsrConfig:
    d = config.to_dict()
    d["c_star"] = c_star
    return SamgsrConfig.from_dict(d)


def run_samgsr(dataset: ExpressionDataset, collection: GeneSetCollection,
               graph: ConnectivityGraph | None = None, config: SamgsrConfig = SamgsrConfig(),
               threads: int = 1) -> SamgsrResult:
    """Screen sets, reduce each significant one, and return the union of cores.

    Parameters
    ----------
    dataset : ExpressionDataset
        Two-class expression data.
    collection : GeneSetCollection
        Gene sets; restricted to measured genes internally.
    graph : ConnectivityGraph, optional
        Required when ``config.weighted``.
    config : SamgsrConfig
    threads : int
        Workers for the permutation engine; results do not depend on it.
    """
    return PreparedRun(dataset, collection, graph, config, threads).result()
