"""Per-gene SAM statistics and gene-set scores.

For a gene with group means ``m_d`` (positive class) and ``m_c`` (the
other class) the statistic is ``d = (m_d - m_c) / (s + s0)``, where ``s`` is
the two-group pooled standard deviation and ``s0`` a positive offset shared
by all genes. A gene set's score is the sum of squared ``d`` over its
members. The weighted variant multiplies each ``d`` by the gene's
normalized connectivity weight before anything downstream sees it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .connectivity import WeightVector
from .data import DataError, ExpressionDataset


@dataclass(frozen=True)
class S0Rule:
    """How the offset ``s0`` is derived from the per-gene pooled SDs.

    ``kind`` is ``"median"``, ``"percentile"`` (``value`` = q in [0, 100])
    or ``"fixed"`` (``value`` = the offset itself).
    """

    kind: str = "median"
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("median", "percentile", "fixed"):
            raise ValueError(f"unknown s0 rule {self.kind!r}")
        if self.kind == "fixed" and not (self.value is not None and self.value > 0):
            raise ValueError("fixed s0 needs a positive value")
        if self.kind == "percentile" and not (self.value is not None and 0 <= self.value <= 100):
            raise ValueError("percentile s0 needs q in [0, 100]")

    @classmethod
    def parse(cls, text: str) -> "S0Rule":
        """Parse ``median``, ``fixed:0.1`` or ``percentile:5``."""
        kind, _, arg = text.partition(":")
        return cls(kind, float(arg) if arg else None)

    def __str__(self):
        return self.kind if self.value is None else f"{self.kind}:{self.value:g}"


@dataclass(frozen=True, eq=False)
class SamStatistics:
    gene_ids: tuple[str, ...]
    d: np.ndarray
    s: np.ndarray
    s0: float
    positive: str
    weighted: bool = False
    weights_used: WeightVector | None = None

    def __post_init__(self):
        if not (len(self.d) == len(self.s) == len(self.gene_ids)):
            raise DataError("statistic arrays disagree in length")
        object.__setattr__(self, "_index", {g: i for i, g in enumerate(self.gene_ids)})

    def index(self, genes: Sequence[str]) -> np.ndarray:
        try:
            return np.fromiter((self._index[g] for g in genes), dtype=np.intp, count=len(genes))
        except KeyError as exc:
            raise DataError(f"gene {exc.args[0]!r} has no statistic") from None

    def value(self, gene: str) -> float:
        return float(self.d[self._index[gene]])


@dataclass(frozen=True)
class SetScore:
    set_name: str
    score: float
    size: int


def resolve_positive(dataset: ExpressionDataset, positive: str | None = None) -> str:
    """Validate a two-class design and return the positive class label.

    Without an explicit choice the last class in sorted order is positive.
    """
    classes = dataset.classes
    if len(classes) != 2:
        raise DataError(f"SAM statistics need exactly two classes, got {list(classes)}")
    counts = dataset.class_counts()
    small = [c for c, k in counts.items() if k < 2]
    if small:
        raise DataError(f"class {small[0]!r} has fewer than 2 samples")
    if positive is None:
        return classes[-1]
    positive = str(positive)
    if positive not in classes:
        raise DataError(f"positive class {positive!r} not among labels {list(classes)}")
    return positive


def pooled_sd(dataset: ExpressionDataset, gene: str) -> float:
    """Two-group pooled standard deviation of one gene.

    ``sqrt((SS_1 + SS_2) / (n_1 + n_2 - 2))`` with ``SS`` the within-group
    sums of squared deviations.
    """
    classes = dataset.classes
    if len(classes) != 2:
        raise DataError(f"pooled SD needs exactly two classes, got {list(classes)}")
    x = dataset.row(gene)
    labels = np.asarray(dataset.labels)
    ss = 0.0
    for cls in classes:
        grp = x[labels == cls]
        if grp.size < 2:
            raise DataError(f"class {cls!r} has fewer than 2 samples")
        ss += float(((grp - grp.mean()) ** 2).sum())
    return float(np.sqrt(ss / (x.size - 2)))


def compute_s0(all_s, method: S0Rule | str = "median") -> float:
    """Offset ``s0`` from the per-gene pooled SDs.

    Median and percentile rules look only at strictly positive SDs;
    percentiles use linear interpolation between order statistics.
    """
    if isinstance(method, str):
        method = S0Rule.parse(method)
    s = np.asarray(all_s, dtype=float)
    if s.size == 0:
        raise DataError("no standard deviations to derive s0 from")
    if method.kind == "fixed":
        return float(method.value)
    pos = s[s > 0]
    if pos.size == 0:
        raise DataError("all pooled SDs are zero; use a fixed s0")
    if method.kind == "median":
        return float(np.median(pos))
    return float(np.percentile(pos, method.value))


def _s0_columns(s: np.ndarray, rule: S0Rule) -> np.ndarray:
    """``compute_s0`` applied to each column of a genes x draws SD matrix."""
    if rule.kind == "fixed":
        return np.full(s.shape[1], float(rule.value))
    if np.all(s > 0):
        if rule.kind == "median":
            return np.median(s, axis=0)
        return np.percentile(s, rule.value, axis=0)
    return np.array([compute_s0(s[:, j], rule) for j in range(s.shape[1])])


class _GroupStats:
    """Label-independent pieces of the statistic, reused across draws.

    Values are centered per gene once, so the one-pass variance formula
    below works on small numbers.
    """

    def __init__(self, values: np.ndarray):
        self.n = values.shape[1]
        self.xc = values - values.mean(axis=1, keepdims=True)
        self.sumsq = (self.xc ** 2).sum(axis=1)

    def d_block(self, masks: np.ndarray, rule: S0Rule, cols: np.ndarray | None = None):
        """Statistics for a block of group assignments.

        ``masks`` is draws x samples, True marking the positive group.
        Returns ``(d, s, s0)`` with ``d`` and ``s`` shaped draws x genes
        (``d`` restricted to ``cols`` when given).
        """
        m = masks.astype(np.float64)
        n_d = m.sum(axis=1)
        n_c = self.n - n_d
        mean_d = (self.xc @ m.T) / n_d
        mean_c = (self.xc @ (1.0 - m).T) / n_c
        between = n_d * mean_d ** 2 + n_c * mean_c ** 2
        ss = np.maximum(self.sumsq[:, None] - between, 0.0)
        s = np.sqrt(ss / (self.n - 2))
        s0 = _s0_columns(s, rule)
        diff = mean_d - mean_c
        denom = s + s0
        if cols is not None:
            diff, denom = diff[cols], denom[cols]
        return (diff / denom).T, s.T, s0


def positive_mask(dataset: ExpressionDataset, positive: str) -> np.ndarray:
    return np.asarray(dataset.labels) == positive


def sam_statistic(dataset: ExpressionDataset, s0: S0Rule | float | str = "median",
                  positive: str | None = None) -> SamStatistics:
    """SAM statistic of every gene for a two-class dataset.

    Parameters
    ----------
    dataset : ExpressionDataset
        Exactly two classes, each with at least two samples.
    s0 : S0Rule, float or str
        Offset rule; a bare number means a fixed offset.
    positive : str, optional
        Class whose mean comes first in the numerator.
    """
    positive = resolve_positive(dataset, positive)
    rule = _as_rule(s0)
    mask = positive_mask(dataset, positive)[None, :]
    d, s, s0v = _GroupStats(dataset.values).d_block(mask, rule)
    return SamStatistics(dataset.gene_ids, d[0], s[0], float(s0v[0]), positive)


def _as_rule(s0) -> S0Rule:
    if isinstance(s0, S0Rule):
        return s0
    if isinstance(s0, str):
        return S0Rule.parse(s0)
    return S0Rule("fixed", float(s0))


def weighted_sam_statistic(stats: SamStatistics, weights: WeightVector) -> SamStatistics:
    """Scale each gene's statistic by its (normalized) connectivity weight."""
    w = weights.aligned(stats.gene_ids)
    return SamStatistics(stats.gene_ids, stats.d * w, stats.s, stats.s0, stats.positive,
                         weighted=True, weights_used=weights)


def samgs_score(stats: SamStatistics, gene_set: Sequence[str], name: str = "") -> SetScore:
    """Sum of squared statistics over ``gene_set``, in member order."""
    idx = stats.index(list(gene_set))
    return SetScore(name, float(np.sum(stats.d[idx] ** 2)), len(idx))
