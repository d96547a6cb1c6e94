"""Classification metrics and signature stability."""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PosteriorMatrix:
    """Per-sample class probabilities; column ``j`` belongs to ``classes[j]``."""

    probs: np.ndarray
    classes: tuple[str, ...]
    sample_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64, copy=True)
        if p.ndim != 2 or p.shape[1] != len(self.classes):
            raise DataError(f"posterior shape {p.shape} does not match {len(self.classes)} classes")
        if np.any(p < 0) or np.any(p > 1):
            raise DataError("posterior entries must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "classes", tuple(str(c) for c in self.classes))

    def __len__(self):
        return self.probs.shape[0]

    def column(self, cls: str) -> np.ndarray:
        return self.probs[:, self.classes.index(cls)]

    def predicted(self) -> list[str]:
        """Argmax class per row; ties go to the earlier class."""
        return [self.classes[j] for j in np.argmax(self.probs, axis=1)]


def _truth_index(posteriors: PosteriorMatrix, truth: Sequence[str]) -> np.ndarray:
    truth = [str(t) for t in truth]
    if len(truth) != len(posteriors):
        raise DataError(f"{len(truth)} labels for {len(posteriors)} posterior rows")
    try:
        return np.array([posteriors.classes.index(t) for t in truth], dtype=np.intp)
    except ValueError:
        bad = next(t for t in truth if t not in posteriors.classes)
        raise DataError(f"label {bad!r} is not a posterior class") from None


def _onehot(posteriors: PosteriorMatrix, truth: Sequence[str]) -> np.ndarray:
    idx = _truth_index(posteriors, truth)
    y = np.zeros_like(posteriors.probs)
    y[np.arange(len(idx)), idx] = 1.0
    return y


def error_rate(posteriors: PosteriorMatrix, truth: Sequence[str]) -> float:
    """Fraction of samples whose argmax class differs from the truth."""
    idx = _truth_index(posteriors, truth)
    pred = np.argmax(posteriors.probs, axis=1)
    return float(np.mean(pred != idx))


def generalized_brier(posteriors: PosteriorMatrix, truth: Sequence[str]) -> float:
    r"""Multi-class Brier score scaled into [0, 1].

    .. math:: \mathrm{GBS} = \frac{1}{2N}\sum_i \sum_c (p_{ic} - y_{ic})^2
    """
    y = _onehot(posteriors, truth)
    return float(((posteriors.probs - y) ** 2).sum() / (2 * len(y)))


def belief_confusion(posteriors: PosteriorMatrix, truth: Sequence[str]) -> float:
    """Macro average over classes of the mean probability given to the true class.

    Classes without samples in ``truth`` are skipped with a warning.
    """
    idx = _truth_index(posteriors, truth)
    per_class = []
    for j, cls in enumerate(posteriors.classes):
        rows = idx == j
        if not rows.any():
            warnings.warn(f"class {cls!r} has no samples; excluded from BCM", stacklevel=2)
            continue
        per_class.append(float(posteriors.probs[rows, j].mean()))
    return float(np.mean(per_class))


def average_precision(scores, is_positive) -> float:
    """Step-wise area under the precision-recall curve.

    Thresholds sweep the distinct scores from high to low; tied scores
    enter together. Each recall increment is weighted by the precision at
    that threshold (no interpolation).
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(is_positive, dtype=bool)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise DataError("AUPR undefined without positive samples")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], y[order]
    tp = np.cumsum(y)
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    precision = tp[last] / (last + 1)
    recall = tp[last] / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def aupr(posteriors: PosteriorMatrix, truth: Sequence[str], positive: str | None = None) -> float:
    """AUPR of one class (binary) or the macro one-vs-rest average.

    With two classes and no ``positive`` given, the first column is the
    positive class. With more classes the per-class values are averaged
    over classes present in ``truth``.
    """
    idx = _truth_index(posteriors, truth)
    k = len(posteriors.classes)
    if positive is not None or k == 2:
        j = 0 if positive is None else posteriors.classes.index(positive)
        return average_precision(posteriors.probs[:, j], idx == j)
    vals = [average_precision(posteriors.probs[:, j], idx == j)
            for j in range(k) if np.any(idx == j)]
    return float(np.mean(vals))


def rand_index(lists: Sequence[Iterable[str]]) -> float:
    """Mean pairwise Jaccard similarity between ``k >= 2`` gene (or pathway) lists.

    Two empty lists count as identical (1); an empty and a non-empty list
    as disjoint (0).
    """
    sets = [set(x) for x in lists]
    k = len(sets)
    if k < 2:
        raise DataError("rand index needs at least two lists")
    total = 0.0
    for a, b in itertools.combinations(sets, 2):
        union = len(a | b)
        total += 1.0 if union == 0 else len(a & b) / union
    return 2.0 * total / (k * (k - 1))


@dataclass(frozen=True)
class EvalReport:
    error_rate: float
    gbs: float
    bcm: float
    aupr: float
    n_samples: int
    classes: tuple[str, ...]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = list(self.classes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        d = dict(d)
        d["classes"] = tuple(d["classes"])
        return cls(**d)


@dataclass(frozen=True)
class StabilityReport:
    rand_gene: float
    rand_pathway: float
    k: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(posteriors: PosteriorMatrix, truth: Sequence[str],
             positive: str | None = None) -> EvalReport:
    return EvalReport(
        error_rate(posteriors, truth),
        generalized_brier(posteriors, truth),
        belief_confusion(posteriors, truth),
        aupr(posteriors, truth, positive),
        len(posteriors),
        posteriors.classes,
    )


def stability(gene_lists: Sequence[Iterable[str]],
              pathway_lists: Sequence[Iterable[str]]) -> StabilityReport:
    return StabilityReport(rand_index(gene_lists), rand_index(pathway_lists), len(gene_lists))
