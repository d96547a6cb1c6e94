"""Threshold tuning, the linear classifier fitted on a signature, and posteriors."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._rng import derive_seed
from .connectivity import ConnectivityGraph
from .data import DataError, ExpressionDataset, GeneSetCollection, make_folds
from .metrics import PosteriorMatrix
from .permutation import thread_map
from .reduction import ConfigError, PreparedRun, SamgsrConfig, SamgsrResult, _replace_c
from .sam import resolve_positive

logger = logging.getLogger(__name__)

DEFAULT_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


@dataclass(frozen=True, eq=False)
class LinearClassifier:
    """Linear margin model on standardized signature genes.

    ``margin = ((x - center) / scale) @ coef + intercept`` and
    ``P(positive) = 1 / (1 + exp(cal_slope * margin + cal_offset))`` with
    ``cal_slope <= 0``.
    """

    genes: tuple[str, ...]
    coef: np.ndarray
    intercept: float
    center: np.ndarray
    scale: np.ndarray
    cal_slope: float
    cal_offset: float
    positive: str
    negative: str

    def __post_init__(self):
        for name in ("coef", "center", "scale"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if arr.shape != (len(self.genes),):
                raise DataError(f"{name} length does not match the signature size")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "genes", tuple(self.genes))
        if not np.isfinite(self.cal_slope):
            raise DataError("calibration slope must be finite")

    def __eq__(self, other):
        if not isinstance(other, LinearClassifier):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    @property
    def classes(self) -> tuple[str, str]:
        return (self.positive, self.negative)

    def margins(self, dataset: ExpressionDataset) -> np.ndarray:
        x = dataset.values[dataset.gene_index(self.genes)]
        z = (x.T - self.center) / self.scale
        return z @ self.coef + self.intercept

    def to_dict(self) -> dict:
        return {
            "genes": list(self.genes),
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "cal_slope": self.cal_slope,
            "cal_offset": self.cal_offset,
            "positive": self.positive,
            "negative": self.negative,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearClassifier":
        return cls(tuple(d["genes"]), d["coef"], d["intercept"], d["center"], d["scale"],
                   d["cal_slope"], d["cal_offset"], d["positive"], d["negative"])


def _squared_hinge_fit(z: np.ndarray, y: np.ndarray, lam: float, max_iter: int,
                       tol: float) -> tuple[np.ndarray, float]:
    """Minimize ``mean(max(0, 1 - y*(z@w + b))**2) + lam/2 * |w|^2``.

    Nesterov-accelerated gradient descent with the fixed step ``1/L``,
    ``L`` the gradient's Lipschitz constant. The intercept is unpenalized.
    """
    n, p = z.shape
    za = np.hstack([z, np.ones((n, 1))])
    lip = 2.0 * np.linalg.norm(za, 2) ** 2 / n + lam
    step = 1.0 / lip
    reg = np.r_[np.full(p, lam), 0.0]
    theta = np.zeros(p + 1)
    prev = theta
    for it in range(1, max_iter + 1):
        look = theta + (it - 1) / (it + 2) * (theta - prev)
        h = np.maximum(0.0, 1.0 - y * (za @ look))
        grad = -(2.0 / n) * (za.T @ (y * h)) + reg * look
        prev, theta = theta, look - step * grad
        if np.sqrt(grad @ grad) < tol:
            break
    return theta[:p], float(theta[p])


def _platt(margins: np.ndarray, y: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Sigmoid calibration fit by damped Newton on smoothed targets.

    Starts from slope -1, offset 0. A positive fitted slope (margins
    anti-aligned with the labels) is clamped to 0 so the map stays
    monotone non-decreasing in the margin.
    """
    n_pos = float((y > 0).sum())
    n_neg = float((y <= 0).sum())
    t = np.where(y > 0, (n_pos + 1) / (n_pos + 2), 1 / (n_neg + 2))

    def objective(a, b):
        f = a * margins + b
        # -[t log p + (1-t) log(1-p)] with p = 1/(1+exp(f))
        return float(np.sum(t * f + np.logaddexp(0.0, -f)))

    a, b = -1.0, 0.0
    fval = objective(a, b)
    for _ in range(max_iter):
        f = a * margins + b
        p = np.exp(-np.logaddexp(0.0, f))
        q = 1.0 - p
        d1 = t - p
        d2 = p * q
        g_a, g_b = float(margins @ d1), float(d1.sum())
        if abs(g_a) < 1e-10 and abs(g_b) < 1e-10:
            break
        h11 = float(margins ** 2 @ d2) + 1e-12
        h22 = float(d2.sum()) + 1e-12
        h21 = float(margins @ d2)
        det = h11 * h22 - h21 * h21
        da = -(h22 * g_a - h21 * g_b) / det
        db = -(-h21 * g_a + h11 * g_b) / det
        gd = g_a * da + g_b * db
        step = 1.0
        while step >= 1e-10:
            na, nb = a + step * da, b + step * db
            nval = objective(na, nb)
            if nval < fval + 1e-4 * step * gd:
                break
            step /= 2
        else:
            break
        a, b, fval = na, nb, nval
    if a > 0:
        mt = float(t.mean())
        a, b = 0.0, float(np.log((1 - mt) / mt))
    return a, b


def fit_classifier(dataset: ExpressionDataset, genes: Sequence[str],
                   positive: str | None = None, lam: float = 1e-2, max_iter: int = 1000,
                   tol: float = 1e-7) -> LinearClassifier:
    """Fit a squared-hinge linear classifier on ``genes`` plus a sigmoid calibration.

    Parameters
    ----------
    dataset : ExpressionDataset
        Two-class training data.
    genes : sequence of str
        Signature genes; must be non-empty and present in ``dataset``.
    positive : str, optional
        Class reported first in the posterior matrix.
    lam : float
        Ridge penalty on the coefficients.
    """
    genes = tuple(genes)
    if not genes:
        raise DataError("cannot fit a classifier on an empty signature")
    positive = resolve_positive(dataset, positive)
    negative = next(c for c in dataset.classes if c != positive)
    x = dataset.values[dataset.gene_index(genes)].T
    center = x.mean(axis=0)
    scale = x.std(axis=0, ddof=1)
    scale[scale == 0] = 1.0
    z = (x - center) / scale
    y = np.where(np.asarray(dataset.labels) == positive, 1.0, -1.0)
    coef, intercept = _squared_hinge_fit(z, y, lam, max_iter, tol)
    margins = z @ coef + intercept
    a, b = _platt(margins, y)
    return LinearClassifier(genes, coef, intercept, center, scale, a, b, positive, negative)


def _posterior_rows(p_pos: np.ndarray) -> np.ndarray:
    return np.column_stack([p_pos, 1.0 - p_pos])


def predict(model: LinearClassifier, dataset: ExpressionDataset) -> PosteriorMatrix:
    """Two-class posteriors, columns ``(positive, negative)``."""
    f = model.cal_slope * model.margins(dataset) + model.cal_offset
    p_pos = np.exp(-np.logaddexp(0.0, f))
    return PosteriorMatrix(_posterior_rows(p_pos), model.classes, dataset.sample_ids)


def constant_posteriors(n: int, classes: tuple[str, str], p_first: float,
                        sample_ids=None) -> PosteriorMatrix:
    return PosteriorMatrix(_posterior_rows(np.full(n, float(p_first))), classes, sample_ids)


def composite_four_class(p_subtype: PosteriorMatrix, p_stage: PosteriorMatrix) -> PosteriorMatrix:
    """Joint posteriors as products of two independent binary posteriors.

    Columns are ``a-b`` for ``a`` in subtype classes and ``b`` in stage
    classes (subtype-major). The final column is formed as one minus the
    others so each row sums to exactly 1 in floating point.
    """
    if len(p_subtype) != len(p_stage):
        raise DataError("subtype and stage posteriors cover different sample counts")
    if (p_subtype.sample_ids is not None and p_stage.sample_ids is not None
            and p_subtype.sample_ids != p_stage.sample_ids):
        raise DataError("subtype and stage posteriors cover different samples")
    prod = np.einsum("ni,nj->nij", p_subtype.probs, p_stage.probs).reshape(len(p_subtype), -1)
    head = prod[:, :-1]
    prod[:, -1] = np.maximum(1.0 - head.sum(axis=1), 0.0)
    classes = tuple(f"{a}-{b}" for a in p_subtype.classes for b in p_stage.classes)
    ids = p_subtype.sample_ids if p_subtype.sample_ids is not None else p_stage.sample_ids
    return PosteriorMatrix(prod, classes, ids)


@dataclass(frozen=True)
class TuningResult:
    grid: tuple[float, ...]
    errors: tuple[float, ...]
    chosen: float
    folds_fingerprint: str
    K: int
    fold_errors: tuple[tuple[int, ...], ...] = ()
    empty_cells: tuple[tuple[int, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "errors": list(self.errors),
            "chosen": self.chosen,
            "folds_fingerprint": self.folds_fingerprint,
            "K": self.K,
            "fold_errors": [list(r) for r in self.fold_errors],
            "empty_cells": [list(c) for c in self.empty_cells],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TuningResult":
        return cls(tuple(d["grid"]), tuple(d["errors"]), d["chosen"], d["folds_fingerprint"],
                   d["K"], tuple(tuple(r) for r in d["fold_errors"]),
                   tuple((int(k), float(c)) for k, c in d["empty_cells"]))


def choose_threshold(grid: Sequence[float], error_counts: Sequence[int]) -> float:
    """Grid value with fewest errors; ties go to the smallest threshold."""
    best = min(error_counts)
    return min(c for c, e in zip(grid, error_counts) if e == best)


def majority_class(labels: Sequence[str], classes: tuple[str, str]) -> str:
    counts = {c: 0 for c in classes}
    for lab in labels:
        counts[lab] += 1
    return max(classes, key=lambda c: (counts[c], -classes.index(c)))


def _fold_config(config: SamgsrConfig, seed: int, k: int, positive: str) -> SamgsrConfig:
    d = config.to_dict()
    d["seed"] = derive_seed(seed, "fold", k)
    d["positive"] = positive
    return SamgsrConfig.from_dict(d)


def tune_threshold(dataset: ExpressionDataset, collection: GeneSetCollection,
                   graph: ConnectivityGraph | None = None, grid: Sequence[float] = DEFAULT_GRID,
                   K: int = 5, seed: int = 0, config: SamgsrConfig = SamgsrConfig(),
                   threads: int = 1, lam: float = 1e-2) -> TuningResult:
    """Choose ``c_star`` by stratified K-fold cross-validated error.

    Each training partition gets its own permutation plan (seed derived from
    ``seed`` and the fold index). A cell whose signature is empty predicts
    the training majority class.
    """
    grid = tuple(float(c) for c in grid)
    if not grid:
        raise ConfigError("threshold grid is empty")
    if any(not 0 < c < 1 for c in grid):
        raise ConfigError("grid values must lie in (0, 1)")
    positive = resolve_positive(dataset, config.positive)
    negative = next(c for c in dataset.classes if c != positive)
    classes = (positive, negative)
    folds = make_folds(dataset.labels, K, derive_seed(seed, "cv"))

    def run_fold(k: int):
        train = dataset.select_samples(folds.train_index(k))
        test = dataset.select_samples(folds.test_index(k))
        prep = PreparedRun(train, collection, graph, _fold_config(config, seed, k, positive))
        truth = np.asarray(test.labels)
        fits: dict[tuple, np.ndarray] = {}
        errs, empties = [], []
        for c in grid:
            genes = prep.result(c).signature.genes
            if genes not in fits:
                if genes:
                    model = fit_classifier(train, genes, positive, lam=lam)
                    fits[genes] = np.asarray(predict(model, test).predicted())
                else:
                    fits[genes] = np.full(len(truth), majority_class(train.labels, classes))
            if not genes:
                empties.append((k, c))
            errs.append(int(np.sum(fits[genes] != truth)))
        return errs, empties

    results = thread_map(run_fold, list(range(K)), threads)
    fold_errors = tuple(tuple(r[0]) for r in results)
    counts = [sum(fe[i] for fe in fold_errors) for i in range(len(grid))]
    empty_cells = tuple(cell for r in results for cell in r[1])
    errors = tuple(c / dataset.n_samples for c in counts)
    return TuningResult(grid, errors, choose_threshold(grid, counts), folds.fingerprint(), K,
                        fold_errors, empty_cells)


@dataclass(frozen=True)
class FittedPipeline:
    """Selection result plus classifier; without a signature it predicts the
    training class prevalence."""

    result: SamgsrResult
    model: LinearClassifier | None
    tuning: TuningResult | None
    config: SamgsrConfig
    classes: tuple[str, str]
    prior: float = 0.5

    def predict(self, dataset: ExpressionDataset) -> PosteriorMatrix:
        if self.model is not None:
            return predict(self.model, dataset)
        return constant_posteriors(dataset.n_samples, self.classes, self.prior,
                                   dataset.sample_ids)


def select_and_fit(dataset: ExpressionDataset, collection: GeneSetCollection,
                   graph: ConnectivityGraph | None = None, config: SamgsrConfig = SamgsrConfig(),
                   grid: Sequence[float] | None = None, K: int = 5, threads: int = 1,
                   lam: float = 1e-2) -> FittedPipeline:
    """Optionally tune ``c_star``, run the selection on all data, fit the classifier."""
    positive = resolve_positive(dataset, config.positive)
    negative = next(c for c in dataset.classes if c != positive)
    d = config.to_dict()
    d["positive"] = positive
    config = SamgsrConfig.from_dict(d)
    tuning = None
    if grid is not None:
        tuning = tune_threshold(dataset, collection, graph, grid, K, config.seed, config,
                                threads, lam)
        config = _replace_c(config, tuning.chosen)
    result = PreparedRun(dataset, collection, graph, config, threads).result()
    genes = result.signature.genes
    model = fit_classifier(dataset, genes, positive, lam=lam) if genes else None
    prior = float(np.mean(np.asarray(dataset.labels) == positive))
    return FittedPipeline(result, model, tuning, config, (positive, negative), prior)
