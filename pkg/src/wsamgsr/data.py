"""Containers for expression data, labels and gene sets, plus fold assignment."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._rng import derive_rng

logger = logging.getLogger(__name__)


class DataError(ValueError):
    """Raised when an input container violates its invariants."""


@dataclass(frozen=True, eq=False)
class ExpressionDataset:
    """Genes x samples expression matrix with per-sample class labels.

    The class-size requirement (every class with at least two samples) is
    checked by the statistics that need it, not here, so that held-out
    folds and single-sample test sets can still be represented.
    """

    gene_ids: tuple[str, ...]
    values: np.ndarray
    labels: tuple[str, ...]
    sample_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        gene_ids = tuple(str(g) for g in self.gene_ids)
        labels = tuple(str(lab) for lab in self.labels)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise DataError(f"expression values must be 2-D, got shape {values.shape}")
        if values.shape[0] != len(gene_ids):
            raise DataError(
                f"{values.shape[0]} expression rows but {len(gene_ids)} gene ids")
        if values.shape[1] != len(labels):
            raise DataError(
                f"{values.shape[1]} expression columns but {len(labels)} labels")
        if len(set(gene_ids)) != len(gene_ids):
            seen, dups = set(), []
            for g in gene_ids:
                if g in seen:
                    dups.append(g)
                seen.add(g)
            raise DataError(f"duplicate gene ids: {sorted(set(dups))[:10]}")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite expression value at gene {gene_ids[r]!r}, column {c}")
        sample_ids = self.sample_ids
        if sample_ids is not None:
            sample_ids = tuple(str(s) for s in sample_ids)
            if len(sample_ids) != len(labels):
                raise DataError("sample_ids and labels differ in length")
        values.setflags(write=False)
        object.__setattr__(self, "gene_ids", gene_ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sample_ids", sample_ids)
        object.__setattr__(self, "_index", {g: i for i, g in enumerate(gene_ids)})

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for lab in self.labels:
            counts[lab] = counts.get(lab, 0) + 1
        return dict(sorted(counts.items()))

    def has_gene(self, gene: str) -> bool:
        return gene in self._index

    def gene_index(self, genes: Iterable[str]) -> np.ndarray:
        """Row indices of ``genes``; raises naming the first missing gene."""
        out = []
        for g in genes:
            try:
                out.append(self._index[g])
            except KeyError:
                raise DataError(f"gene {g!r} not present in dataset") from None
        return np.asarray(out, dtype=np.intp)

    def row(self, gene: str) -> np.ndarray:
        return self.values[self.gene_index([gene])[0]]

    def select_genes(self, genes: Sequence[str]) -> "ExpressionDataset":
        idx = self.gene_index(genes)
        return ExpressionDataset(tuple(genes), self.values[idx], self.labels, self.sample_ids)

    def select_samples(self, idx: Sequence[int] | np.ndarray) -> "ExpressionDataset":
        idx = np.asarray(idx, dtype=np.intp)
        sids = None if self.sample_ids is None else tuple(self.sample_ids[i] for i in idx)
        return ExpressionDataset(
            self.gene_ids, self.values[:, idx], tuple(self.labels[i] for i in idx), sids)

    def with_labels(self, labels: Sequence[str]) -> "ExpressionDataset":
        return ExpressionDataset(self.gene_ids, self.values, tuple(labels), self.sample_ids)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update("\x1f".join(self.gene_ids).encode())
        h.update("\x1e".join(self.labels).encode())
        h.update(np.ascontiguousarray(self.values).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class GeneSetCollection:
    """Named gene sets (pathways). Set order is preserved from construction."""

    sets: Mapping[str, tuple[str, ...]]
    provenance: str = ""
    dropped: tuple[str, ...] = ()

    def __post_init__(self):
        clean: dict[str, tuple[str, ...]] = {}
        for name, genes in self.sets.items():
            genes = tuple(str(g) for g in genes)
            if len(set(genes)) != len(genes):
                raise DataError(f"gene set {name!r} contains duplicate genes")
            clean[str(name)] = genes
        object.__setattr__(self, "sets", clean)
        object.__setattr__(self, "dropped", tuple(self.dropped))

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def __getitem__(self, name: str) -> tuple[str, ...]:
        return self.sets[name]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GeneSetCollection):
            return NotImplemented
        return dict(self.sets) == dict(other.sets)

    def items(self):
        return self.sets.items()

    def genes(self) -> tuple[str, ...]:
        """Union of member genes in first-seen order."""
        seen: dict[str, None] = {}
        for genes in self.sets.values():
            for g in genes:
                seen.setdefault(g, None)
        return tuple(seen)

    def membership_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for genes in self.sets.values():
            for g in genes:
                counts[g] = counts.get(g, 0) + 1
        return counts


@dataclass(frozen=True)
class FoldAssignment:
    fold_of_sample: np.ndarray
    n_folds: int
    stratified_fully: bool = True

    def __post_init__(self):
        arr = np.asarray(self.fold_of_sample, dtype=np.intp).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "fold_of_sample", arr)

    def test_index(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_sample == k)

    def train_index(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_sample != k)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.fold_of_sample.astype(np.int64).tobytes()).hexdigest()[:16]


def standardize(dataset: ExpressionDataset) -> ExpressionDataset:
    """Center each gene to mean 0 and scale to sample SD 1 (ddof=1).

    Raises
    ------
    DataError
        If a gene has zero variance; its id is in the message.
    """
    x = dataset.values
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    sd = np.sqrt((centered ** 2).sum(axis=1, keepdims=True) / (x.shape[1] - 1))
    bad = np.flatnonzero(sd[:, 0] == 0)
    if bad.size:
        raise DataError(f"gene {dataset.gene_ids[bad[0]]!r} has zero variance")
    z = centered / sd
    # second centering pass removes the O(eps) residual mean
    z = z - z.mean(axis=1, keepdims=True)
    return ExpressionDataset(dataset.gene_ids, z, dataset.labels, dataset.sample_ids)


def drop_constant_genes(dataset: ExpressionDataset) -> tuple[ExpressionDataset, list[str]]:
    """Remove zero-variance genes; returns the filtered data and the dropped ids."""
    x = dataset.values
    keep = np.ptp(x, axis=1) > 0
    dropped = [g for g, k in zip(dataset.gene_ids, keep) if not k]
    if dropped:
        logger.warning("dropping %d zero-variance genes", len(dropped))
        idx = np.flatnonzero(keep)
        dataset = ExpressionDataset(
            tuple(dataset.gene_ids[i] for i in idx), x[idx], dataset.labels, dataset.sample_ids)
    return dataset, dropped


def restrict_collection(collection: GeneSetCollection,
                        dataset: ExpressionDataset) -> GeneSetCollection:
    """Intersect every set with the measured genes, dropping sets left empty.

    Names of dropped sets are recorded in ``dropped`` of the result.
    """
    sets: dict[str, tuple[str, ...]] = {}
    dropped = list(collection.dropped)
    for name, genes in collection.items():
        kept = tuple(g for g in genes if dataset.has_gene(g))
        if kept:
            sets[name] = kept
        else:
            dropped.append(name)
    if not sets:
        raise DataError("no gene set shares any gene with the dataset")
    if len(dropped) > len(collection.dropped):
        logger.info("dropped %d gene sets with no measured genes",
                    len(dropped) - len(collection.dropped))
    return GeneSetCollection(sets, collection.provenance, tuple(dropped))


def make_folds(labels: Sequence[str], k: int, seed: int) -> FoldAssignment:
    """Stratified K-fold assignment.

    Samples of each class are shuffled, the classes concatenated, and folds
    dealt round-robin along the result, so fold sizes differ by at most one
    and each class is spread as evenly as its size allows.
    """
    labels = [str(lab) for lab in labels]
    n = len(labels)
    if k < 2:
        raise DataError("fold count must be at least 2")
    if k > n:
        raise DataError(f"fold count {k} exceeds sample count {n}")
    rng = derive_rng(seed, "folds")
    order: list[int] = []
    full = True
    for cls in sorted(set(labels)):
        members = np.array([i for i, lab in enumerate(labels) if lab == cls])
        if members.size < k:
            full = False
        order.extend(rng.permutation(members).tolist())
    fold = np.empty(n, dtype=np.intp)
    for pos, i in enumerate(order):
        fold[i] = pos % k
    if not full:
        logger.warning("some class has fewer than %d samples; stratification is best-effort", k)
    return FoldAssignment(fold, k, full)
