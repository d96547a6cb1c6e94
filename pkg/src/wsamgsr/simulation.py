"""Synthetic data from a logistic model over planted genes, and the replicate study.

Features are i.i.d. standard normal (or standardized real expression);
the class of each sample is drawn as Bernoulli(sigmoid(sum_g coef_g x_g)),
or set to the event whenever that logit is positive in threshold mode.
Class "2" is the event, class "1" the reference.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ._rng import derive_rng, derive_seed
from .connectivity import ConnectivityGraph, build_graph
from .data import DataError, ExpressionDataset, GeneSetCollection
from .metrics import evaluate
from .permutation import thread_map
from .pipeline import DEFAULT_GRID, select_and_fit
from .reduction import SamgsrConfig
from .sam import S0Rule

logger = logging.getLogger(__name__)

EVENT, REFERENCE = "2", "1"
METHODS = ("samgsr", "weighted")


@dataclass(frozen=True)
class SimConfig:
    """Synthetic analog of a five-pathway simulation.

    The gene universe, interaction graph and gene sets depend only on
    ``seed``; replicates redraw expression values and labels.

    ``planted`` maps gene id to logit coefficient. ``planted_degree``
    gives, per planted gene, the quantile of the degree distribution at
    which that gene sits in the graph. ``planted_sets`` lists the set
    indices each planted gene belongs to.
    """

    n_train: int = 60
    n_test: int = 60
    n_genes: int = 1000
    planted: tuple[tuple[str, float], ...] = (("HDAC1", 0.37), ("GNAS", -0.86))
    planted_degree: tuple[float, ...] = (0.95, 0.5)
    planted_sets: tuple[tuple[int, ...], ...] = ((0, 1), (0,))
    set_sizes: tuple[int, ...] = (200, 200, 200, 200, 200)
    overlap: float = 0.1
    graph_model: str = "preferential"
    attach: int = 2
    degree_mean: float = 8.0
    degree_shape: float = 2.0
    label_mode: str = "bernoulli"
    seed: int = 0

    def __post_init__(self):
        if len(self.planted) != len(self.planted_degree) or len(self.planted) != len(self.planted_sets):
            raise ValueError("planted, planted_degree and planted_sets must align")
        for g, c in self.planted:
            if not np.isfinite(c) or c == 0:
                raise ValueError(f"planted coefficient for {g!r} must be finite and nonzero")
        if len(self.planted) > self.n_genes:
            raise ValueError("more planted genes than genes in the universe")
        if self.graph_model not in ("preferential", "chung-lu"):
            raise ValueError("graph_model must be 'preferential' or 'chung-lu'")
        if self.label_mode not in ("bernoulli", "threshold"):
            raise ValueError("label_mode must be 'bernoulli' or 'threshold'")
        if sum(self.set_sizes) > self.n_genes:
            raise ValueError("set sizes exceed the universe")

    @classmethod
    def hub_study(cls, seed: int = 0, **overrides) -> "SimConfig":
        """Desk-scale design for comparing the two selection methods.

        The weak-signal gene sits at the 95th degree percentile of a
        Chung-Lu graph and shares the smallest set with the strong-signal
        gene; labels are thresholded logits.
        """
        base = dict(planted_degree=(0.95, 0.5), planted_sets=((0, 1), (0,)),
                    set_sizes=(15, 60, 150, 300, 475), graph_model="chung-lu",
                    label_mode="threshold", seed=seed)
        base.update(overrides)
        return cls(**base)

    @property
    def planted_genes(self) -> tuple[str, ...]:
        return tuple(g for g, _ in self.planted)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for _, c in self.planted], dtype=float)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["planted"] = [list(p) for p in self.planted]
        d["planted_degree"] = list(self.planted_degree)
        d["planted_sets"] = [list(s) for s in self.planted_sets]
        d["set_sizes"] = list(self.set_sizes)
        return d


def sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -np.asarray(x, dtype=float)))


def logit(config: SimConfig, planted_values: np.ndarray) -> np.ndarray:
    """Linear predictor for rows of planted-gene values (samples x planted)."""
    return np.asarray(planted_values, dtype=float) @ config.coefficients


def draw_labels(eta: np.ndarray, rng: np.random.Generator,
                mode: str = "bernoulli") -> tuple[str, ...]:
    """Event labels from the linear predictor.

    ``bernoulli`` draws each label with probability ``sigmoid(eta)``;
    ``threshold`` assigns the event exactly when ``eta > 0``. The uniform
    draws are consumed in both modes so the two share random streams.
    """
    u = rng.random(eta.shape[0])
    if mode == "threshold":
        return tuple(EVENT if e > 0 else REFERENCE for e in eta)
    return tuple(EVENT if ui < pi else REFERENCE for ui, pi in zip(u, sigmoid(eta)))


def preferential_attachment(n: int, m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Barabasi-Albert style edges on nodes ``0..n-1`` (heavy-tailed degrees)."""
    edges = []
    targets = list(range(m))
    repeated: list[int] = []
    for node in range(m, n):
        for t in set(targets):
            edges.append((node, t))
        repeated.extend(targets)
        repeated.extend([node] * m)
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(repeated[int(rng.integers(len(repeated)))])
        targets = sorted(chosen)
    return edges


def chung_lu(n: int, mean: float, shape: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Random graph with gamma-distributed expected degrees.

    Edge ``(i, j)`` is present with probability ``min(1, k_i k_j / sum(k))``.
    """
    k = rng.gamma(shape, mean / shape, size=n)
    prob = np.minimum(1.0, np.outer(k, k) / k.sum())
    draw = rng.random((n, n))
    iu, ju = np.triu_indices(n, 1)
    hit = draw[iu, ju] < prob[iu, ju]
    return list(zip(iu[hit].tolist(), ju[hit].tolist()))


def synthetic_universe(config: SimConfig) -> tuple[tuple[str, ...], GeneSetCollection, ConnectivityGraph]:
    """Gene ids, overlapping gene sets and interaction graph for ``config``."""
    rng = derive_rng(config.seed, "universe")
    n = config.n_genes
    if config.graph_model == "preferential":
        raw = preferential_attachment(n, config.attach, rng)
    else:
        raw = chung_lu(n, config.degree_mean, config.degree_shape, rng)
    deg = np.zeros(n, dtype=int)
    for a, b in raw:
        deg[a] += 1
        deg[b] += 1
    names = [f"G{i:04d}" for i in range(n)]
    # place each planted gene on the node nearest its degree quantile
    by_degree = np.lexsort((np.arange(n), deg))
    taken: set[int] = set()
    for (gene, _), q in zip(config.planted, config.planted_degree):
        pos = int(round(q * (n - 1)))
        while by_degree[pos] in taken:
            pos = pos - 1 if pos > 0 else pos + 1
        node = int(by_degree[pos])
        taken.add(node)
        names[node] = gene
    edges = [(names[a], names[b]) for a, b in raw]

    # non-planted genes are dealt into sets of the configured sizes; a
    # fraction ``overlap`` of them also joins a second set, picked with
    # probability proportional to set size
    n_sets = len(config.set_sizes)
    planted_index = {g: i for i, g in enumerate(config.planted_genes)}
    free = [i for i, g in enumerate(names) if g not in planted_index]
    free = [free[i] for i in rng.permutation(len(free))]
    members: list[list[int]] = [[] for _ in range(n_sets)]
    pos = 0
    for j, size in enumerate(config.set_sizes):
        n_planted = sum(j in ps for ps in config.planted_sets)
        take = max(size - n_planted, 0)
        members[j].extend(free[pos:pos + take])
        pos += take
    share = np.asarray(config.set_sizes, dtype=float) / sum(config.set_sizes)
    for i in free[:pos]:
        if rng.random() < config.overlap:
            j = int(rng.choice(n_sets, p=share))
            if i not in members[j]:
                members[j].append(i)
    for g, ps in zip(config.planted_genes, config.planted_sets):
        for j in ps:
            members[j].append(names.index(g))
    members = [[names[i] for i in sorted(m)] for m in members]
    collection = GeneSetCollection(
        {f"SET{j + 1}": tuple(genes) for j, genes in enumerate(members) if genes},
        provenance=f"synthetic(seed={config.seed})")
    return tuple(names), collection, build_graph(edges, names)


def simulate_dataset(config: SimConfig, seed: int | None = None,
                     gene_ids: Sequence[str] | None = None
                     ) -> tuple[ExpressionDataset, ExpressionDataset]:
    """Independent standard-normal train and test sets with logistic labels."""
    seed = config.seed if seed is None else seed
    if gene_ids is None:
        gene_ids = synthetic_universe(config)[0]
    gene_ids = tuple(gene_ids)
    missing = [g for g in config.planted_genes if g not in gene_ids]
    if missing:
        raise DataError(f"planted genes missing from the universe: {missing}")
    pidx = [gene_ids.index(g) for g in config.planted_genes]
    out = []
    for part, n in (("train", config.n_train), ("test", config.n_test)):
        rng = derive_rng(seed, "data", part)
        x = rng.standard_normal((len(gene_ids), n))
        labels = draw_labels(logit(config, x[pidx].T), rng, config.label_mode)
        out.append(ExpressionDataset(gene_ids, x, labels,
                                     tuple(f"{part}{i:03d}" for i in range(n))))
    return out[0], out[1]


def _standardize_rows(dataset: ExpressionDataset) -> ExpressionDataset:
    """Per-gene standardization that maps constant rows to zero instead of failing."""
    x = dataset.values
    centered = x - x.mean(axis=1, keepdims=True)
    sd = np.sqrt((centered ** 2).sum(axis=1, keepdims=True) / (x.shape[1] - 1))
    z = np.divide(centered, sd, out=np.zeros_like(centered), where=sd > 0)
    return ExpressionDataset(dataset.gene_ids, z, dataset.labels, dataset.sample_ids)


def resimulate_from_real(dataset: ExpressionDataset, config: SimConfig, seed: int | None = None,
                         test: ExpressionDataset | None = None, train_fraction: float = 0.5
                         ) -> tuple[ExpressionDataset, ExpressionDataset]:
    """Replace real labels by labels drawn from the logistic model.

    Each matrix is standardized per gene (constant genes become zero rows);
    labels come from the standardized rows of the planted genes. Without a
    separate ``test`` matrix the samples of ``dataset`` are split at random.
    """
    seed = config.seed if seed is None else seed
    for g in config.planted_genes:
        if not dataset.has_gene(g) or (test is not None and not test.has_gene(g)):
            raise DataError(f"planted gene {g!r} absent from the expression matrix")
    if test is None:
        rng = derive_rng(seed, "split")
        order = rng.permutation(dataset.n_samples)
        cut = int(round(train_fraction * dataset.n_samples))
        parts = {"train": dataset.select_samples(np.sort(order[:cut])),
                 "test": dataset.select_samples(np.sort(order[cut:]))}
    else:
        parts = {"train": dataset, "test": test}
    out = []
    for part in ("train", "test"):
        z = _standardize_rows(parts[part])
        rng = derive_rng(seed, "labels", part)
        eta = logit(config, z.values[z.gene_index(config.planted_genes)].T)
        out.append(z.with_labels(draw_labels(eta, rng, config.label_mode)))
    return out[0], out[1]


@dataclass(frozen=True)
class StudySettings:
    """Selection and tuning parameters used in every replicate."""

    B: int = 1000
    alpha: float = 0.05
    grid: tuple[float, ...] = DEFAULT_GRID
    K: int = 5
    s0: S0Rule = field(default_factory=S0Rule)
    normalization: str = "mean-one"
    lam: float = 1e-2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["s0"] = str(self.s0)
        d["grid"] = list(self.grid)
        return d


@dataclass(frozen=True)
class ReplicateSummary:
    R: int
    planted: tuple[str, ...]
    methods: dict
    replicates: tuple[dict, ...] = ()

    def frequency(self, method: str, gene: str) -> float:
        return self.methods[method]["frequency"][gene]

    def to_dict(self) -> dict:
        return {"R": self.R, "planted": list(self.planted), "methods": self.methods,
                "replicates": list(self.replicates)}

    @classmethod
    def from_dict(cls, d: dict) -> "ReplicateSummary":
        return cls(d["R"], tuple(d["planted"]), d["methods"], tuple(d["replicates"]))


def run_replicate(config: SimConfig, r: int, methods: Sequence[str], settings: StudySettings,
                  universe=None) -> dict:
    """One replicate: fresh data, then tune, select, fit and evaluate per method."""
    gene_ids, collection, graph = universe or synthetic_universe(config)
    seed_r = derive_seed(config.seed, "replicate", r)
    train, test = simulate_dataset(config, seed_r, gene_ids)
    row = {"replicate": r, "seed": seed_r, "methods": {}}
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        cfg = SamgsrConfig(weighted=(method == "weighted"), alpha=settings.alpha,
                           B=settings.B, seed=derive_seed(seed_r, "selection"), s0=settings.s0,
                           normalization=settings.normalization, positive=EVENT)
        fitted = select_and_fit(train, collection, graph if cfg.weighted else None, cfg,
                                settings.grid, settings.K, lam=settings.lam)
        report = evaluate(fitted.predict(test), test.labels)
        genes = fitted.result.signature.genes
        row["methods"][method] = {
            "c_star": fitted.config.c_star,
            "size": len(genes),
            "selected": {g: (g in genes) for g in config.planted_genes},
            "eval": report.to_dict(),
        }
    return row


def summarize(rows: Sequence[dict], methods: Sequence[str], planted: Sequence[str]) -> ReplicateSummary:
    R = len(rows)
    out = {}
    for m in methods:
        cells = [row["methods"][m] for row in rows]
        out[m] = {
            "mean_size": float(np.mean([c["size"] for c in cells])),
            "frequency": {g: 100.0 * sum(c["selected"][g] for c in cells) / R for g in planted},
            **{k: float(np.mean([c["eval"][k] for c in cells]))
               for k in ("error_rate", "gbs", "bcm", "aupr")},
        }
    return ReplicateSummary(R, tuple(planted), out, tuple(rows))


def replicate_study(config: SimConfig = SimConfig(), methods: Sequence[str] = METHODS,
                    R: int = 30, settings: StudySettings = StudySettings(),
                    threads: int = 1) -> ReplicateSummary:
    """Repeat simulate -> tune -> select -> fit -> evaluate ``R`` times per method.

    Replicate ``r`` uses seeds derived from ``(config.seed, r)``, so the
    summary does not depend on ``threads`` or on method order.
    """
    if R < 1:
        raise ValueError("need at least one replicate")
    universe = synthetic_universe(config)
    rows = thread_map(lambda r: run_replicate(config, r, methods, settings, universe),
                      list(range(R)), threads)
    return summarize(rows, methods, config.planted_genes)


def format_summary(summary: ReplicateSummary) -> str:
    """Plain-text table: method (mean size), planted frequencies, test metrics."""
    head = ["Method (size)"] + [f"{g}(%)" for g in summary.planted] + \
        ["Error(%)", "GBS", "BCM", "AUPR"]
    lines = []
    for m, s in summary.methods.items():
        label = {"samgsr": "SAMGSR", "weighted": "W-SAMGSR"}.get(m, m)
        lines.append([f"{label} ({s['mean_size']:.2f})"]
                     + [f"{s['frequency'][g]:.0f}" for g in summary.planted]
                     + [f"{100 * s['error_rate']:.1f}", f"{s['gbs']:.3f}",
                        f"{s['bcm']:.3f}", f"{s['aupr']:.3f}"])
    widths = [max(len(r[i]) for r in [head] + lines) for i in range(len(head))]
    fmt = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                              for i, (c, w) in enumerate(zip(r, widths)))
    return "\n".join([fmt(head)] + [fmt(r) for r in lines] + [f"replicates: {summary.R}"])
