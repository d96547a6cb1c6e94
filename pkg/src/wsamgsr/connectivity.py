"""Gene interaction graph and connectivity weights.

A gene's weight is one plus its number of interaction partners, i.e. the
row sum of the adjacency matrix with ones on the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .data import DataError, GeneSetCollection

NORMALIZATION_SCHEMES = ("mean-one", "max-one", "sqrt-mean-one")


@dataclass(frozen=True, eq=False)
class ConnectivityGraph:
    """Undirected simple graph over a fixed gene universe.

    Edges are stored as sorted ``(a, b)`` tuples with ``a < b``; self-loops
    are never stored.
    """

    gene_ids: tuple[str, ...]
    edges: frozenset
    n_duplicates: int = 0
    n_self_loops: int = 0
    n_outside: int = 0

    def __eq__(self, other):
        if not isinstance(other, ConnectivityGraph):
            return NotImplemented
        return self.gene_ids == other.gene_ids and self.edges == other.edges

    def degrees(self) -> dict[str, int]:
        deg = dict.fromkeys(self.gene_ids, 0)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency (zero diagonal), rows in ``gene_ids`` order."""
        idx = {g: i for i, g in enumerate(self.gene_ids)}
        a = np.zeros((len(self.gene_ids),) * 2, dtype=np.int64)
        for u, v in self.edges:
            a[idx[u], idx[v]] = a[idx[v], idx[u]] = 1
        return a

    def report(self) -> dict:
        return {
            "n_genes": len(self.gene_ids),
            "n_edges": len(self.edges),
            "duplicate_edges_merged": self.n_duplicates,
            "self_loops_ignored": self.n_self_loops,
            "edges_outside_universe": self.n_outside,
        }


@dataclass(frozen=True, eq=False)
class WeightVector:
    gene_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.shape != (len(self.gene_ids),):
            raise DataError("weight vector length does not match its gene ids")
        vals.setflags(write=False)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.gene_ids)

    def __getitem__(self, gene: str) -> float:
        return float(self.values[self.gene_ids.index(gene)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.gene_ids, self.values.tolist()))

    def aligned(self, genes: Sequence[str]) -> np.ndarray:
        """Weights in the order of ``genes``; every gene must be covered."""
        lookup = dict(zip(self.gene_ids, self.values))
        out = np.empty(len(genes))
        for i, g in enumerate(genes):
            try:
                out[i] = lookup[g]
            except KeyError:
                raise DataError(f"no connectivity weight for gene {g!r}") from None
        return out

    def scaled(self, factor: float) -> "WeightVector":
        return WeightVector(self.gene_ids, self.values * factor)


def build_graph(edge_list: Iterable[Sequence[str]], universe: Sequence[str]) -> ConnectivityGraph:
    """Build an undirected graph from gene pairs, keeping edges inside ``universe``.

    Duplicate and reversed pairs are merged, self-loops ignored and pairs
    with an endpoint outside the universe dropped; all three are counted.
    """
    universe = tuple(dict.fromkeys(str(g) for g in universe))
    members = set(universe)
    edges: set[tuple[str, str]] = set()
    dup = loops = outside = 0
    for lineno, pair in enumerate(edge_list, start=1):
        pair = tuple(pair)
        if len(pair) != 2 or any(p is None or str(p) == "" for p in pair):
            raise DataError(f"edge {lineno}: expected two gene ids, got {pair!r}")
        a, b = str(pair[0]), str(pair[1])
        if a == b:
            loops += 1
            continue
        if a not in members or b not in members:
            outside += 1
            continue
        key = (a, b) if a < b else (b, a)
        if key in edges:
            dup += 1
        else:
            edges.add(key)
    return ConnectivityGraph(universe, frozenset(edges), dup, loops, outside)


def connectivity_weights(graph: ConnectivityGraph) -> WeightVector:
    """Weight of each gene: ``1 + degree`` (diagonal counted once)."""
    deg = graph.degrees()
    return WeightVector(graph.gene_ids, [1.0 + deg[g] for g in graph.gene_ids])


def normalize_weights(weights: WeightVector, scheme: str = "mean-one") -> WeightVector:
    """Rescale weights by one of ``mean-one``, ``max-one`` or ``sqrt-mean-one``.

    All schemes are monotone, so the ordering of genes by weight is kept.
    """
    w = weights.values
    if w.size == 0:
        raise DataError("cannot normalize an empty weight vector")
    if np.any(w <= 0):
        raise DataError("weights must be positive")
    if scheme == "mean-one":
        out = w / w.mean()
    elif scheme == "max-one":
        out = w / w.max()
    elif scheme == "sqrt-mean-one":
        r = np.sqrt(w)
        out = r / r.mean()
    else:
        raise ValueError(f"unknown normalization scheme {scheme!r}; "
                         f"choose from {NORMALIZATION_SCHEMES}")
    return WeightVector(weights.gene_ids, out)


def setcount_vs_connectivity(collection: GeneSetCollection, weights: WeightVector) -> float:
    """Spearman correlation between set-membership count and connectivity weight.

    Computed over genes present both in some set and in ``weights``; ties
    get average ranks.
    """
    counts = collection.membership_counts()
    common = [g for g in weights.gene_ids if g in counts]
    if len(common) < 3:
        raise DataError(f"need at least 3 genes shared by sets and weights, got {len(common)}")
    x = np.array([counts[g] for g in common], dtype=float)
    y = weights.aligned(common)
    rho = stats.spearmanr(x, y).statistic
    return float(rho)
