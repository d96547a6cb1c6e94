"""Small fixture builders shared by the test modules."""

import numpy as np

from wsamgsr.data import ExpressionDataset, GeneSetCollection


def random_dataset(rng, n_genes, n_pos, n_neg, shift=None, names=None):
    """Standard-normal data; ``shift`` (length n_genes) is added to the positives."""
    x = rng.standard_normal((n_genes, n_pos + n_neg))
    if shift is not None:
        x[:, :n_pos] += np.asarray(shift, dtype=float)[:, None]
    labels = ["b"] * n_pos + ["a"] * n_neg
    genes = names or [f"g{i}" for i in range(n_genes)]
    return ExpressionDataset(tuple(genes), x, tuple(labels))


def random_collection(rng, genes, n_sets, min_size=2, max_size=None):
    genes = list(genes)
    max_size = max_size or max(min_size, len(genes) // 2)
    sets = {}
    for j in range(n_sets):
        size = int(rng.integers(min_size, max_size + 1))
        pick = rng.choice(len(genes), size=size, replace=False)
        sets[f"S{j}"] = tuple(genes[i] for i in sorted(pick))
    return GeneSetCollection(sets)


def ring_edges(genes, reach=2):
    """Circulant graph: every gene linked to its ``reach`` neighbours on each side."""
    n = len(genes)
    return [(genes[i], genes[(i + k) % n]) for i in range(n) for k in range(1, reach + 1)]


def write_fixture(directory, seed=0, n_genes=40, n_pos=10, n_neg=10):
    """Expression, labels, GMT and edge files for command-line runs.

    Returns a dict of paths keyed by ``expression``, ``labels``, ``gmt``
    and ``ppi``; the first four genes carry a class shift.
    """
    from wsamgsr.io import write_edges, write_expression, write_gmt

    rng = np.random.default_rng(seed)
    shift = np.zeros(n_genes)
    shift[:4] = 1.5
    ds = random_dataset(rng, n_genes, n_pos, n_neg, shift=shift)
    ds = ExpressionDataset(ds.gene_ids, ds.values, ds.labels,
                           tuple(f"s{i:02d}" for i in range(ds.n_samples)))
    coll = GeneSetCollection({"hit": tuple(f"g{i}" for i in range(8)),
                              **random_collection(rng, ds.gene_ids, 4, 3, 10).sets})
    edges = [(ds.gene_ids[i], ds.gene_ids[j]) for i in range(n_genes) for j in range(i)
             if rng.random() < 0.1]
    paths = {k: str(directory / name) for k, name in
             (("expression", "x.tsv"), ("labels", "y.tsv"), ("gmt", "sets.gmt"),
              ("ppi", "ppi.tsv"))}
    write_expression(ds, paths["expression"], paths["labels"])
    write_gmt(coll, paths["gmt"])
    write_edges(edges, paths["ppi"])
    return paths
