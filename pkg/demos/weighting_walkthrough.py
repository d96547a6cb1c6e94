"""How connectivity weights change which genes a reduction keeps.

A tiny eight-gene interaction graph is turned into weights (1 + degree,
rescaled to mean one). Then a 12-gene set is built around one strongly
shifted gene and one hub with 25 partners whose shift is modest. Without
weights the hub sits below the reduction threshold; with weights its
statistic is inflated enough to lead the ordering and it stays in the core.

Run with ``python demos/weighting_walkthrough.py``.
"""

import numpy as np

from wsamgsr import (ExpressionDataset, GeneSetCollection, SamgsrConfig, build_graph,
                     connectivity_weights, normalize_weights, run_samgsr)

genes8 = [f"g{i}" for i in range(1, 9)]
edges8 = [("g1", "g2"), ("g1", "g8"), ("g2", "g3"), ("g3", "g4"), ("g3", "g5"),
          ("g3", "g6"), ("g3", "g8"), ("g5", "g6"), ("g6", "g7"), ("g7", "g8")]
raw = connectivity_weights(build_graph(edges8, genes8))
print("raw weights (1 + degree):", raw.as_dict())
print("mean-one weights:        ",
      {g: round(w, 3) for g, w in normalize_weights(raw).as_dict().items()})

# a 60-gene universe: "hub" links to 25 genes, the rest form a chain
names = ["hub"] + [f"x{i:02d}" for i in range(59)]
edges = [("hub", f"x{i:02d}") for i in range(20, 45)]
edges += [(f"x{i:02d}", f"x{i + 1:02d}") for i in range(58)]
graph = build_graph(edges, names)

rng = np.random.default_rng(0)
x = rng.standard_normal((60, 30))
labels = ["case"] * 15 + ["ctrl"] * 15
x[0, :15] += 0.8    # hub: modest shift
x[1, :15] += 2.5    # x00: strong shift that anchors the set
data = ExpressionDataset(tuple(names), x, tuple(labels))
sets = GeneSetCollection({"demo": tuple(names[:12])})

for weighted in (False, True):
    res = run_samgsr(data, sets, graph if weighted else None,
                     SamgsrConfig(weighted=weighted, B=500, seed=3, alpha=0.2, positive="case"))
    trace = res.traces[0]
    label = "weighted  " if weighted else "unweighted"
    print(f"\n{label} order: {list(trace.ordered_genes[:4])}")
    print(f"{label} statistics: {[round(d, 2) for d in trace.statistics[:4]]}")
    print(f"{label} residual p-values: {[round(c, 3) for c in trace.c_values]}")
    print(f"{label} core at c_star=0.5: {list(trace.core)}")
