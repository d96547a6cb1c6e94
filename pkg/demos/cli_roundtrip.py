"""Drive the command-line tool end to end on files written to a temp folder.

Writes an expression matrix, a label file, a GMT file and an edge list,
then runs ``reduce --weighted``, applies the saved model with
``evaluate`` and prints both text reports.

Run with ``python demos/cli_roundtrip.py``.
"""

import tempfile
from pathlib import Path

import numpy as np

from wsamgsr import ExpressionDataset, GeneSetCollection
from wsamgsr.cli import main
from wsamgsr.io import write_edges, write_expression, write_gmt

rng = np.random.default_rng(5)
genes = [f"G{i:03d}" for i in range(120)]
x = rng.standard_normal((120, 40))
x[:5, :20] += 1.4
ids = tuple(f"s{i:02d}" for i in range(40))
train = ExpressionDataset(tuple(genes), x, ("AC",) * 20 + ("SCC",) * 20, ids)
sets = GeneSetCollection({f"P{j}": tuple(genes[10 * j:10 * j + 15]) for j in range(10)})
edges = [(genes[i], genes[j]) for i in range(120) for j in range(i) if rng.random() < 0.04]

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    write_expression(train, tmp / "expr.tsv", tmp / "labels.tsv")
    write_gmt(sets, tmp / "sets.gmt")
    write_edges(edges, tmp / "ppi.tsv")
    common = ["--expression", str(tmp / "expr.tsv"), "--labels", str(tmp / "labels.tsv")]
    main(["reduce", *common, "--gmt", str(tmp / "sets.gmt"), "--ppi", str(tmp / "ppi.tsv"),
          "--weighted", "-B", "500", "--out", str(tmp / "reduce")])
    print((tmp / "reduce" / "report.txt").read_text())
    main(["evaluate", "--model", str(tmp / "reduce" / "report.json"), *common,
          "--out", str(tmp / "eval")])
    print((tmp / "eval" / "report.txt").read_text())
