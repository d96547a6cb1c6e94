"""File formats (GMT, expression/label TSV, edge lists) and run reports."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from .connectivity import NORMALIZATION_SCHEMES
from .data import DataError, ExpressionDataset, GeneSetCollection
from .reduction import ConfigError, SamgsrConfig
from .sam import S0Rule

REPORT_SCHEMA = 1
_LABEL_HEADERS = {"sample", "sample_id", "sampleid", "id", "samples", "name"}


def fingerprint(obj) -> str:
    """Short stable hash of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class ParseError(DataError):
    """Malformed input file; the message carries the file and position."""

    def __init__(self, path, message, line=None, column=None):
        where = f"{path}"
        if line is not None:
            where += f":{line}"
        if column is not None:
            where += f":{column}"
        super().__init__(f"{where}: {message}")
        self.path, self.line, self.column = str(path), line, column


def _lines(path):
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            yield lineno, raw.rstrip("\r\n")


def parse_gmt(path) -> GeneSetCollection:
    """Read a GMT file: ``name<TAB>description<TAB>gene<TAB>gene...`` per line.

    Blank lines are skipped. Duplicate genes within a line are merged with
    a warning; an empty file yields an empty collection (also warned).
    """
    sets: dict[str, tuple[str, ...]] = {}
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        parts = line.split("\t")
        while parts and parts[-1] == "":
            parts.pop()
        if len(parts) < 3:
            raise ParseError(path, f"expected name, description and at least one gene, "
                                   f"got {len(parts)} field(s)", lineno)
        name = parts[0].strip()
        if name in sets:
            raise ParseError(path, f"duplicate gene set name {name!r}", lineno)
        genes = [g.strip() for g in parts[2:] if g.strip()]
        unique = tuple(dict.fromkeys(genes))
        if len(unique) != len(genes):
            warnings.warn(f"{path}:{lineno}: gene set {name!r} lists "
                          f"{len(genes) - len(unique)} duplicate gene(s); merged", stacklevel=2)
        sets[name] = unique
    if not sets:
        warnings.warn(f"{path}: no gene sets found", stacklevel=2)
    return GeneSetCollection(sets, provenance=f"gmt:{Path(path).name}")


def write_gmt(collection: GeneSetCollection, path) -> None:
    with open(path, "w") as fh:
        for name, genes in collection.items():
            fh.write("\t".join([name, "na", *genes]) + "\n")


def parse_labels(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in _lines(path):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(path, f"expected 2 columns (sample, label), got {len(parts)}", lineno)
        sid, label = parts[0].strip(), parts[1].strip()
        if not out and sid.lower() in _LABEL_HEADERS:
            continue
        if sid in out:
            raise ParseError(path, f"duplicate sample id {sid!r}", lineno)
        out[sid] = label
    return out


def parse_expression(path_matrix, path_labels) -> ExpressionDataset:
    """Read an expression TSV (genes in rows) and join its samples to labels.

    The matrix header names the samples after a leading gene-column cell.
    Every matrix cell must parse as a finite number; ``NA`` and the like
    are errors reported with their coordinates.
    """
    labels = parse_labels(path_labels)
    it = _lines(path_matrix)
    try:
        _, header = next(it)
    except StopIteration:
        raise ParseError(path_matrix, "empty expression file") from None
    samples = [s.strip() for s in header.split("\t")[1:]]
    if not samples:
        raise ParseError(path_matrix, "header names no samples", 1)
    seen = set()
    for col, s in enumerate(samples, start=2):
        if s in seen:
            raise ParseError(path_matrix, f"duplicate sample id {s!r}", 1, col)
        seen.add(s)
    only_matrix = [s for s in samples if s not in labels]
    only_labels = [s for s in labels if s not in seen]
    if only_matrix or only_labels:
        msg = []
        if only_matrix:
            msg.append(f"samples without labels: {only_matrix}")
        if only_labels:
            msg.append(f"labelled samples missing from matrix: {only_labels}")
        raise DataError("; ".join(msg))
    genes, rows, index = [], [], {}
    for lineno, line in it:
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(samples) + 1:
            raise ParseError(path_matrix, f"expected {len(samples) + 1} fields, got {len(parts)}",
                             lineno)
        gene = parts[0].strip()
        if gene in index:
            raise ParseError(path_matrix, f"duplicate gene id {gene!r} "
                                          f"(first on line {index[gene]})", lineno)
        index[gene] = lineno
        vals = []
        for col, cell in enumerate(parts[1:], start=2):
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise ParseError(path_matrix, f"non-numeric value {cell!r}", lineno, col)
            vals.append(v)
        genes.append(gene)
        rows.append(vals)
    if not genes:
        raise ParseError(path_matrix, "no gene rows")
    return ExpressionDataset(tuple(genes), np.array(rows), tuple(labels[s] for s in samples),
                             tuple(samples))


def write_expression(dataset: ExpressionDataset, path_matrix, path_labels) -> None:
    sids = dataset.sample_ids or tuple(f"S{i}" for i in range(dataset.n_samples))
    with open(path_matrix, "w") as fh:
        fh.write("\t".join(["gene", *sids]) + "\n")
        for g, row in zip(dataset.gene_ids, dataset.values):
            fh.write("\t".join([g, *(repr(float(v)) for v in row)]) + "\n")
    with open(path_labels, "w") as fh:
        for s, lab in zip(sids, dataset.labels):
            fh.write(f"{s}\t{lab}\n")


@dataclass
class EdgeList:
    pairs: list[tuple[str, str]]
    self_loops: int = 0
    duplicates: int = 0


def parse_edges(path, header: bool = False) -> EdgeList:
    """Read a two-column undirected edge list.

    Self-loops are dropped and duplicate (including reversed) pairs merged;
    both are counted. ``header`` skips the first non-blank line.
    """
    pairs, seen = [], set()
    loops = dups = 0
    skip = header
    for lineno, line in _lines(path):
        if not line.strip() or line.startswith("#"):
            continue
        if skip:
            skip = False
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ParseError(path, f"expected 2 columns (geneA, geneB), got {len(parts)}", lineno)
        a, b = parts[0].strip(), parts[1].strip()
        if a == b:
            loops += 1
            continue
        key = (a, b) if a < b else (b, a)
        if key in seen:
            dups += 1
            continue
        seen.add(key)
        pairs.append((a, b))
    return EdgeList(pairs, loops, dups)


def write_edges(pairs: Iterable[tuple[str, str]], path) -> None:
    with open(path, "w") as fh:
        for a, b in pairs:
            fh.write(f"{a}\t{b}\n")


@dataclass
class RunConfig:
    """Inputs and parameters of one CLI run.

    ``out`` and ``threads`` are execution details and stay out of
    :meth:`to_dict`, so they never reach a report.
    """

    expression: str | None = None
    labels: str | None = None
    gmt: str | None = None
    ppi: str | None = None
    ppi_header: bool = False
    weighted: bool = False
    alpha: float = 0.05
    c_star: float = 0.5
    grid: tuple[float, ...] | None = None
    B: int = 1000
    K: int = 5
    seed: int = 0
    s0: str = "median"
    normalization: str = "mean-one"
    positive: str | None = None
    lam: float = 1e-2
    out: str | None = None
    threads: int = 1

    def validate(self, require: Iterable[str] = ()) -> "RunConfig":
        """Check ranges and that required inputs are given and exist.

        Raises :class:`ConfigError` before any data is read.
        """
        if self.weighted and not self.ppi:
            raise ConfigError("--weighted requires --ppi (an edge-list file)")
        for name in require:
            if not getattr(self, name):
                raise ConfigError(f"--{name.replace('_', '-')} is required")
        for name in ("expression", "labels", "gmt", "ppi"):
            path = getattr(self, name)
            if path and not Path(path).is_file():
                raise ConfigError(f"--{name}: file not found: {path}")
        if not 0 < self.alpha <= 1:
            raise ConfigError("--alpha must lie in (0, 1]")
        if not 0 < self.c_star < 1:
            raise ConfigError("--c-star must lie in (0, 1)")
        if self.grid is not None and (not self.grid or any(not 0 < c < 1 for c in self.grid)):
            raise ConfigError("--grid values must lie in (0, 1)")
        if self.B < 1:
            raise ConfigError("-B must be at least 1")
        if self.K < 2:
            raise ConfigError("-K must be at least 2")
        if self.seed < 0:
            raise ConfigError("--seed must be non-negative")
        if self.lam <= 0:
            raise ConfigError("--lam must be positive")
        if self.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if self.normalization not in NORMALIZATION_SCHEMES:
            raise ConfigError(f"--normalization must be one of {NORMALIZATION_SCHEMES}")
        try:
            S0Rule.parse(self.s0)
        except ValueError as exc:
            raise ConfigError(f"--s0: {exc}") from None
        return self

    def samgsr_config(self) -> SamgsrConfig:
        return SamgsrConfig(weighted=self.weighted, alpha=self.alpha, c_star=self.c_star,
                            B=self.B, seed=self.seed, s0=S0Rule.parse(self.s0),
                            normalization=self.normalization, positive=self.positive)

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["out"], d["threads"]
        if self.grid is not None:
            d["grid"] = list(self.grid)
        return d


@dataclass
class RunReport:
    """Everything a CLI run produced. ``created`` is the only volatile field."""

    command: str
    version: str
    config: dict
    config_fingerprint: str = ""
    signature: dict | None = None
    traces: list = field(default_factory=list)
    pvalues: dict | None = None
    tuning: dict | None = None
    model: dict | None = None
    evaluations: dict = field(default_factory=dict)
    stability: dict | None = None
    simulation: dict | None = None
    weights: dict | None = None
    warnings: list = field(default_factory=list)
    schema: int = REPORT_SCHEMA
    created: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "RunReport":
        return cls.from_json(Path(path).read_text())

    def stamp(self) -> "RunReport":
        self.created = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return self

    def without_timestamp(self) -> dict:
        d = self.to_dict()
        d.pop("created")
        return d


def format_table(header: list[str], rows: list[list], title: str = "") -> str:
    cells = [[str(h) for h in header]] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    out = [title] if title else []
    for k, r in enumerate(cells):
        out.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                             for i, (c, w) in enumerate(zip(r, widths))))
        if k == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out)


def _fmt(c) -> str:
    if isinstance(c, float):
        return f"{c:.4g}"
    return str(c)


def render_text(report: RunReport) -> str:
    """Human-readable tables for whatever sections the report carries."""
    parts = [f"command: {report.command}   version: {report.version}   "
             f"config: {report.config_fingerprint}"]
    if report.pvalues:
        rows = [[r["set"], r["size"], r["score"], r["pvalue"]] for r in report.pvalues["sets"]]
        parts.append(format_table(["gene set", "size", "score", "p"], rows, "Gene-set p-values"))
    if report.tuning:
        t = report.tuning
        rows = [[c, e, "*" if c == t["chosen"] else ""] for c, e in zip(t["grid"], t["errors"])]
        parts.append(format_table(["c_star", "CV error", "chosen"], rows,
                                  f"Threshold tuning ({t['K']}-fold)"))
    if report.traces:
        rows = [[t["set"], len(t["ordered_genes"]), t["stop_k"], ",".join(t["core"]),
                 "yes" if t["exhausted"] else ""] for t in report.traces]
        parts.append(format_table(["gene set", "size", "k", "core", "exhausted"], rows,
                                  "Reductions"))
    if report.signature is not None:
        genes = report.signature["genes"]
        parts.append(f"Signature ({len(genes)} genes): {', '.join(genes) if genes else '(empty)'}")
    if report.evaluations:
        rows = [[name, 100 * e["error_rate"], e["gbs"], e["bcm"], e["aupr"], e["n_samples"]]
                for name, e in report.evaluations.items()]
        parts.append(format_table(["data", "Error(%)", "GBS", "BCM", "AUPR", "n"], rows,
                                  "Performance"))
    if report.stability:
        s = report.stability
        parts.append(format_table(["level", "Rand"], [["gene", s["rand_gene"]],
                                                      ["pathway", s["rand_pathway"]]],
                                  f"Stability over {s['k']} runs"))
    if report.weights:
        w = report.weights
        rows = [[g, v] for g, v in sorted(w["raw"].items(), key=lambda kv: (-kv[1], kv[0]))[:20]]
        title = "Connectivity weights (top 20)"
        if w.get("spearman") is not None:
            title += f"; Spearman(set count, weight) = {w['spearman']:.4f}"
        parts.append(format_table(["gene", "w"], rows, title))
    if report.simulation and "table" in report.simulation:
        parts.append("Simulation\n" + report.simulation["table"])
    if report.warnings:
        parts.append("Warnings:\n" + "\n".join(f"  - {w}" for w in report.warnings))
    return "\n\n".join(parts) + "\n"


def write_report(report: RunReport, outdir) -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    js, txt = outdir / "report.json", outdir / "report.txt"
    js.write_text(report.to_json())
    txt.write_text(render_text(report))
    return js, txt
