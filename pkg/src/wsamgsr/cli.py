"""Command-line entry point: ``wsamgsr <subcommand> [options]``.

Every subcommand writes ``report.json`` and ``report.txt`` into ``--out``.
Failures print a one-line JSON error record on stderr and exit nonzero
(2 for usage and configuration errors, 3 for bad input data, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import default_threads
from .connectivity import (NORMALIZATION_SCHEMES, build_graph, connectivity_weights,
                           normalize_weights, setcount_vs_connectivity)
from .data import DataError
from .io import (RunConfig, RunReport, fingerprint, parse_edges, parse_expression, parse_gmt,
                 write_report)
from .metrics import evaluate, stability
from .pipeline import (DEFAULT_GRID, LinearClassifier, constant_posteriors, fit_classifier,
                       predict, select_and_fit)
from .reduction import ConfigError, PreparedRun
from .sam import resolve_positive
from .simulation import METHODS, SimConfig, StudySettings, format_summary, replicate_study

EXIT_USAGE, EXIT_DATA, EXIT_OTHER = 2, 3, 1


def _grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wsamgsr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="wsamgsr-out", help="output directory")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $WSAMGSR_THREADS or 1); "
                             "results do not depend on it")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--expression", help="expression TSV, genes in rows")
    data.add_argument("--labels", help="two-column TSV: sample id, class label")
    data.add_argument("--gmt", help="gene sets in GMT format")
    data.add_argument("--ppi", help="two-column TSV edge list")
    data.add_argument("--ppi-header", action="store_true", help="edge list has a header line")
    data.add_argument("--weighted", action="store_true", help="connectivity-weighted statistics")
    data.add_argument("--alpha", type=float, default=0.05, help="set screening level")
    data.add_argument("-B", type=int, default=1000, help="label permutations")
    data.add_argument("--seed", type=int, default=0)
    data.add_argument("--s0", default="median", help="median | percentile:Q | fixed:V")
    data.add_argument("--normalization", default="mean-one", choices=NORMALIZATION_SCHEMES)
    data.add_argument("--positive", help="positive class label (default: last in sort order)")

    sub.add_parser("screen", parents=[common, data], help="gene-set p-values")
    r = sub.add_parser("reduce", parents=[common, data], help="full selection run")
    r.add_argument("--c-star", type=float, default=0.5, help="reduction threshold")
    r.add_argument("--lam", type=float, default=1e-2, help="classifier ridge penalty")
    c = sub.add_parser("cv", parents=[common, data], help="tune c_star by cross-validation")
    c.add_argument("--grid", type=_grid, default=DEFAULT_GRID)
    c.add_argument("-K", type=int, default=5, help="folds")
    c.add_argument("--lam", type=float, default=1e-2)

    e = sub.add_parser("evaluate", parents=[common], help="apply a saved model")
    e.add_argument("--model", required=True, help="report.json of a reduce or cv run")
    e.add_argument("--expression", required=True)
    e.add_argument("--labels", required=True)

    s = sub.add_parser("simulate", parents=[common], help="synthetic replicate study")
    s.add_argument("--replicates", type=int, default=30)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-B", type=int, default=1000)
    s.add_argument("--grid", type=_grid, default=DEFAULT_GRID)
    s.add_argument("-K", type=int, default=5)
    s.add_argument("--n-train", type=int, default=None)
    s.add_argument("--n-test", type=int, default=None)
    s.add_argument("--label-mode", choices=("threshold", "bernoulli"), default=None)
    s.add_argument("--methods", default=",".join(METHODS))

    st = sub.add_parser("stability", parents=[common], help="Rand index across run reports")
    st.add_argument("reports", nargs="+", help="report.json files (at least two)")

    w = sub.add_parser("weights", parents=[common], help="connectivity weights")
    w.add_argument("--ppi", required=True)
    w.add_argument("--ppi-header", action="store_true")
    w.add_argument("--gmt", help="gene sets for the set-count correlation")
    w.add_argument("--expression", help="restrict the universe to these genes")
    w.add_argument("--labels")
    w.add_argument("--normalization", default="mean-one", choices=NORMALIZATION_SCHEMES)
    return p


def _run_config(args) -> RunConfig:
    fields = {k: getattr(args, k) for k in RunConfig.__dataclass_fields__ if hasattr(args, k)}
    fields["threads"] = args.threads if args.threads is not None else default_threads()
    return RunConfig(**fields)


def _load(cfg: RunConfig):
    dataset = parse_expression(cfg.expression, cfg.labels)
    collection = parse_gmt(cfg.gmt)
    graph = None
    if cfg.weighted:
        edges = parse_edges(cfg.ppi, cfg.ppi_header)
        graph = build_graph(edges.pairs, dataset.gene_ids)
    return dataset, collection, graph


def _model_section(fitted_model, classes, prior) -> dict:
    return {"classifier": None if fitted_model is None else fitted_model.to_dict(),
            "classes": list(classes), "prior": prior}


def cmd_screen(args, cfg: RunConfig) -> RunReport:
    cfg.validate(("expression", "labels", "gmt"))
    dataset, collection, graph = _load(cfg)
    prep = PreparedRun(dataset, collection, graph, cfg.samgsr_config(), cfg.threads)
    pv = prep.pvalues.to_dict()
    pv["screened"] = list(prep.screened)
    res = prep.result()
    notes = [w for w in res.warnings if "passed screening" in w or "dropped" in w]
    return RunReport("screen", __version__, cfg.to_dict(), prep.config.fingerprint(),
                     pvalues=pv, warnings=notes)


def _selection_report(command, cfg, dataset, fitted_config, result, tuning, lam) -> RunReport:
    positive = resolve_positive(dataset, cfg.positive)
    negative = next(c for c in dataset.classes if c != positive)
    genes = result.signature.genes
    model = fit_classifier(dataset, genes, positive, lam=lam) if genes else None
    prior = float(np.mean(np.asarray(dataset.labels) == positive))
    if model is not None:
        posts = predict(model, dataset)
    else:
        posts = constant_posteriors(dataset.n_samples, (positive, negative), prior)
    pv = result.pvalues.to_dict()
    pv["screened"] = list(result.screened)
    return RunReport(
        command, __version__, cfg.to_dict(), fitted_config.fingerprint(),
        signature=result.signature.to_dict(),
        traces=[t.to_dict() for t in result.traces],
        pvalues=pv,
        tuning=None if tuning is None else tuning.to_dict(),
        model=_model_section(model, (positive, negative), prior),
        evaluations={"training": evaluate(posts, dataset.labels, positive).to_dict()},
        warnings=list(result.warnings),
    )


def cmd_reduce(args, cfg: RunConfig) -> RunReport:
    cfg.validate(("expression", "labels", "gmt"))
    dataset, collection, graph = _load(cfg)
    config = cfg.samgsr_config()
    result = PreparedRun(dataset, collection, graph, config, cfg.threads).result()
    return _selection_report("reduce", cfg, dataset, config, result, None, cfg.lam)


def cmd_cv(args, cfg: RunConfig) -> RunReport:
    cfg.validate(("expression", "labels", "gmt"))
    dataset, collection, graph = _load(cfg)
    fitted = select_and_fit(dataset, collection, graph, cfg.samgsr_config(), cfg.grid, cfg.K,
                            cfg.threads, cfg.lam)
    report = _selection_report("cv", cfg, dataset, fitted.config, fitted.result,
                               fitted.tuning, cfg.lam)
    report.warnings += [f"fold {k}: empty signature at c_star={c:g}; majority class predicted"
                        for k, c in fitted.tuning.empty_cells]
    return report


def cmd_evaluate(args, cfg: RunConfig) -> RunReport:
    cfg.validate(("expression", "labels"))
    if not Path(args.model).is_file():
        raise ConfigError(f"--model: file not found: {args.model}")
    saved = RunReport.load(args.model)
    if not saved.model:
        raise ConfigError(f"{args.model} carries no model (use a reduce or cv report)")
    dataset = parse_expression(cfg.expression, cfg.labels)
    classes = tuple(saved.model["classes"])
    unknown = sorted(set(dataset.labels) - set(classes))
    if unknown:
        raise DataError(f"labels {unknown} are not classes of the saved model {list(classes)}")
    if saved.model["classifier"] is not None:
        posts = predict(LinearClassifier.from_dict(saved.model["classifier"]), dataset)
    else:
        posts = constant_posteriors(dataset.n_samples, classes, saved.model["prior"],
                                    dataset.sample_ids)
    report = evaluate(posts, dataset.labels, classes[0])
    return RunReport("evaluate", __version__, {"model": saved.config_fingerprint,
                                               **cfg.to_dict()},
                     saved.config_fingerprint, signature=saved.signature,
                     evaluations={"test": report.to_dict()})


def cmd_simulate(args, cfg: RunConfig) -> RunReport:
    cfg.validate()
    if args.replicates < 1:
        raise ConfigError("--replicates must be at least 1")
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ConfigError(f"--methods must be drawn from {METHODS}")
    overrides = {k: v for k, v in (("n_train", args.n_train), ("n_test", args.n_test),
                                   ("label_mode", args.label_mode)) if v is not None}
    sim = SimConfig.hub_study(seed=cfg.seed, **overrides)
    settings = StudySettings(B=cfg.B, grid=cfg.grid, K=cfg.K)
    summary = replicate_study(sim, methods, args.replicates, settings, cfg.threads)
    config = {"simulation": sim.to_dict(), "settings": settings.to_dict(),
              "replicates": args.replicates, "methods": list(methods)}
    fp = fingerprint(config)
    return RunReport("simulate", __version__, config, fp,
                     simulation={**summary.to_dict(), "table": format_summary(summary)})


def _screened(report: RunReport) -> list[str]:
    if report.pvalues is None:
        return []
    if "screened" in report.pvalues:
        return report.pvalues["screened"]
    alpha = report.config.get("alpha", 0.05)
    return [r["set"] for r in report.pvalues["sets"] if r["pvalue"] <= alpha]


def cmd_stability(args, cfg: RunConfig) -> RunReport:
    if len(args.reports) < 2:
        raise ConfigError("stability needs at least two reports")
    for path in args.reports:
        if not Path(path).is_file():
            raise ConfigError(f"report not found: {path}")
    reports = [RunReport.load(p) for p in args.reports]
    missing = [p for p, r in zip(args.reports, reports) if r.signature is None]
    if missing:
        raise DataError(f"reports without a signature: {missing}")
    st = stability([r.signature["genes"] for r in reports], [_screened(r) for r in reports])
    config = {"reports": [r.config_fingerprint for r in reports]}
    return RunReport("stability", __version__, config, fingerprint(config),
                     stability=st.to_dict())


def cmd_weights(args, cfg: RunConfig) -> RunReport:
    cfg.validate()
    edges = parse_edges(args.ppi, args.ppi_header)
    collection = parse_gmt(args.gmt) if args.gmt else None
    if args.expression:
        if not args.labels:
            raise ConfigError("--expression needs --labels")
        universe = parse_expression(args.expression, args.labels).gene_ids
    else:
        seen = dict.fromkeys(g for pair in edges.pairs for g in pair)
        if collection is not None:
            seen.update(dict.fromkeys(collection.genes()))
        universe = tuple(seen)
    graph = build_graph(edges.pairs, universe)
    raw = connectivity_weights(graph)
    norm = normalize_weights(raw, args.normalization)
    rho = None
    notes = []
    if collection is not None:
        try:
            rho = setcount_vs_connectivity(collection, raw)
        except DataError as exc:
            notes.append(str(exc))
    graph_info = graph.report()
    graph_info["self_loops_in_file"] = edges.self_loops
    graph_info["duplicates_in_file"] = edges.duplicates
    return RunReport("weights", __version__, cfg.to_dict(), fingerprint(cfg.to_dict()),
                     weights={"raw": raw.as_dict(), "normalized": norm.as_dict(),
                              "scheme": args.normalization, "graph": graph_info,
                              "spearman": rho},
                     warnings=notes)


COMMANDS = {"screen": cmd_screen, "reduce": cmd_reduce, "cv": cmd_cv,
            "evaluate": cmd_evaluate, "simulate": cmd_simulate,
            "stability": cmd_stability, "weights": cmd_weights}


def _error(kind: str, exc: BaseException, code: int) -> int:
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _run_config(args)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = COMMANDS[args.command](args, cfg)
        report.warnings = [str(w.message) for w in caught] + report.warnings
        write_report(report.stamp(), cfg.out)
    except ConfigError as exc:
        return _error("config", exc, EXIT_USAGE)
    except (DataError, ValueError, KeyError) as exc:
        return _error("data", exc, EXIT_DATA)
    except OSError as exc:
        return _error("io", exc, EXIT_OTHER)
    return 0


if __name__ == "__main__":
    sys.exit(main())
