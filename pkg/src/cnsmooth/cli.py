"""Command line interface: ``cnsmooth fit | eval | sweep``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .data import DataMatrix, LabelVector, load_csv, pca_reduce, standardize
from .errors import EXIT_CODES, CNSError, DataError, EvaluationError, SelectionError
from .evaluation import evaluate
from .graph import DistanceMetric, build_knn_graph
from .select import DEFAULT_CAP, DEFAULT_KMAX, TABLE_COLUMNS, grid_search

METRIC_TAGS = {"euclidean": "CNSe", "cosine": "CNSc"}


def _grid(text: str, cast):
    if text is None or text.strip().lower() == "auto":
        return None
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise SelectionError(f"cannot parse grid {text!r}") from None


def _label_selector(text: Optional[str]):
    if text is None:
        return None
    try:
        return int(text)
    except ValueError:
        return text


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def preprocess(data: DataMatrix, pca: bool = True, max_pcs: int = 100, center: bool = True) -> DataMatrix:
    data = standardize(data, center=center)
    return pca_reduce(data, max_pcs) if pca else data


def fit_data(data: DataMatrix, args, metric: str):
    """Preprocess and run the grid search; returns (outcome, prepared, manifest)."""
    t0 = time.perf_counter()
    prepared = preprocess(data, not args.no_pca, args.max_pcs, not args.no_center)
    t1 = time.perf_counter()
    outcome = grid_search(
        prepared,
        metric,
        _grid(args.k_grid, int),
        _grid(args.lambda_grid, float),
        K_max=args.kmax,
        cap=args.cap,
        tol=args.tol,
        solver=args.solver,
    )
    manifest = {
        "version": __version__,
        "preprocessing": {
            "standardize": True,
            "center": not args.no_center,
            "pca": not args.no_pca,
            "max_pcs": args.max_pcs,
            "dims_in": data.d,
            "dims_out": prepared.d,
        },
        "grids": {
            "metric": metric,
            "k": outcome.k_grid,
            "lambda": outcome.lambda_grid,
            "kmax": args.kmax,
            "cap": args.cap,
            "tol": args.tol,
            "solver": args.solver,
        },
        "candidates": [
            {"k": k, "lambda": lam, "count": c} for (k, lam), c in sorted(outcome.candidate_counts.items())
        ],
    }
    timings = {"preprocess": t1 - t0, **outcome.timings}
    return outcome, prepared, manifest, timings


def _write_labels(fh, labels: LabelVector) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["row", "label"])
    for i, v in enumerate(labels.labels):
        w.writerow([i, int(v)])


def _write_soft(fh, soft) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["row"] + [f"p{j}" for j in range(soft.K)])
    for i, row in enumerate(soft.values):
        w.writerow([i] + [repr(float(v)) for v in row])


def _table_rows(outcome) -> list:
    return [entry.row() for entry in outcome.table]


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    data, _ = load_csv(args.input, _label_selector(args.label_column), not args.no_header)
    load_time = time.perf_counter() - t0
    outcome, prepared, manifest, timings = fit_data(data, args, args.metric)
    for note in prepared.warnings:
        _warn(note)
    result = outcome.result
    manifest["input"] = str(args.input)
    if args.label_column is not None:
        manifest["preprocessing"]["dropped_label_column"] = args.label_column
    if not args.no_timings:
        manifest["timings"] = {"load": load_time, **timings}

    if args.labels_out:
        with open(args.labels_out, "w", newline="", encoding="utf-8") as fh:
            _write_labels(fh, result.labels)
    else:
        _write_labels(sys.stdout, result.labels)
    if args.soft_out:
        with open(args.soft_out, "w", newline="", encoding="utf-8") as fh:
            _write_soft(fh, result.soft)
    if args.report_out:
        report = {
            "config": outcome.best.as_dict(),
            "criterion": result.report.as_dict(),
            "effective_clusters": result.effective_clusters,
            "warnings": list(result.warnings),
            "manifest": manifest,
            "table": _table_rows(outcome),
        }
        with open(args.report_out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    if args.table_out:
        with open(args.table_out, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(_table_rows(outcome))
    if args.dump_graph:
        W = build_knn_graph(prepared, outcome.best.k, outcome.best.metric)
        with open(args.dump_graph, "w", encoding="utf-8") as fh:
            W.dump(fh)
    cfg = outcome.best
    print(
        f"selected K={cfg.K} k={cfg.k} lambda={cfg.lam:.6g} metric={cfg.metric.value} "
        f"score={result.report.score:.6g} effective={result.effective_clusters}",
        file=sys.stderr,
    )
    return 0


def read_labels(path, column: Optional[str] = None) -> np.ndarray:
    """Label file reader: a ``label`` (or ``column``) header column if present,
    otherwise the last field of each row."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = [c.strip() for c in rows[0]]
    if column is not None:
        if column not in header:
            raise DataError(f"{path}: no column named {column!r}")
        j, rows = header.index(column), rows[1:]
    elif any(c.lower() == "label" for c in header):
        j, rows = [c.lower() for c in header].index("label"), rows[1:]
    else:
        j = -1
    try:
        tokens = [r[j].strip() for r in rows]
    except IndexError:
        raise DataError(f"{path}: ragged label file") from None
    return LabelVector.from_tokens(tokens).labels


def cmd_eval(args) -> int:
    pred = read_labels(args.pred, args.pred_column)
    truth = read_labels(args.truth, args.truth_column)
    if pred.size != truth.size:
        raise EvaluationError(f"{pred.size} predicted labels but {truth.size} true labels")
    report = evaluate(truth, pred)
    print(report.table())
    text = json.dumps(report.as_dict())
    print(text)
    if args.json_out:
        Path(args.json_out).write_text(text + "\n", encoding="utf-8")
    return 0


SWEEP_METRICS = ("AMI", "ARI", "ACC")


def _sweep_columns() -> list:
    cols = ["dataset", "n", "d", "G"]
    for tag in METRIC_TAGS.values():
        cols += [f"{tag}_K"] + [f"{tag}_{m}" for m in SWEEP_METRICS]
    return cols + ["error"]


def sweep_dataset(path: Path, args) -> dict:
    row = {"dataset": path.stem}
    errors = []
    try:
        data, truth = load_csv(path, _label_selector(args.label_column), not args.no_header)
    except CNSError as exc:
        row["error"] = f"load: {exc}"
        return row
    row.update(n=data.n, d=data.d, G=truth.G)
    for metric, tag in METRIC_TAGS.items():
        try:
            outcome, _, _, _ = fit_data(data, args, metric)
            rep = evaluate(truth, outcome.result.labels)
        except CNSError as exc:
            errors.append(f"{tag}: {exc}")
            continue
        row[f"{tag}_K"] = outcome.best.K
        row[f"{tag}_AMI"] = rep.ami
        row[f"{tag}_ARI"] = rep.ari
        row[f"{tag}_ACC"] = rep.accuracy
    if errors:
        row["error"] = "; ".join(errors)
    return row


def format_sweep(rows: list) -> str:
    """Aligned text table with metrics x100."""
    cols = _sweep_columns()
    def cell(c, v):
        if v is None:
            return "ERR" if c not in ("error", "n", "d", "G") else ""
        if isinstance(v, float):
            return f"{100 * v:.2f}"
        return str(v)
    body = [[cell(c, r.get(c)) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(b[i]) for b in body]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(line.rstrip() for line in lines)


def cmd_sweep(args) -> int:
    files = sorted(Path(args.data_dir).glob("*.csv"))
    if not files:
        _warn(f"no CSV files in {args.data_dir}")
    rows = [sweep_dataset(p, args) for p in files]
    rows.sort(key=lambda r: r["dataset"])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=_sweep_columns(), restval="ERR", lineterminator="\n")
    w.writeheader()
    for r in rows:
        r = dict(r)
        r.setdefault("error", "")
        for c in ("n", "d", "G"):
            r.setdefault(c, "")
        w.writerow(r)
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    print(format_sweep(rows))
    for r in rows:
        if r.get("error"):
            _warn(f"{r['dataset']}: {r['error']}")
    return 0


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k-grid", default="auto", help="comma-separated k values or 'auto'")
    p.add_argument("--lambda-grid", default="auto", help="comma-separated lambda values or 'auto'")
    p.add_argument("--kmax", type=int, default=DEFAULT_KMAX, help="largest cluster count tried")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="maximum number of candidate points")
    p.add_argument("--tol", type=float, default=1e-10, help="max-norm residual for resolvent solves")
    p.add_argument("--solver", choices=("fixed-point", "bicgstab"), default="fixed-point")
    p.add_argument("--no-center", action="store_true",
                   help="scale to unit variance without centring (changes cosine distances)")
    p.add_argument("--no-pca", action="store_true", help="skip the principal component projection")
    p.add_argument("--max-pcs", type=int, default=100, help="project when there are more columns than this")
    p.add_argument("--no-header", action="store_true", help="input has no header row")


def build_parser() -> argparse.ArgumentParser:
    codes = "\n".join(f"  {code}  {name}" for name, code in sorted(EXIT_CODES.items(), key=lambda x: x[1]))
    parser = argparse.ArgumentParser(
        prog="cnsmooth",
        description="Clustering by non-parametric smoothing over kNN graphs.",
        epilog=f"exit codes:\n  0  success\n{codes}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="cluster one CSV file", epilog=parser.epilog,
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    fit.add_argument("--input", required=True, help="CSV of observations")
    fit.add_argument("--metric", choices=[m.value for m in DistanceMetric], default="euclidean")
    fit.add_argument("--label-column", help="column to drop before fitting (name or index)")
    _add_fit_options(fit)
    fit.add_argument("--labels-out", help="labels CSV (default: stdout)")
    fit.add_argument("--soft-out", help="soft assignment CSV")
    fit.add_argument("--report-out", help="JSON report")
    fit.add_argument("--table-out", help="criterion table CSV (one row per k, lambda, K)")
    fit.add_argument("--dump-graph", help="write the selected kNN graph as 'row col weight' lines")
    fit.add_argument("--no-timings", action="store_true",
                     help="omit wall-clock timings so the report is reproducible byte for byte")
    fit.set_defaults(func=cmd_fit)

    ev = sub.add_parser("eval", help="compare predicted labels with ground truth", epilog=parser.epilog,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    ev.add_argument("--pred", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--pred-column")
    ev.add_argument("--truth-column")
    ev.add_argument("--json-out")
    ev.set_defaults(func=cmd_eval)

    sw = sub.add_parser("sweep", help="fit every labelled CSV in a directory under both metrics",
                        epilog=parser.epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sw.add_argument("--data-dir", required=True)
    sw.add_argument("--label-column", default="-1", help="ground-truth column (default: last)")
    sw.add_argument("--out", help="results CSV")
    _add_fit_options(sw)
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CNSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
