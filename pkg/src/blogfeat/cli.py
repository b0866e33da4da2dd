"""Command-line front end.

    blogfeat [--seed N] [--sequential] [--config FILE] [--out DIR] <command> ...

Commands: preprocess, gap, train-ae, experiment, plot.  Exit status is 0 on
success, 1 for usage errors, 2 for data errors and 3 for numerical failures.
Global flags may also be given after the command name.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from . import dataset as ds
from . import pca, pipeline
from .errors import BlogFeatError, ConfigError, EmptyInput, UnparseableCell, UsageError
from .plotting import PlotSpec, Series, gap_spec, histogram_spec, render_plot

log = logging.getLogger("blogfeat")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d if suppress else 42,
                   help="master seed for every random choice (default 42)")
    p.add_argument("--sequential", action="store_true", default=d if suppress else False,
                   help="single-threaded, fixed reduction order")
    p.add_argument("--config", default=d, help="experiment config (JSON)")
    p.add_argument("--out", default=d if suppress else "out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true", default=d if suppress else False)


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("data", nargs="*", help="delimiter-separated input files, target column last")
    p.add_argument("--delimiter", default=None)
    p.add_argument("--target-col", type=int, default=None)
    p.add_argument("--ratios", type=float, nargs=3, default=None, metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--scale-after-split", action="store_true", default=None,
                   help="fit the scaler on training rows only")
    p.add_argument("--preprocessed", action="store_true",
                   help="inputs are dataset.csv files written by `preprocess` (no rescaling)")


def _ae_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hidden-grid", type=int, nargs="+", default=None)
    p.add_argument("--lambda-grid", type=float, nargs="+", default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--metric", choices=["prediction", "reconstruction"], default=None)
    p.add_argument("--no-search", action="store_true", help="train --hidden/--lambda directly")
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--lambda", type=float, default=None, dest="lam")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blogfeat", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preprocess", help="drop zero columns, scale, census, histograms")
    _global_flags(p, suppress=True)
    _data_flags(p)
    p.add_argument("--histogram", nargs=2, metavar=("COLUMN", "BINS"), default=None,
                   help="COLUMN is 'target' or a retained feature index")

    p = sub.add_parser("gap", help="Gap tests for the number of principal components")
    _global_flags(p, suppress=True)
    _data_flags(p)
    p.add_argument("--variant", choices=["re", "ev", "both"], default="both")
    p.add_argument("--B", type=int, default=None, dest="B")
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--reference", choices=["box", "pca"], default=None)
    p.add_argument("--all-rows", action="store_true", help="run on all rows instead of the training split")

    p = sub.add_parser("train-ae", help="grid-search and train the sparse autoencoder")
    _global_flags(p, suppress=True)
    _data_flags(p)
    _ae_flags(p)

    p = sub.add_parser("experiment", help="run the method x model RMSE grid")
    _global_flags(p, suppress=True)
    _data_flags(p)
    p.add_argument("--cells", nargs="+", default=None, help="e.g. baseline:linear pca:tree")
    p.add_argument("--pca-k", default=None, help="'auto' or a fixed component count")
    p.add_argument("--B", type=int, default=None, dest="B")
    p.add_argument("--kmax", type=int, default=None)
    _ae_flags(p)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-samples-leaf", type=int, default=None)

    p = sub.add_parser("plot", help="render a CSV written by another command to SVG")
    _global_flags(p, suppress=True)
    p.add_argument("csv", help="input CSV (header row; x first column, y second)")
    p.add_argument("--kind", choices=["line", "line-with-band", "histogram"], default="line")
    p.add_argument("--band", default=None, help="CSV (x, half-width) for line-with-band")
    p.add_argument("--output", default=None, help="SVG path (default: <out>/<csv stem>.svg)")
    p.add_argument("--xlabel", default=None)
    p.add_argument("--ylabel", default=None)
    p.add_argument("--title", default="")
    return parser


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _config(args) -> pipeline.ExperimentConfig:
    cfg = pipeline.ExperimentConfig.load(args.config) if args.config else pipeline.ExperimentConfig()
    cfg.seed = args.seed
    cfg.n_jobs = 1 if args.sequential else -1
    if getattr(args, "data", None):
        cfg.data = list(args.data)
    for flag, attr in [("delimiter", "delimiter"), ("target_col", "target_col"),
                       ("ratios", "ratios"), ("scale_after_split", "scale_after_split")]:
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg, attr, val)
    return cfg


def _splits(args, cfg) -> pipeline.Splits:
    if not cfg.data:
        raise UsageError("no input data files given")
    raw = ds.load_tables(cfg.data, cfg.delimiter)
    if args.preprocessed:
        full = ds.Dataset(raw.values[:, :-1], raw.values[:, -1])
        idx = ds.split_indices(full.n, cfg.ratios, cfg.seed)
        fps = {name: ds.fingerprint(i) for name, i in zip(("train", "val", "test"), idx)}
        scaler = ds.ScalerParams([], full.kinds, [], [], 0.0, 1.0)
        return pipeline.Splits(*(full.take(i) for i in idx), fps, scaler)
    return pipeline.make_splits(raw, cfg)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _write_histogram(out: Path, name: str, values, bins: int, title: str) -> None:
    h = ds.histogram(values, bins)
    rows = ["bin_left,bin_right,count"]
    rows += [f"{lo!r},{hi!r},{c}" for lo, hi, c in
             zip(h.bin_edges[:-1].tolist(), h.bin_edges[1:].tolist(), h.counts.tolist())]
    (out / f"{name}.csv").write_text("\n".join(rows) + "\n")
    render_plot(histogram_spec(h, title=title, xlabel="scaled value"), out / f"{name}.svg")


def _write_gap(out: Path, rep: pca.GapReport) -> None:
    stem = f"gap_{rep.variant.short.lower()}"
    rep.save_json(out / f"{stem}.json")
    (out / f"{stem}.csv").write_text(rep.gap_csv())
    (out / f"{stem}_se.csv").write_text(rep.se_csv())
    label = "reconstruction error" if rep.variant.short == "RE" else "explained variation"
    render_plot(gap_spec(rep, title=f"Gap statistic ({label})"), out / f"{stem}.svg")
    if rep.k_max > 50:
        render_plot(gap_spec(rep, 50, title=f"Gap statistic ({label}), first 50"),
                    out / f"{stem}_first50.svg")


def _write_grid(out: Path, grid: ae.GridSearchResult) -> None:
    _write_json(out / "grid_search.json", grid.to_dict())
    (out / "ae_val_rmse.csv").write_text(grid.curve_csv())
    hs = list(grid.val_rmse_by_hidden)
    render_plot(PlotSpec("line", [Series("validation RMSE", hs, list(grid.val_rmse_by_hidden.values()))],
                         xlabel="hidden units", ylabel="validation RMSE",
                         title=f"Validation RMSE, weight decay {grid.best_lambda:g}"),
                out / "ae_val_rmse.svg")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    cfg = _config(args)
    if not cfg.data:
        raise UsageError("no input data files given")
    raw = ds.load_tables(cfg.data, cfg.delimiter)
    kinds = ds.classify_columns(raw, cfg.target_col)
    c = ds.census(kinds)
    splits = pipeline.make_splits(raw, cfg)
    if cfg.scale_after_split:
        full = ds.apply_preprocess(raw, cfg.target_col, splits.scaler)
    else:
        full, _ = ds.fit_preprocess(raw, cfg.target_col)
    out = _out(args)
    splits.scaler.save(out / "scaler.json")
    table = np.column_stack([full.X, full.y])
    (out / "dataset.csv").write_text("".join(",".join(map(repr, row)) + "\n" for row in table.tolist()))
    print(f"dropped={c['dropped']} continuous={c['continuous']} binary={c['binary']}")

    if args.histogram:
        column, bins = args.histogram
        try:
            bins = int(bins)
        except ValueError:
            raise UsageError(f"--histogram BINS must be an integer, got {bins!r}") from None
        for part, d in (("train", splits.train), ("test", splits.test)):
            if column == "target":
                values = d.y
            else:
                try:
                    values = d.X[:, int(column)]
                except (ValueError, IndexError):
                    raise UsageError(f"--histogram COLUMN must be 'target' or a feature index") from None
            _write_histogram(out, f"hist_{column}_{part}", values, bins, f"{column} ({part})")
    return 0


def cmd_gap(args) -> int:
    cfg = _config(args)
    splits = _splits(args, cfg)
    X = np.vstack([splits.train.X, splits.val.X, splits.test.X]) if args.all_rows else splits.train.X
    B = args.B if args.B is not None else cfg.gap.B
    k_max = args.kmax or cfg.gap.k_max or X.shape[1]
    reference = args.reference or cfg.gap.reference
    variants = {"re": ["RE"], "ev": ["EV"], "both": ["RE", "EV"]}[args.variant]
    out = _out(args)
    parts = []
    for i, v in enumerate(variants):
        rep = pca.gap_test(X, B, v, np.random.default_rng([cfg.seed, 1, i]), k_max,
                           reference, cfg.n_jobs)
        _write_gap(out, rep)
        parts.append(f"k*={rep.k_star} ({rep.variant.short})" + (" [no elbow]" if rep.no_elbow else ""))
    print(", ".join(parts))
    return 0


def _ae_settings(args, cfg) -> pipeline.AeSettings:
    s = cfg.ae
    for flag, attr in [("hidden_grid", "hidden_grid"), ("lambda_grid", "lambda_grid"),
                       ("rho", "rho"), ("folds", "folds"), ("lr", "learning_rate"),
                       ("max_iters", "max_iters"), ("tol", "tol"), ("metric", "metric"),
                       ("hidden", "hidden"), ("lam", "weight_decay")]:
        val = getattr(args, flag, None)
        if val is not None:
            setattr(s, attr, val)
    if args.no_search:
        s.search = False
    return s


def cmd_train_ae(args) -> int:
    cfg = _config(args)
    _ae_settings(args, cfg)
    splits = _splits(args, cfg)
    report = pipeline.ExperimentReport(cells=[])
    ae_cfg = pipeline.choose_ae_config(splits, cfg, report)
    params, trace = ae.train(splits.train.X, ae_cfg)
    out = _out(args)
    params.save(out / "ae_params.json")
    _write_json(out / "ae_config.json", {**asdict(ae_cfg), "iterations": len(trace) - 1,
                                         "final_loss": float(trace[-1])})
    if report.grid is not None:
        _write_grid(out, report.grid)
    print(f"lambda={ae_cfg.weight_decay:g} hidden={ae_cfg.n_hidden} final_loss={trace[-1]:.6g}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _config(args)
    if args.cells:
        cfg.cells = list(args.cells)
        cfg.parsed_cells()
    if args.pca_k is not None:
        if args.pca_k == "auto":
            cfg.pca_k = "auto"
        else:
            try:
                cfg.pca_k = int(args.pca_k)
            except ValueError:
                raise ConfigError(f"--pca-k must be 'auto' or an integer, got {args.pca_k!r}") from None
    if args.B is not None:
        cfg.gap.B = args.B
    if args.kmax is not None:
        cfg.gap.k_max = args.kmax
    if args.max_depth is not None:
        cfg.tree.max_depth = args.max_depth
    if args.min_samples_leaf is not None:
        cfg.tree.min_samples_leaf = args.min_samples_leaf
    _ae_settings(args, cfg)
    out = _out(args)
    if args.preprocessed:
        raise UsageError("experiment reads raw tables; --preprocessed is not supported here")
    try:
        report = pipeline.run_experiment(cfg)
    except BlogFeatError as exc:
        partial = getattr(exc, "partial_report", None)
        if partial is not None:
            pipeline.write_report(partial, out)
        raise
    pipeline.write_report(report, out)
    for rep in report.gap_reports.values():
        _write_gap(out, rep)
    if report.grid is not None:
        _write_grid(out, report.grid)
    sys.stdout.write(report.table())
    if report.k_star:
        print(", ".join(f"k*={k} ({v})" for v, k in report.k_star.items()))
    return 0


def _read_xy(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise EmptyInput(f"{path}: no data rows")
    header, body = rows[0], rows[1:]
    try:
        cols = [[float(v) for v in r] for r in body]
    except ValueError as exc:
        raise UnparseableCell(0, 0, str(exc)) from None
    return header, np.asarray(cols)


def cmd_plot(args) -> int:
    header, data = _read_xy(args.csv)
    out = Path(args.output) if args.output else _out(args) / (Path(args.csv).stem + ".svg")
    if args.kind == "histogram":
        edges = np.append(data[:, 0], data[-1, 1])
        spec = PlotSpec("histogram", [Series("counts", data[:, 0].tolist(), data[:, 2].tolist())],
                        bin_edges=edges.tolist())
        xlabel, ylabel = "value", "count"
    else:
        x, y = data[:, 0], data[:, 1]
        band = None
        if args.kind == "line-with-band":
            if not args.band:
                raise UsageError("--band is required for line-with-band")
            _, half = _read_xy(args.band)
            band = ((y - half[:, 1]).tolist(), (y + half[:, 1]).tolist())
        spec = PlotSpec(args.kind, [Series(header[1], x.tolist(), y.tolist())], band=band)
        xlabel, ylabel = header[0], header[1]
    spec.xlabel = args.xlabel or xlabel
    spec.ylabel = args.ylabel or ylabel
    spec.title = args.title
    render_plot(spec, out)
    print(out)
    return 0


COMMANDS = {
    "preprocess": cmd_preprocess,
    "gap": cmd_gap,
    "train-ae": cmd_train_ae,
    "experiment": cmd_experiment,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except BlogFeatError as exc:
        print(f"blogfeat: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"blogfeat: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
