"""The preprocessing-method x regression-model experiment grid.

Every cell shares one train/validation/test split.  Feature transforms are fit
on the training rows only; the validation rows are used solely for the
autoencoder's weight-decay selection, and test targets are touched only when
computing the final RMSE.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from . import dataset as ds
from . import pca
from .errors import ConfigError, MissingBaseline
from .regressors import TreeConfig, fit_linear, fit_tree, predict_linear, predict_tree, rmse

log = logging.getLogger(__name__)

METHODS = ("baseline", "pca", "sparse_ae")
MODELS = ("linear", "tree")
METHOD_LABELS = {
    "baseline": "Centering & Scaling",
    "pca": "Principal Component Analysis",
    "sparse_ae": "Sparse Autoencoder",
}
MODEL_LABELS = {"linear": "Linear Regression", "tree": "Regression Tree"}

# Test RMSEs reported for the full BlogFeedback grid; annotations only, never gated.
REFERENCE_RMSE = {
    ("baseline", "linear"): 0.8631,
    ("baseline", "tree"): 0.6005,
    ("pca", "linear"): 0.7665,
    ("pca", "tree"): 0.4979,
    ("sparse_ae", "linear"): 0.5009,
    ("sparse_ae", "tree"): 1.0531,
}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class GapSettings:
    B: int = 20
    variants: list = field(default_factory=lambda: ["RE", "EV"])
    k_max: int | None = None
    reference: str = "box"


@dataclass
class AeSettings:
    search: bool = True
    hidden_grid: list = field(default_factory=lambda: [2, 5, 10, 15])
    lambda_grid: list = field(default_factory=lambda: [1e-4, 1e-2, 1e-1])
    rho: float = 0.01
    folds: int = 5
    hidden: int = 5
    weight_decay: float = 1e-4
    learning_rate: float = 0.01
    max_iters: int = 1000
    tol: float = 1e-6
    metric: str = "prediction"


@dataclass
class ExperimentConfig:
    """All knobs of one experiment run.

    ``pca_k`` is either a positive int or ``"auto"`` (Gap test on the training
    rows).  ``cells`` lists ``"method:model"`` strings.
    """

    data: list = field(default_factory=list)
    delimiter: str = ","
    target_col: int = -1
    ratios: list = field(default_factory=lambda: [0.6, 0.2, 0.2])
    seed: int = 42
    scale_after_split: bool = False
    pca_k: object = "auto"
    gap: GapSettings = field(default_factory=GapSettings)
    ae: AeSettings = field(default_factory=AeSettings)
    tree: TreeConfig = field(default_factory=TreeConfig)
    cells: list = field(default_factory=lambda: [f"{m}:{r}" for m in METHODS for r in MODELS])
    out_dir: str | None = None
    n_jobs: int = 1

    def __post_init__(self):
        parsed = self.parsed_cells()
        if not parsed:
            raise ConfigError("cells: at least one cell is required")
        if self.pca_k != "auto" and not (isinstance(self.pca_k, int) and self.pca_k >= 1):
            raise ConfigError(f"pca_k: expected 'auto' or a positive integer, got {self.pca_k!r}")

    def parsed_cells(self):
        out = []
        for c in self.cells:
            method, _, model = str(c).partition(":")
            if method not in METHODS or model not in MODELS:
                raise ConfigError(f"cells: unknown cell {c!r}; expected <{'|'.join(METHODS)}>:<{'|'.join(MODELS)}>")
            out.append((method, model))
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        nested = {"gap": GapSettings, "ae": AeSettings, "tree": TreeConfig}
        known = set(cls.__dataclass_fields__)
        kwargs = {}
        for key, val in d.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in nested:
                if not isinstance(val, dict):
                    raise ConfigError(f"{key}: expected an object")
                sub = nested[key]
                for k in val:
                    if k not in sub.__dataclass_fields__:
                        raise ConfigError(f"unknown config key {key}.{k!r}")
                try:
                    val = sub(**val)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{key}: {exc}") from None
            kwargs[key] = val
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# splits and features
# ---------------------------------------------------------------------------

@dataclass
class Splits:
    train: ds.Dataset
    val: ds.Dataset
    test: ds.Dataset
    fingerprints: dict
    scaler: ds.ScalerParams


def make_splits(raw: ds.RawTable, cfg: ExperimentConfig) -> Splits:
    idx = ds.split_indices(raw.n_rows, cfg.ratios, cfg.seed)
    fps = {name: ds.fingerprint(i) for name, i in zip(("train", "val", "test"), idx)}
    if cfg.scale_after_split:
        train_raw = ds.RawTable(raw.values[idx[0]])
        train, scaler = ds.fit_preprocess(train_raw, cfg.target_col)
        val = ds.apply_preprocess(ds.RawTable(raw.values[idx[1]]), cfg.target_col, scaler)
        test = ds.apply_preprocess(ds.RawTable(raw.values[idx[2]]), cfg.target_col, scaler)
    else:
        full, scaler = ds.fit_preprocess(raw, cfg.target_col)
        train, val, test = (full.take(i) for i in idx)
    return Splits(train, val, test, fps, scaler)


@dataclass
class Features:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    description: dict


def build_features(method: str, train: ds.Dataset, val: ds.Dataset, test: ds.Dataset, *,
                   k: int | None = None, ae_config: ae.AeConfig | None = None) -> Features:
    """Transform the three feature matrices; transforms see training rows only."""
    if not (train.p == val.p == test.p):
        raise ConfigError("train/val/test have different column counts")
    if method == "baseline":
        return Features(train.X, val.X, test.X, {"method": "baseline"})
    if method == "pca":
        if k is None:
            raise ConfigError("pca requires a component count")
        model = pca.fit_pca(train.X)
        f = [pca.project(model, d.X, k) for d in (train, val, test)]
        return Features(*f, {"method": "pca", "k": k})
    if method == "sparse_ae":
        cfg = ae_config or ae.AeConfig()
        params, trace = ae.train(train.X, cfg)
        f = [ae.encode(params, d.X) for d in (train, val, test)]
        desc = {"method": "sparse_ae", "config": asdict(cfg), "iterations": len(trace) - 1,
                "final_loss": float(trace[-1])}
        return Features(*f, {**desc, "params": params})
    raise ConfigError(f"unknown method {method!r}")


def run_cell(model: str, features: Features, y_train, y_test, tree_cfg: TreeConfig | None = None):
    """Fit one regressor on transformed training features and return (test RMSE, fitted model)."""
    if model == "linear":
        fitted = fit_linear(features.train, y_train)
        pred = predict_linear(fitted, features.test)
    elif model == "tree":
        fitted = fit_tree(features.train, y_train, tree_cfg or TreeConfig())
        pred = predict_tree(fitted, features.test)
    else:
        raise ConfigError(f"unknown model {model!r}")
    return rmse(pred, y_test), fitted


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class CellResult:
    method: str
    model: str
    rmse: float
    improvement: float | None = None
    reference_rmse: float | None = None


@dataclass
class ExperimentReport:
    cells: list
    k_star: dict = field(default_factory=dict)
    pca_k: int | None = None
    gap_agreement: bool | None = None
    ae_lambda: float | None = None
    ae_hidden: int | None = None
    seeds: dict = field(default_factory=dict)
    split_fingerprints: dict = field(default_factory=dict)
    target_sd: float | None = None
    timings: dict = field(default_factory=dict)
    gap_reports: dict = field(default_factory=dict)
    grid: ae.GridSearchResult | None = None
    error: str | None = None

    def rmse_of(self, method, model):
        for c in self.cells:
            if c.method == method and c.model == model:
                return c.rmse
        return None

    def to_dict(self, include_timings: bool = False) -> dict:
        d = {
            "cells": [asdict(c) for c in self.cells],
            "k_star": dict(self.k_star),
            "pca_k": self.pca_k,
            "gap_agreement": self.gap_agreement,
            "ae_lambda": self.ae_lambda,
            "ae_hidden": self.ae_hidden,
            "seeds": dict(self.seeds),
            "split_fingerprints": dict(self.split_fingerprints),
            "target_sd": self.target_sd,
            "error": self.error,
        }
        if include_timings:
            d["timings"] = dict(self.timings)
        return d

    def table(self) -> str:
        """Aligned text table: methods as rows, models as columns."""
        models = [m for m in MODELS if any(c.model == m for c in self.cells)]
        methods = [m for m in METHODS if any(c.method == m for c in self.cells)]
        header = ["Pre-processing Method"] + [
            f"{MODEL_LABELS[m]} RMSE (impr., ref.)" for m in models
        ]
        rows = [header]
        for meth in methods:
            row = [METHOD_LABELS[meth]]
            for mod in models:
                cell = next((c for c in self.cells if c.method == meth and c.model == mod), None)
                if cell is None:
                    row.append("-")
                    continue
                imp = "n/a" if cell.improvement is None else f"{100 * cell.improvement:+.1f}%"
                ref = "n/a" if cell.reference_rmse is None else f"{cell.reference_rmse:.4f}"
                row.append(f"{cell.rmse:.4f} ({imp}, {ref})")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = [" | ".join(s.ljust(w) for s, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "-+-".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def compute_improvements(cells) -> None:
    """improvement = 1 - rmse / rmse(baseline, same model); baseline itself gets 0."""
    base = {c.model: c.rmse for c in cells if c.method == "baseline"}
    for c in cells:
        b = base.get(c.model)
        if b is None or b == 0:
            c.improvement = None
        elif c.method == "baseline":
            c.improvement = 0.0
        else:
            c.improvement = 1.0 - c.rmse / b


def compare_methods(report: ExperimentReport) -> dict:
    """Per model, methods sorted by ascending RMSE with signed improvement over baseline."""
    out = {}
    for model in MODELS:
        cells = [c for c in report.cells if c.model == model]
        if not cells:
            continue
        base = next((c for c in cells if c.method == "baseline"), None)
        if base is None:
            raise MissingBaseline(f"no baseline cell for model {model!r}")
        ranked = sorted(cells, key=lambda c: (c.rmse, METHODS.index(c.method)))
        out[model] = [(c.method, c.rmse, 1.0 - c.rmse / base.rmse) for c in ranked]
    return out


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def choose_pca_k(X, cfg: ExperimentConfig, report: ExperimentReport) -> int:
    if cfg.pca_k != "auto":
        return int(cfg.pca_k)
    k_max = cfg.gap.k_max or X.shape[1]
    for i, v in enumerate(cfg.gap.variants):
        variant = pca.GapVariant.parse(v)
        rng = np.random.default_rng([cfg.seed, 1, i])
        rep = pca.gap_test(X, cfg.gap.B, variant, rng, k_max, cfg.gap.reference, cfg.n_jobs)
        report.gap_reports[variant.short] = rep
        report.k_star[variant.short] = rep.k_star
    ks = list(report.k_star.values())
    report.gap_agreement = len(set(ks)) == 1
    if not report.gap_agreement:
        log.warning("gap variants disagree: %s; using the reconstruction-error choice", report.k_star)
    return report.k_star.get("RE", ks[0])


def choose_ae_config(splits: Splits, cfg: ExperimentConfig, report: ExperimentReport) -> ae.AeConfig:
    s = cfg.ae
    base = ae.AeConfig(n_hidden=s.hidden, weight_decay=s.weight_decay, sparsity=s.rho,
                       learning_rate=s.learning_rate, max_iters=s.max_iters, tol=s.tol,
                       init_seed=cfg.seed)
    if s.search:
        grid = ae.grid_search(splits.train, splits.val, s.hidden_grid, s.lambda_grid, s.rho,
                              s.folds, np.random.default_rng([cfg.seed, 2]), base, s.metric,
                              cfg.n_jobs)
        report.grid = grid
        base = ae.AeConfig(**{**asdict(base), "n_hidden": grid.best_hidden,
                              "weight_decay": grid.best_lambda})
    report.ae_lambda = base.weight_decay
    report.ae_hidden = base.n_hidden
    return base


def run_experiment(cfg: ExperimentConfig, raw: ds.RawTable | None = None) -> ExperimentReport:
    """Run every requested cell on one shared split.

    A failing cell aborts the run; cells finished before it stay in the report,
    whose ``error`` names the failing cell, and the exception is re-raised with
    the partial report attached as ``exc.partial_report``.
    """
    if raw is None:
        if not cfg.data:
            raise ConfigError("data: no input files given")
        raw = ds.load_tables(cfg.data, cfg.delimiter)
    report = ExperimentReport(cells=[], seeds={"split": cfg.seed, "gap": cfg.seed,
                                               "ae_folds": cfg.seed, "ae_init": cfg.seed})
    t0 = time.perf_counter()
    splits = make_splits(raw, cfg)
    report.split_fingerprints = splits.fingerprints
    report.target_sd = splits.scaler.target_sd
    report.timings["preprocess"] = time.perf_counter() - t0

    cache: dict = {}
    current = None
    try:
        for method, model in cfg.parsed_cells():
            current = f"{method}:{model}"
            if method not in cache:
                t = time.perf_counter()
                if method == "pca":
                    k = choose_pca_k(splits.train.X, cfg, report)
                    report.pca_k = k
                    cache[method] = build_features("pca", splits.train, splits.val, splits.test, k=k)
                elif method == "sparse_ae":
                    ae_cfg = choose_ae_config(splits, cfg, report)
                    cache[method] = build_features("sparse_ae", splits.train, splits.val,
                                                   splits.test, ae_config=ae_cfg)
                else:
                    cache[method] = build_features("baseline", splits.train, splits.val, splits.test)
                report.timings[f"features:{method}"] = time.perf_counter() - t
            t = time.perf_counter()
            value, _ = run_cell(model, cache[method], splits.train.y, splits.test.y, cfg.tree)
            report.timings[current] = time.perf_counter() - t
            report.cells.append(CellResult(method, model, value,
                                           reference_rmse=REFERENCE_RMSE.get((method, model))))
            log.info("%s test RMSE %.4f", current, value)
    except Exception as exc:
        report.error = f"cell {current} failed: {exc}"
        compute_improvements(report.cells)
        exc.partial_report = report
        raise
    compute_improvements(report.cells)
    report.timings["total"] = time.perf_counter() - t0
    return report


def write_report(report: ExperimentReport, out_dir) -> None:
    """report.json (deterministic), table.txt, timings.txt and figure data."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    (out / "table.txt").write_text(report.table())
    (out / "timings.txt").write_text(
        "".join(f"{k}\t{v:.3f}s\n" for k, v in report.timings.items())
    )
    for short, rep in report.gap_reports.items():
        rep.save_json(out / f"gap_{short.lower()}.json")
        (out / f"gap_{short.lower()}.csv").write_text(rep.gap_csv())
        (out / f"gap_{short.lower()}_se.csv").write_text(rep.se_csv())
    if report.grid is not None:
        (out / "grid_search.json").write_text(json.dumps(report.grid.to_dict(), indent=2) + "\n")
        (out / "ae_val_rmse.csv").write_text(report.grid.curve_csv())
