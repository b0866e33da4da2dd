"""Three-layer tanh autoencoder with L2 and L1 weight penalties.

The objective for parameters (W1, b1, W2, b2) on an m x p batch X is

    J = (1/m) * sum_i ||tanh(tanh(x_i W1 + b1) W2 + b2) - x_i||^2
        + lam * (||W1||^2 + ||W2||^2) + rho * (|W1|_1 + |W2|_1)

Biases are not penalised.  Training is full-batch gradient descent.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceDetected, ShapeMismatch, UsageError


@dataclass
class AeParams:
    W1: np.ndarray  # p x h
    b1: np.ndarray  # h
    W2: np.ndarray  # h x p
    b2: np.ndarray  # p

    @property
    def n_inputs(self) -> int:
        return self.W1.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[1]

    def arrays(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "AeParams":
        return AeParams(*(a.copy() for a in self.arrays()))

    @classmethod
    def zeros(cls, p: int, h: int) -> "AeParams":
        return cls(np.zeros((p, h)), np.zeros(h), np.zeros((h, p)), np.zeros(p))

    def to_dict(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "n_hidden": self.n_hidden,
            "W1": self.W1.ravel().tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.ravel().tolist(),
            "b2": self.b2.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AeParams":
        p, h = int(d["n_inputs"]), int(d["n_hidden"])
        return cls(
            np.asarray(d["W1"], dtype=np.float64).reshape(p, h),
            np.asarray(d["b1"], dtype=np.float64),
            np.asarray(d["W2"], dtype=np.float64).reshape(h, p),
            np.asarray(d["b2"], dtype=np.float64),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "AeParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class AeConfig:
    n_hidden: int = 5
    weight_decay: float = 1e-4
    sparsity: float = 0.01
    learning_rate: float = 0.01
    max_iters: int = 1000
    tol: float = 1e-6
    init_seed: int = 0

    def __post_init__(self):
        if self.n_hidden < 1:
            raise UsageError(f"n_hidden must be >= 1, got {self.n_hidden}")
        if self.weight_decay < 0 or self.sparsity < 0:
            raise UsageError("weight_decay and sparsity must be non-negative")
        if not self.learning_rate > 0 or not self.tol > 0:
            raise UsageError("learning_rate and tol must be positive")
        if self.max_iters < 1:
            raise UsageError("max_iters must be >= 1")


def tanh_activation(z):
    # np.tanh saturates to +-1 for large |z| without overflow
    return np.tanh(z)


def _check(params: AeParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.n_inputs:
        raise ShapeMismatch(f"expected m x {params.n_inputs} input, got shape {X.shape}")
    p, h = params.W1.shape
    if params.b1.shape != (h,) or params.W2.shape != (h, p) or params.b2.shape != (p,):
        raise ShapeMismatch("inconsistent autoencoder parameter shapes")
    return X


def forward(params: AeParams, X):
    """Return (hidden, output) activations for every row of X."""
    X = _check(params, X)
    hidden = tanh_activation(X @ params.W1 + params.b1)
    output = tanh_activation(hidden @ params.W2 + params.b2)
    return hidden, output


def encode(params: AeParams, X) -> np.ndarray:
    return forward(params, X)[0]


def _penalty(params: AeParams, lam: float, rho: float) -> float:
    l2 = np.sum(params.W1**2) + np.sum(params.W2**2)
    l1 = np.sum(np.abs(params.W1)) + np.sum(np.abs(params.W2))
    return float(lam * l2 + rho * l1)


def reconstruction_error(params: AeParams, X) -> float:
    """Mean over rows of the squared reconstruction norm."""
    X = _check(params, X)
    _, out = forward(params, X)
    return float(np.sum((out - X) ** 2) / X.shape[0])


def loss(params: AeParams, X, lam: float, rho: float) -> float:
    return reconstruction_error(params, X) + _penalty(params, lam, rho)


def _loss_and_grad(params: AeParams, X, lam, rho):
    m = X.shape[0]
    hidden, out = forward(params, X)
    resid = out - X
    value = float(np.sum(resid**2) / m) + _penalty(params, lam, rho)

    d_out = (2.0 / m) * resid * (1.0 - out**2)
    gW2 = hidden.T @ d_out + 2.0 * lam * params.W2 + rho * np.sign(params.W2)
    gb2 = d_out.sum(axis=0)
    d_hid = (d_out @ params.W2.T) * (1.0 - hidden**2)
    gW1 = X.T @ d_hid + 2.0 * lam * params.W1 + rho * np.sign(params.W1)
    gb1 = d_hid.sum(axis=0)
    return value, AeParams(gW1, gb1, gW2, gb2)


def gradient(params: AeParams, X, lam: float, rho: float) -> AeParams:
    """Backpropagated gradient of the objective; the L1 term uses sign(0) = 0."""
    X = _check(params, X)
    return _loss_and_grad(params, X, lam, rho)[1]


def init_params(p: int, h: int, seed: int) -> AeParams:
    """Uniform init on (-r, r), r = sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    r = np.sqrt(6.0 / (p + h))
    W1 = rng.uniform(-r, r, size=(p, h))
    W2 = rng.uniform(-r, r, size=(h, p))
    return AeParams(W1, np.zeros(h), W2, np.zeros(p))


def train(X, cfg: AeConfig, params: AeParams | None = None):
    """Full-batch gradient descent.

    Stops after ``cfg.max_iters`` updates or once the absolute change in loss
    between consecutive iterates drops below ``cfg.tol``.  Returns the final
    parameters and the loss at every iterate, starting with the initial one.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ShapeMismatch(f"training needs an m x p matrix with m >= 2, got {X.shape}")
    if params is None:
        params = init_params(X.shape[1], cfg.n_hidden, cfg.init_seed)
    else:
        params = params.copy()
    _check(params, X)
    lam, rho, lr = cfg.weight_decay, cfg.sparsity, cfg.learning_rate

    trace = []
    value, grad = _loss_and_grad(params, X, lam, rho)
    trace.append(value)
    for it in range(cfg.max_iters):
        for a, g in zip(params.arrays(), grad.arrays()):
            a -= lr * g
        with np.errstate(over="ignore", invalid="ignore"):
            value, grad = _loss_and_grad(params, X, lam, rho)
        if not np.isfinite(value) or not all(np.all(np.isfinite(a)) for a in params.arrays()):
            raise DivergenceDetected(
                f"loss became non-finite at iteration {it + 1} (learning rate {lr} too high?)"
            )
        trace.append(value)
        if abs(trace[-2] - value) < cfg.tol:
            break
    return params, np.asarray(trace)


# ---------------------------------------------------------------------------
# model selection
# ---------------------------------------------------------------------------

@dataclass
class GridSearchResult:
    best_lambda: float
    best_hidden: int
    cv_table: dict  # (lambda, hidden) -> mean fold score
    val_rmse_per_lambda: dict  # lambda -> (selected hidden, validation rmse)
    val_rmse_by_hidden: dict = field(default_factory=dict)  # hidden -> rmse at best lambda
    metric: str = "prediction"

    def to_dict(self) -> dict:
        return {
            "best_lambda": self.best_lambda,
            "best_hidden": self.best_hidden,
            "metric": self.metric,
            "cv_table": [
                {"lambda": lam, "hidden": h, "cv_score": s}
                for (lam, h), s in self.cv_table.items()
            ],
            "val_rmse_per_lambda": [
                {"lambda": lam, "hidden": h, "val_rmse": r}
                for lam, (h, r) in self.val_rmse_per_lambda.items()
            ],
            "val_rmse_by_hidden": [
                {"hidden": h, "val_rmse": r} for h, r in self.val_rmse_by_hidden.items()
            ],
        }

    def curve_csv(self) -> str:
        lines = ["hidden_units,validation_rmse"]
        lines += [f"{h},{r!r}" for h, r in self.val_rmse_by_hidden.items()]
        return "\n".join(lines) + "\n"


def kfold_indices(n: int, folds: int, rng: np.random.Generator):
    """Seeded permutation cut into ``folds`` contiguous blocks."""
    if folds < 2 or folds > n:
        raise UsageError(f"folds must be in 2..{n}, got {folds}")
    return np.array_split(rng.permutation(n), folds)


def _rmse(a, b) -> float:
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def _score(params, X_fit, y_fit, X_eval, y_eval, metric):
    from .regressors import fit_linear, predict_linear

    if metric == "reconstruction":
        _, out = forward(params, X_eval)
        return _rmse(out, X_eval)
    model = fit_linear(encode(params, X_fit), y_fit)
    return _rmse(predict_linear(model, encode(params, X_eval)), y_eval)


def _fit_and_score(X_fit, y_fit, X_eval, y_eval, cfg, metric, cell):
    try:
        params, _ = train(X_fit, cfg)
    except DivergenceDetected as exc:
        raise DivergenceDetected(f"grid cell lambda={cell[0]}, hidden={cell[1]}: {exc}") from None
    return _score(params, X_fit, y_fit, X_eval, y_eval, metric)


def grid_search(train_ds, val_ds, hidden_grid=(2, 5, 10, 15), lambda_grid=(1e-4, 1e-2, 1e-1),
                rho: float = 0.01, folds: int = 5, rng: np.random.Generator | None = None,
                base: AeConfig | None = None, metric: str = "prediction",
                n_jobs: int = 1) -> GridSearchResult:
    """Cross-validated choice of hidden width per weight decay, then weight decay on validation.

    For each lambda, every hidden width is scored by k-fold CV on the training
    set; the width with the lowest mean score is retrained on the full training
    set and scored on the validation set.  ``metric="prediction"`` scores a
    linear regression fit on the encoded features; ``"reconstruction"`` scores
    the autoencoder's reconstruction RMSE.
    """
    if not hidden_grid or not lambda_grid:
        raise UsageError("hidden_grid and lambda_grid must be non-empty")
    if metric not in ("prediction", "reconstruction"):
        raise UsageError(f"unknown metric {metric!r}")
    if rng is None:
        rng = np.random.default_rng()
    base = base or AeConfig()
    hidden_grid = sorted(int(h) for h in hidden_grid)
    lambda_grid = sorted(float(lam) for lam in lambda_grid)
    Xtr, ytr = train_ds.X, train_ds.y
    fold_idx = kfold_indices(Xtr.shape[0], folds, rng)

    def cfg_for(lam, h):
        return AeConfig(**{**asdict(base), "n_hidden": h, "weight_decay": lam, "sparsity": rho})

    jobs = []
    for lam in lambda_grid:
        for h in hidden_grid:
            for f, held in enumerate(fold_idx):
                fit = np.concatenate([b for g, b in enumerate(fold_idx) if g != f])
                jobs.append(((lam, h), fit, held))

    def run(job):
        cell, fit, held = job
        return _fit_and_score(Xtr[fit], ytr[fit], Xtr[held], ytr[held],
                              cfg_for(*cell), metric, cell)

    if n_jobs == 1:
        scores = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
            scores = list(pool.map(run, jobs))

    cv_table = {}
    for (cell, _, _), s in zip(jobs, scores):
        cv_table.setdefault(cell, []).append(s)
    cv_table = {cell: float(np.mean(v)) for cell, v in cv_table.items()}

    val_per_lambda = {}
    val_cache = {}
    for lam in lambda_grid:
        # min() keeps the first of equal scores, i.e. the smaller width
        h = min(hidden_grid, key=lambda hh: cv_table[(lam, hh)])
        r = _fit_and_score(Xtr, ytr, val_ds.X, val_ds.y, cfg_for(lam, h), metric, (lam, h))
        val_cache[(lam, h)] = r
        val_per_lambda[lam] = (h, r)
    best_lambda = min(lambda_grid, key=lambda lam: val_per_lambda[lam][1])
    best_hidden = val_per_lambda[best_lambda][0]

    curve = {}
    for h in hidden_grid:
        cell = (best_lambda, h)
        if cell not in val_cache:
            val_cache[cell] = _fit_and_score(Xtr, ytr, val_ds.X, val_ds.y,
                                             cfg_for(*cell), metric, cell)
        curve[h] = val_cache[cell]
    return GridSearchResult(best_lambda, best_hidden, cv_table, val_per_lambda, curve, metric)
