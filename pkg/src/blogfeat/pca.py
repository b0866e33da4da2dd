"""Principal component analysis and Gap-style selection of the number of components.

Two objectives are supported for the Gap test:

* ``RECONSTRUCTION_ERROR`` -- W_k is the squared residual of the rank-k
  approximation; the chosen k is the smallest with
  ``gap[k] >= gap[k+1] - se[k+1]``.
* ``EXPLAINED_VARIATION`` -- W_k is the fraction of total variance carried by
  the first k components; the chosen k is the smallest with
  ``gap[k] <= gap[k+1] - se[k+1]``.

In both cases ``gap[k] = mean_b log W_k(reference_b) - log W_k(data)`` where the
references are drawn uniformly from a box around the data.
"""

from __future__ import annotations

import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadB, BadK, BadKMax, DegenerateData, NonFinite

# W_k is clamped at this fraction of the total centred sum of squares before logs.
W_FLOOR_REL = 1e-12


class GapVariant(str, enum.Enum):
    RECONSTRUCTION_ERROR = "ReconstructionError"
    EXPLAINED_VARIATION = "ExplainedVariation"

    @property
    def short(self) -> str:
        return "RE" if self is GapVariant.RECONSTRUCTION_ERROR else "EV"

    @classmethod
    def parse(cls, s) -> "GapVariant":
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower()
        for v in cls:
            if key in (v.value.lower(), v.short.lower()):
                return v
        raise ValueError(f"unknown gap variant {s!r}")


@dataclass(frozen=True)
class PcaModel:
    center: np.ndarray
    components: np.ndarray  # p x p, columns are directions
    variances: np.ndarray
    n_samples: int

    @property
    def p(self) -> int:
        return self.components.shape[0]


def _sign_fix(components: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(components), axis=0)
    signs = np.sign(components[idx, np.arange(components.shape[1])])
    signs[signs == 0] = 1.0
    return components * signs


def fit_pca(X) -> PcaModel:
    """Fit PCA through a thin SVD of the centred data.

    When n < p the trailing directions (variance 0) are an orthonormal
    completion of the row space.  Each direction is flipped so that its
    largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise DegenerateData(f"PCA needs an n x p matrix with n >= 2, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFinite("PCA input contains non-finite values")
    n, p = X.shape
    center = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - center, full_matrices=False)
    V = vt.T
    variances = s**2 / (n - 1)
    if V.shape[1] < p:
        q, _ = np.linalg.qr(V, mode="complete")
        V = np.hstack([V, q[:, V.shape[1]:]])
        variances = np.concatenate([variances, np.zeros(p - variances.size)])
    return PcaModel(center, _sign_fix(V), np.maximum(variances, 0.0), n)


def _check_k(model: PcaModel, k: int) -> None:
    if not 1 <= k <= model.p:
        raise BadK(f"k must be in 1..{model.p}, got {k}")


def project(model: PcaModel, X, k: int) -> np.ndarray:
    _check_k(model, k)
    return (np.asarray(X, dtype=np.float64) - model.center) @ model.components[:, :k]


def reconstruct(model: PcaModel, X, k: int) -> np.ndarray:
    scores = project(model, X, k)
    return model.center + scores @ model.components[:, :k].T


def total_sum_of_squares(X) -> float:
    X = np.asarray(X, dtype=np.float64)
    return float(np.sum((X - X.mean(axis=0)) ** 2))


def w_reconstruction(model: PcaModel, X, k: int) -> float:
    """Sum of squared residuals of the rank-k approximation (unclamped)."""
    X = np.asarray(X, dtype=np.float64)
    return float(np.sum((X - reconstruct(model, X, k)) ** 2))


def w_explained(model: PcaModel, k: int) -> float:
    _check_k(model, k)
    total = float(np.sum(model.variances))
    if not total > 0:
        raise DegenerateData("all principal component variances are zero")
    if k == model.p:
        return 1.0
    return float(np.sum(model.variances[:k])) / total


# ---------------------------------------------------------------------------
# whole-curve log W_k, used by the Gap test
# ---------------------------------------------------------------------------

def log_w_curve(X, variant: GapVariant, k_max: int, model: PcaModel | None = None) -> np.ndarray:
    """log W_k for k = 1..k_max in one pass.

    The reconstruction residual for k components equals the squared norm of the
    scores on the discarded directions, so the whole curve is a reversed cumulative
    sum over per-direction score energies.
    """
    X = np.asarray(X, dtype=np.float64)
    if model is None:
        model = fit_pca(X)
    if variant is GapVariant.RECONSTRUCTION_ERROR:
        scores = (X - model.center) @ model.components
        energy = np.sum(scores**2, axis=0)
        tail = np.cumsum(energy[::-1])[::-1]  # tail[j] = sum over directions >= j
        w = np.append(tail[1:], 0.0)[:k_max]
        floor = W_FLOOR_REL * total_sum_of_squares(X)
        if not floor > 0:
            raise DegenerateData("data has zero total variance")
        w = np.maximum(w, floor)
    else:
        total = float(np.sum(model.variances))
        if not total > 0:
            raise DegenerateData("all principal component variances are zero")
        w = np.cumsum(model.variances)[:k_max] / total
        if k_max == model.p:
            w[-1] = 1.0
    return np.log(w)


def sample_reference(X, rng: np.random.Generator, method: str = "box") -> np.ndarray:
    """Uniform reference sample with the same shape as X.

    ``box`` samples each column uniformly over that column's [min, max].
    ``pca`` does the same in the principal-component frame of X and rotates back.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise DegenerateData("reference sampling needs at least 2 rows")
    if method == "box":
        lo, hi = X.min(axis=0), X.max(axis=0)
        return rng.uniform(lo, hi, size=X.shape)
    if method == "pca":
        model = fit_pca(X)
        scores = (X - model.center) @ model.components
        lo, hi = scores.min(axis=0), scores.max(axis=0)
        return rng.uniform(lo, hi, size=X.shape) @ model.components.T + model.center
    raise ValueError(f"unknown reference method {method!r}")


# ---------------------------------------------------------------------------
# Gap test
# ---------------------------------------------------------------------------

@dataclass
class GapReport:
    variant: GapVariant
    B: int
    log_w: np.ndarray
    expected_log_w: np.ndarray
    sd: np.ndarray
    se: np.ndarray
    gap: np.ndarray
    k_star: int
    no_elbow: bool = False

    @property
    def k_max(self) -> int:
        return len(self.gap)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "B": self.B,
            "k_star": self.k_star,
            "no_elbow": self.no_elbow,
            "log_w": self.log_w.tolist(),
            "expected_log_w": self.expected_log_w.tolist(),
            "sd": self.sd.tolist(),
            "se": self.se.tolist(),
            "gap": self.gap.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GapReport":
        arr = lambda key: np.asarray(d[key], dtype=np.float64)  # noqa: E731
        return cls(GapVariant(d["variant"]), int(d["B"]), arr("log_w"), arr("expected_log_w"),
                   arr("sd"), arr("se"), arr("gap"), int(d["k_star"]), bool(d["no_elbow"]))

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def gap_csv(self) -> str:
        lines = ["k,gap"] + [f"{k},{g!r}" for k, g in enumerate(self.gap.tolist(), start=1)]
        return "\n".join(lines) + "\n"

    def se_csv(self) -> str:
        lines = ["k,se"] + [f"{k},{s!r}" for k, s in enumerate(self.se.tolist(), start=1)]
        return "\n".join(lines) + "\n"


def select_k(gap, se, variant: GapVariant) -> tuple[int, bool]:
    """Apply the elbow rule; returns (k_star, no_elbow) with k_star 1-based."""
    gap = np.asarray(gap)
    se = np.asarray(se)
    K = len(gap)
    for i in range(K - 1):
        threshold = gap[i + 1] - se[i + 1]
        if variant is GapVariant.RECONSTRUCTION_ERROR:
            hit = gap[i] >= threshold
        else:
            hit = gap[i] <= threshold
        if hit:
            return i + 1, False
    return K, True


def gap_test(X, B: int = 20, variant=GapVariant.RECONSTRUCTION_ERROR,
             rng: np.random.Generator | None = None, k_max: int | None = None,
             reference: str = "box", n_jobs: int = 1) -> GapReport:
    """Gap statistic over k = 1..k_max principal components.

    Each of the B reference datasets is re-fit with its own PCA.  Reference
    datasets get independent child generators seeded from ``rng`` up front, so
    the result does not depend on ``n_jobs``; per-reference curves are stacked
    in index order before reducing.
    """
    X = np.asarray(X, dtype=np.float64)
    variant = GapVariant.parse(variant)
    p = X.shape[1]
    if k_max is None:
        k_max = p
    if not isinstance(B, (int, np.integer)) or B < 2:
        raise BadB(f"B must be an integer >= 2, got {B}")
    if not 2 <= k_max <= p:
        raise BadKMax(f"k_max must be in 2..{p}, got {k_max}")
    if rng is None:
        rng = np.random.default_rng()

    log_w = log_w_curve(X, variant, k_max)
    seeds = rng.integers(0, 2**63 - 1, size=B)

    def one(seed):
        ref = sample_reference(X, np.random.default_rng(int(seed)), reference)
        return log_w_curve(ref, variant, k_max)

    if n_jobs == 1:
        curves = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
            curves = list(pool.map(one, seeds))
    ref_log_w = np.vstack(curves)

    expected = ref_log_w.mean(axis=0)
    sd = ref_log_w.std(axis=0)  # population sd over the B draws
    se = np.sqrt(1.0 + 1.0 / B) * sd
    gap = expected - log_w
    k_star, no_elbow = select_k(gap, se, variant)
    return GapReport(variant, int(B), log_w, expected, sd, se, gap, k_star, no_elbow)
