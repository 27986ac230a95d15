"""Synthetic study: data generator, coefficient sweeps, and calibration checks.

The generator draws a two-group population in the plane.  Group membership
is a rare Bernoulli draw, each group sits in a tight Gaussian cluster, and
the clusters differ only in the first coordinate, which is exactly the
direction a fair metric for this problem discounts.  Labels come from a
group-specific hyperplane through each cluster's center:

    y = 1{ w_g . (x - mu_g) + noise > 0 }

so roughly half of each cluster carries each label and the label boundary
runs near-vertically through the cluster.  (Anchoring the hyperplane at
the cluster center is what keeps both labels present; an uncentered rule
with these weights would put every point about six standard deviations
from the boundary and produce a single-label dataset that nothing can be
learned from.)

On top of the generator this module provides the experiment drivers:

- ``sweep_heatmap``: fit an intercept for every coefficient pair on a grid
  and audit the resulting classifier, producing heatmap cells;
- ``stopping_time_sweep``: the audit statistic as a function of the attack
  horizon;
- ``robustness_experiment``: how much per-sample loss ratios move when the
  fair metric is perturbed, against the analytic bound;
- coverage / Type I / power calibration experiments on synthetic ratio
  populations with a Monte-Carlo oracle mean;
- group-fairness comparison metrics (balanced accuracy, average odds
  difference).

Grid cells and replicates are independent work items; everything is
deterministic given the seeds in the configs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import inference
from .attack import AttackConfig, DivergenceError, constant_config_for_horizon, unfair_map_batch
from .dataset import Dataset
from .fair_metric import FairMetric
from .linalg import spectral_norm
from .models import LogisticModel, expit

BIAS_CLAMP = 50.0


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the two-group generator."""

    n_samples: int = 400
    minority_prob: float = 0.1
    group_means: tuple[tuple[float, float], tuple[float, float]] = ((-1.5, 0.0), (1.5, 0.0))
    noise_sd: float = 0.25
    label_weights: tuple[tuple[float, float], tuple[float, float]] = ((-0.2, -0.01), (0.2, -0.01))
    label_noise_var: float = 1e-4
    seed: int = 7

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")
        if not 0.0 < self.minority_prob < 1.0:
            raise ValueError("minority_prob must lie in (0, 1)")
        if self.noise_sd <= 0 or self.label_noise_var < 0:
            raise ValueError("noise_sd must be positive and label_noise_var non-negative")


def assign_labels(cfg: SimConfig, features, groups, label_noise=None) -> np.ndarray:
    """Group-specific hyperplane labels: y = 1{ w_g . (x - mu_g) + noise > 0 }.

    The inequality is strict, so a point exactly on the hyperplane with
    zero noise gets label 0.
    """
    x = np.asarray(features, dtype=np.float64)
    g = np.asarray(groups, dtype=np.int64)
    means = np.asarray(cfg.group_means)[g]
    weights = np.asarray(cfg.label_weights)[g]
    margin = np.sum(weights * (x - means), axis=1)
    if label_noise is not None:
        margin = margin + np.asarray(label_noise, dtype=np.float64)
    return (margin > 0).astype(np.int64)


def generate(cfg: SimConfig) -> Dataset:
    """Draw a dataset from the generator; byte-identical for a fixed seed."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_samples
    g = (rng.random(n) < cfg.minority_prob).astype(np.int64)
    x = np.asarray(cfg.group_means)[g] + cfg.noise_sd * rng.standard_normal((n, 2))
    noise = math.sqrt(cfg.label_noise_var) * rng.standard_normal(n) if cfg.label_noise_var > 0 else None
    y = assign_labels(cfg, x, g, noise)
    return Dataset(
        feature_names=("x1", "x2"),
        features=x,
        labels=y,
        protected={"group": g},
        label_name="label",
    )


def fit_bias(features, labels, w1: float, w2: float) -> float:
    """Intercept minimizing the total logistic loss at fixed coefficients.

    The problem is one-dimensional and convex; a safeguarded Newton
    iteration (bisection fallback inside a bracket) drives the summed
    gradient below 1e-10.  Single-label datasets have no interior
    minimizer and return the clamp value +/-50.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    s = x[:, 0] * w1 + x[:, 1] * w2

    def grad(b):
        return float(np.sum(expit(b + s) - y))

    lo, hi = -BIAS_CLAMP, BIAS_CLAMP
    if grad(lo) >= 0.0:  # gradient is increasing in b, so the minimizer sits at or below the clamp
        return lo
    if grad(hi) <= 0.0:
        return hi
    b = 0.0
    for _ in range(200):
        gb = grad(b)
        if abs(gb) < 1e-10:
            return float(b)
        if gb > 0.0:
            hi = b
        else:
            lo = b
        p = expit(b + s)
        curvature = float(np.sum(p * (1.0 - p)))
        b_new = b - gb / curvature if curvature > 0 else 0.5 * (lo + hi)
        if not lo < b_new < hi:
            b_new = 0.5 * (lo + hi)
        b = b_new
    return float(b)


@dataclass(frozen=True)
class GridSpec:
    """Coefficient grids for the heatmap sweep."""

    w1_values: tuple[float, ...]
    w2_values: tuple[float, ...]

    def __post_init__(self):
        if not self.w1_values or not self.w2_values:
            raise ValueError("grid ranges must be non-empty")
        object.__setattr__(self, "w1_values", tuple(float(v) for v in self.w1_values))
        object.__setattr__(self, "w2_values", tuple(float(v) for v in self.w2_values))

    @staticmethod
    def from_range(lo: float, hi: float, step: float) -> tuple[float, ...]:
        if step <= 0 or hi < lo:
            raise ValueError("need step > 0 and hi >= lo")
        count = int(round((hi - lo) / step)) + 1
        return tuple(round(lo + k * step, 9) for k in range(count))

    @classmethod
    def default(cls) -> "GridSpec":
        vals = cls.from_range(-4.0, 4.0, 0.4)
        return cls(w1_values=vals, w2_values=vals)


@dataclass(frozen=True)
class HeatmapCell:
    theta1: float
    theta2: float
    fitted_bias: float
    t_n: float
    reject: bool
    divergent: bool = False


def sweep_heatmap(
    features,
    labels,
    grid: GridSpec,
    metric: FairMetric,
    attack_cfg: AttackConfig,
    alpha: float = 0.05,
    delta: float = 1.25,
) -> list[HeatmapCell]:
    """Audit a fitted-intercept logistic model at every grid coefficient pair.

    Cells are emitted in row-major order (outer loop over theta1).  Cells
    whose attack diverges are flagged rather than aborting the sweep.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    cells = []
    for w1 in grid.w1_values:
        for w2 in grid.w2_values:
            b = fit_bias(x, y, w1, w2)
            model = LogisticModel(weights=np.array([w1, w2]), bias=b)
            try:
                attacked, _ = unfair_map_batch(model, metric, attack_cfg, x, y)
                ratios = model.loss(attacked, y) / model.loss(x, y)
                t_n, reject = inference.loss_ratio_test(ratios, alpha, delta)
                cells.append(HeatmapCell(w1, w2, b, t_n, reject))
            except DivergenceError:
                cells.append(HeatmapCell(w1, w2, b, float("nan"), False, divergent=True))
    return cells


def heatmap_csv(cells) -> str:
    lines = ["theta1,theta2,fitted_bias,t_n,reject,divergent"]
    for c in cells:
        lines.append(
            f"{float(c.theta1)!r},{float(c.theta2)!r},{float(c.fitted_bias)!r},{float(c.t_n)!r},{int(c.reject)},{int(c.divergent)}"
        )
    return "\n".join(lines) + "\n"


def stopping_time_sweep(
    model,
    metric: FairMetric,
    features,
    labels,
    horizons,
    lam: float = 50.0,
    eta: float = 0.01,
    alpha: float = 0.05,
) -> list[tuple[float, float]]:
    """Audit statistic as a function of the attack stopping time.

    Horizons must be non-decreasing.  Each horizon is realized as a
    constant-step Euler run whose step count best matches it; the returned
    pairs carry the realized horizon.
    """
    hs = [float(h) for h in horizons]
    if not hs or any(h < 0 for h in hs) or any(b < a for a, b in zip(hs, hs[1:])):
        raise ValueError("horizons must be non-negative and non-decreasing")
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    out = []
    for h in hs:
        cfg = constant_config_for_horizon(lam, h, eta)
        attacked, _ = unfair_map_batch(model, metric, cfg, x, y)
        ratios = model.loss(attacked, y) / model.loss(x, y)
        out.append((cfg.horizon, inference.one_sided_lower_bound(ratios, alpha)))
    return out


def stopping_csv(rows) -> str:
    lines = ["horizon,t_n"]
    for h, t in rows:
        lines.append(f"{float(h)!r},{float(t)!r}")
    return "\n".join(lines) + "\n"


def floor_psd(sigma: np.ndarray) -> np.ndarray:
    """Re-symmetrize and clip negative eigenvalues to zero."""
    sym = 0.5 * (sigma + sigma.T)
    evals, evecs = np.linalg.eigh(sym)
    floored = (evecs * np.clip(evals, 0.0, None)) @ evecs.T
    floored = 0.5 * (floored + floored.T)
    if float(np.min(np.linalg.eigvalsh(floored))) < -1e-12:
        raise ValueError("perturbed metric is not PSD even after flooring")
    return floored


def perturbation_direction(dim: int, seed: int = 0) -> np.ndarray:
    """Fixed random symmetric matrix with unit spectral norm, shared across scales."""
    g = np.random.default_rng(seed).standard_normal((dim, dim))
    e = 0.5 * (g + g.T)
    return e / spectral_norm(e)


def robustness_experiment(
    model,
    metric_exact: FairMetric,
    perturbation_scales,
    features,
    labels,
    attack_cfg: AttackConfig,
    perturb_seed: int = 0,
) -> list[tuple[float, float]]:
    """Max per-sample ratio gap between exact and perturbed-metric audits.

    For each scale s the perturbed metric is the PSD floor of
    sigma_exact + s * E with E a fixed unit-spectral-norm symmetric
    direction.  Scale 0 reuses the exact metric object, so its gap is
    exactly zero; positive scales shrink the gap as s decreases.
    """
    scales = [float(s) for s in perturbation_scales]
    if any(s < 0 for s in scales) or any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("perturbation_scales must be non-negative and strictly decreasing")
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    e = perturbation_direction(metric_exact.dim, perturb_seed)
    attacked, _ = unfair_map_batch(model, metric_exact, attack_cfg, x, y)
    base = model.loss(attacked, y) / model.loss(x, y)
    out = []
    for s in scales:
        if s == 0.0:
            metric2 = metric_exact
        else:
            metric2 = FairMetric(sigma=floor_psd(metric_exact.sigma + s * e))
        attacked2, _ = unfair_map_batch(model, metric2, attack_cfg, x, y)
        other = model.loss(attacked2, y) / model.loss(x, y)
        out.append((s, float(np.max(np.abs(base - other)))))
    return out


def robustness_csv(rows) -> str:
    lines = ["scale,max_ratio_gap"]
    for s, gap in rows:
        lines.append(f"{float(s)!r},{float(gap)!r}")
    return "\n".join(lines) + "\n"


def robustness_gap_bound(
    lam: float, delta_d: float, lipschitz_l: float, loss_lipschitz: float, diameter: float, horizon: float, loss_floor: float
) -> float:
    """Analytic cap on the ratio gap: sqrt(lam d / L) * L0 D e^{L T} / c."""
    if min(lam, lipschitz_l, loss_lipschitz, diameter, loss_floor) <= 0 or delta_d < 0 or horizon < 0:
        raise ValueError("constants must be positive (delta_d and horizon non-negative)")
    return math.sqrt(lam * delta_d / lipschitz_l) * loss_lipschitz * diameter * math.exp(lipschitz_l * horizon) / loss_floor


def balanced_accuracy(y_true, y_pred) -> float:
    """Mean of the per-class recalls; requires both classes in y_true."""
    yt = np.asarray(y_true, dtype=np.int64)
    yp = np.asarray(y_pred, dtype=np.int64)
    if yt.shape != yp.shape:
        raise ValueError("y_true and y_pred must have equal length")
    recalls = []
    for c in (0, 1):
        mask = yt == c
        if not np.any(mask):
            raise ValueError(f"class {c} missing from y_true")
        recalls.append(float(np.mean(yp[mask] == c)))
    return float(np.mean(recalls))


def average_odds_difference(y_true, y_pred, group) -> float:
    """Mean of the TPR and FPR gaps between group 1 and group 0."""
    yt = np.asarray(y_true, dtype=np.int64)
    yp = np.asarray(y_pred, dtype=np.int64)
    g = np.asarray(group, dtype=np.int64)
    if not (yt.shape == yp.shape == g.shape):
        raise ValueError("y_true, y_pred and group must have equal length")
    rates = {}
    for y_val in (1, 0):
        for g_val in (0, 1):
            mask = (yt == y_val) & (g == g_val)
            if not np.any(mask):
                raise ValueError(f"empty stratum y={y_val}, group={g_val}")
            rates[(y_val, g_val)] = float(np.mean(yp[mask] == 1))
    tpr_diff = rates[(1, 1)] - rates[(1, 0)]
    fpr_diff = rates[(0, 1)] - rates[(0, 0)]
    return 0.5 * (tpr_diff + fpr_diff)


@dataclass(frozen=True)
class RatioPopulation:
    """Synthetic loss-ratio population: a shifted gamma with known mean and sd.

    Draws are mean + (sd / sqrt(shape)) * (Gamma(shape) - shape), so the
    population mean is exact by construction and the support stays above
    mean - sd * sqrt(shape) (non-negative for the defaults used here).
    """

    mean: float
    sd: float = 0.5
    shape: float = 4.0

    def __post_init__(self):
        if self.sd <= 0 or self.shape <= 0:
            raise ValueError("sd and shape must be positive")
        if self.mean - self.sd * math.sqrt(self.shape) < 0:
            raise ValueError("population support would include negative ratios")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        scale = self.sd / math.sqrt(self.shape)
        return self.mean + scale * (rng.gamma(self.shape, 1.0, size) - self.shape)


def oracle_mean(pop: RatioPopulation, seed: int, draws: int = 10**6) -> float:
    """Monte-Carlo estimate of the population mean, independent of any test path."""
    return float(np.mean(pop.sample(np.random.default_rng(seed), draws)))


class CalibrationResult(NamedTuple):
    experiment: str
    n: int
    replicates: int
    rate: float


def coverage_experiment(
    pop: RatioPopulation, n: int = 500, replicates: int = 1000, alpha: float = 0.05, seed: int = 1
) -> tuple[CalibrationResult, float]:
    """Fraction of two-sided intervals covering the oracle mean."""
    ss = np.random.SeedSequence(seed).spawn(2)
    target = oracle_mean(pop, seed=int(ss[0].generate_state(1)[0]))
    rng = np.random.default_rng(ss[1])
    hits = 0
    for _ in range(replicates):
        lo, hi = inference.two_sided_ci(pop.sample(rng, n), alpha)
        hits += int(lo <= target <= hi)
    return CalibrationResult("coverage", n, replicates, hits / replicates), target


def rejection_rate_experiment(
    pop: RatioPopulation,
    delta: float,
    n: int = 500,
    replicates: int = 200,
    alpha: float = 0.05,
    seed: int = 2,
    name: str = "type1",
) -> CalibrationResult:
    """Fraction of replicates on which the one-sided test rejects at ``delta``."""
    rng = np.random.default_rng(seed)
    rejections = 0
    for _ in range(replicates):
        _, reject = inference.loss_ratio_test(pop.sample(rng, n), alpha, delta)
        rejections += int(reject)
    return CalibrationResult(name, n, replicates, rejections / replicates)


def calibration_csv(rows) -> str:
    lines = ["experiment,n,replicates,rate"]
    for r in rows:
        lines.append(f"{r.experiment},{r.n},{r.replicates},{float(r.rate)!r}")
    return "\n".join(lines) + "\n"
