"""Audit statistics: ratio moments, confidence intervals, and decision rules.

Given per-sample loss ratios r_i = loss(f(Phi(x_i, y_i)), y_i) /
loss(f(x_i), y_i), the audit value is the population mean of r.  The
sample supplies

    S_n = mean(r)                 (audit statistic)
    V_n^2 = sum (r_i - S_n)^2 / (n - 1)

and the central limit theorem gives asymptotically exact intervals and a
calibrated one-sided test: reject fairness at tolerance delta when

    T_n = S_n - z_{1-alpha} V_n / sqrt(n) > delta.

For 0-1 losses the per-sample ratio is undefined whenever the original
point is classified correctly, so the error-rates variant tests the ratio
of means instead: S~ = A_n / B_n with A_n, B_n the attacked and original
misclassification rates.  Its variance comes from the delta method applied
to the mean vector (A_n, B_n); the second moments are accumulated
uncentered with a 1/n normalization, which yields the same quadratic form
as the centered covariance because the mean cross terms cancel exactly.

All statistics are pure folds over per-sample values; the audit runner may
compute attacks in chunks concurrently and reduces them in index order, so
reports never depend on scheduling.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .attack import AttackConfig, unfair_map_batch
from .fair_metric import FairMetric

INDEPENDENCE_NOTE = "audit data assumed independent of the model's training data"


class NoBaselineErrors(RuntimeError):
    """The model classifies every original sample correctly; the error-rates ratio is undefined."""


def normal_cdf(z: float) -> float:
    """Standard normal CDF, accurate in both tails via erfc."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


# Rational approximation coefficients (central and tail regions) for the
# inverse normal CDF; two Newton corrections against the erfc-based CDF
# push the residual |Phi(z) - p| far below the 1e-9 contract.
_QA = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
       1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_QB = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
       6.680131188771972e+01, -1.328068155288572e+01)
_QC = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
       -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_QD = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
       3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF with |Phi(z_p) - p| < 1e-9."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    plow, phigh = 0.02425, 1.0 - 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        z = ((((((_QC[0] * q + _QC[1]) * q + _QC[2]) * q + _QC[3]) * q + _QC[4]) * q + _QC[5])
             / ((((_QD[0] * q + _QD[1]) * q + _QD[2]) * q + _QD[3]) * q + 1.0))
    elif p > phigh:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        z = -((((((_QC[0] * q + _QC[1]) * q + _QC[2]) * q + _QC[3]) * q + _QC[4]) * q + _QC[5])
              / ((((_QD[0] * q + _QD[1]) * q + _QD[2]) * q + _QD[3]) * q + 1.0))
    else:
        q = p - 0.5
        r = q * q
        z = ((((((_QA[0] * r + _QA[1]) * r + _QA[2]) * r + _QA[3]) * r + _QA[4]) * r + _QA[5]) * q
             / (((((_QB[0] * r + _QB[1]) * r + _QB[2]) * r + _QB[3]) * r + _QB[4]) * r + 1.0))
    for _ in range(2):
        z -= (normal_cdf(z) - p) / _normal_pdf(z)
    return z


def _check_ratios(ratios) -> np.ndarray:
    r = np.asarray(ratios, dtype=np.float64)
    if r.ndim != 1 or r.shape[0] < 2:
        raise ValueError("need at least two ratio samples")
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise ValueError("ratios must be finite and non-negative")
    return r


def loss_ratio_stats(ratios) -> tuple[float, float]:
    """Sample mean S_n and standard deviation V_n (n-1 convention) of the ratios."""
    r = _check_ratios(ratios)
    s_n = float(np.mean(r))
    v_n = float(np.sqrt(np.sum((r - s_n) ** 2) / (r.shape[0] - 1)))
    return s_n, v_n


def two_sided_ci(ratios, alpha: float) -> tuple[float, float]:
    """Equal-tailed interval S_n +/- z_{1-alpha/2} V_n / sqrt(n)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    r = _check_ratios(ratios)
    s_n, v_n = loss_ratio_stats(r)
    half = normal_quantile(1.0 - alpha / 2.0) * v_n / math.sqrt(r.shape[0])
    return s_n - half, s_n + half


def one_sided_lower_bound(ratios, alpha: float) -> float:
    """Lower end of the one-sided interval: S_n - z_{1-alpha} V_n / sqrt(n)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    r = _check_ratios(ratios)
    s_n, v_n = loss_ratio_stats(r)
    return s_n - normal_quantile(1.0 - alpha) * v_n / math.sqrt(r.shape[0])


def loss_ratio_test(ratios, alpha: float, delta: float) -> tuple[float, bool]:
    """One-sided lower confidence bound T_n and the rejection decision T_n > delta."""
    if delta <= 1.0:
        raise ValueError("delta must exceed 1")
    t_n = one_sided_lower_bound(ratios, alpha)
    return t_n, t_n > delta


def _check_zero_one_pair(post, pre) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(post, dtype=np.float64)
    b = np.asarray(pre, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.shape[0] < 2:
        raise ValueError("post and pre must be equal-length 1-D arrays with n >= 2")
    for name, arr in (("post", a), ("pre", b)):
        if not np.all((arr == 0.0) | (arr == 1.0)):
            raise ValueError(f"{name} entries must be 0 or 1")
    return a, b


class ErrorRateStats(NamedTuple):
    a_n: float  # attacked misclassification rate
    b_n: float  # original misclassification rate
    s_tilde: float  # A_n / B_n
    var_hat: float  # delta-method variance of s_tilde


def error_rate_stats(post, pre) -> ErrorRateStats:
    """Ratio-of-means statistic for 0-1 losses with its delta-method variance.

    The uncentered second-moment matrix (1/n normalization) enters the
    quadratic form A^2 M22 + B^2 M11 - 2 A B M12, which is algebraically
    identical to the centered version, and the variance estimate is that
    form divided by n B^4.
    """
    a, b = _check_zero_one_pair(post, pre)
    n = a.shape[0]
    a_n = float(np.mean(a))
    b_n = float(np.mean(b))
    if b_n == 0.0:
        raise NoBaselineErrors("no original sample is misclassified; the error-rates ratio is undefined")
    m11 = float(np.mean(a * a))
    m22 = float(np.mean(b * b))
    m12 = float(np.mean(a * b))
    quad = a_n**2 * m22 + b_n**2 * m11 - 2.0 * a_n * b_n * m12
    return ErrorRateStats(a_n=a_n, b_n=b_n, s_tilde=a_n / b_n, var_hat=quad / (n * b_n**4))


def error_rate_test(post, pre, alpha: float, delta: float) -> tuple[float, bool]:
    """Calibrated error-rates statistic T~ = S~ - z_{1-alpha} sqrt(var_hat) and its decision."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if delta <= 1.0:
        raise ValueError("delta must exceed 1")
    stats = error_rate_stats(post, pre)
    t_tilde = stats.s_tilde - normal_quantile(1.0 - alpha) * math.sqrt(stats.var_hat)
    return t_tilde, t_tilde > delta


@dataclass(frozen=True)
class ErrorRateReport:
    a_n: float
    b_n: float
    s_tilde: float
    t_tilde: float
    reject: bool

    def to_dict(self) -> dict:
        return {
            "a_n": self.a_n,
            "b_n": self.b_n,
            "s_tilde": self.s_tilde,
            "t_tilde": self.t_tilde,
            "reject": self.reject,
        }


@dataclass(frozen=True)
class AuditReport:
    """Everything an audit produces, plus the per-sample values behind it.

    ``index`` holds the original positions of the audited samples (samples
    dropped for divergence are listed in ``divergent`` instead).  The
    serialized form keeps only the aggregate statistics.
    """

    n: int
    s_n: float
    v_n: float
    t_n: float
    ci_lo: float
    ci_hi: float
    ci_one_sided_lo: float
    alpha: float
    delta: float
    reject: bool
    error_rate: ErrorRateReport | None
    divergent: tuple[int, ...]
    note: str
    index: np.ndarray
    ratios: np.ndarray
    pre01: np.ndarray
    post01: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "s_n": self.s_n,
            "v_n": self.v_n,
            "t_n": self.t_n,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "ci_one_sided_lo": self.ci_one_sided_lo,
            "alpha": self.alpha,
            "delta": self.delta,
            "reject": self.reject,
            "error_rate": None if self.error_rate is None else self.error_rate.to_dict(),
            "divergent": list(self.divergent),
            "note": self.note,
        }

    def to_json(self, extra: dict | None = None) -> str:
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def samples_csv(self) -> str:
        lines = ["index,ratio,pre01,post01"]
        for i in range(self.n):
            lines.append(
                f"{int(self.index[i])},{float(self.ratios[i])!r},{int(self.pre01[i])},{int(self.post01[i])}"
            )
        return "\n".join(lines) + "\n"


def _predictions(model, x) -> np.ndarray:
    # threshold at 0.5 with ties predicting class 1
    return (np.asarray(model.predict_proba(x)) >= 0.5).astype(np.int64)


def audit(
    model,
    metric: FairMetric,
    attack_cfg: AttackConfig,
    features,
    labels,
    alpha: float = 0.05,
    delta: float = 1.25,
    skip_divergent: bool = False,
    include_error_rate: bool = True,
    threads: int = 1,
) -> AuditReport:
    """Attack every sample and assemble the full audit report.

    The smooth-loss ratios feed the mean-of-ratios test; thresholded
    predictions before and after the attack feed the error-rates test.
    Samples whose attack diverges abort the audit unless
    ``skip_divergent`` is set, in which case they are excluded and listed
    in the report.  The caller is responsible for auditing on data the
    model was not trained on; the report carries that obligation as a note.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValueError("features must be (n, d) with matching 1-D labels")
    if threads < 1:
        raise ValueError("threads must be >= 1")

    if threads == 1 or x.shape[0] < 2 * threads:
        attacked, divergent = unfair_map_batch(model, metric, attack_cfg, x, y, skip_divergent=skip_divergent)
    else:
        chunks = np.array_split(np.arange(x.shape[0]), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(unfair_map_batch, model, metric, attack_cfg, x[c], y[c], skip_divergent)
                for c in chunks
            ]
            parts = [f.result() for f in futures]
        attacked = np.vstack([p[0] for p in parts])
        divergent = sorted(int(c[i]) for c, p in zip(chunks, parts) for i in p[1])

    keep = np.ones(x.shape[0], dtype=bool)
    keep[list(divergent)] = False
    idx = np.flatnonzero(keep)
    if idx.size < 2:
        raise ValueError("fewer than two non-divergent samples; cannot audit")

    ratios = model.loss(attacked[idx], y[idx]) / model.loss(x[idx], y[idx])
    pre01 = (_predictions(model, x[idx]) != y[idx].astype(np.int64)).astype(np.int64)
    post01 = (_predictions(model, attacked[idx]) != y[idx].astype(np.int64)).astype(np.int64)

    s_n, v_n = loss_ratio_stats(ratios)
    ci_lo, ci_hi = two_sided_ci(ratios, alpha)
    t_n, reject = loss_ratio_test(ratios, alpha, delta)

    error_rate = None
    if include_error_rate:
        stats = error_rate_stats(post01, pre01)
        t_tilde, reject_tilde = error_rate_test(post01, pre01, alpha, delta)
        error_rate = ErrorRateReport(
            a_n=stats.a_n, b_n=stats.b_n, s_tilde=stats.s_tilde, t_tilde=t_tilde, reject=reject_tilde
        )

    return AuditReport(
        n=int(idx.size),
        s_n=s_n,
        v_n=v_n,
        t_n=t_n,
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        ci_one_sided_lo=t_n,
        alpha=alpha,
        delta=delta,
        reject=reject,
        error_rate=error_rate,
        divergent=tuple(divergent),
        note=INDEPENDENCE_NOTE,
        index=idx,
        ratios=np.asarray(ratios),
        pre01=pre01,
        post01=post01,
    )
