"""Fair metrics: PSD quadratic forms that discount sensitive directions.

A fair metric measures how similar two individuals are for the purpose of
a fairness audit.  It is a squared pseudo-metric d^2(x1, x2) =
(x1-x2)' Sigma (x1-x2) with Sigma symmetric positive semidefinite; the
null space of Sigma holds the directions along which individuals are
considered identical (e.g. the span of directions predictive of protected
attributes).

Metrics are stored as explicit dense matrices rather than factored forms:
dimensions here are small and explicit matrices make misspecification-gap
computations direct.  Instances are immutable and evaluation is pure.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import models
from .linalg import DEFAULT_RANK_TOL, as_matrix, orthonormal_basis, projector_orthogonal_to

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class FairMetric:
    """Squared pseudo-metric d^2(x1, x2) = (x1-x2)' Sigma (x1-x2)."""

    sigma: np.ndarray

    def __post_init__(self):
        s = as_matrix(self.sigma, "sigma")
        if s.shape[0] != s.shape[1]:
            raise ValueError("sigma must be square")
        if np.max(np.abs(s - s.T)) > SYMMETRY_TOL:
            raise ValueError("sigma must be symmetric")
        object.__setattr__(self, "sigma", s)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def _deltas(self, x1, x2):
        a = np.asarray(x1, dtype=np.float64)
        b = np.asarray(x2, dtype=np.float64)
        single = a.ndim == 1 and b.ndim == 1
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        if a.shape[1] != self.dim or b.shape[1] != self.dim:
            raise ValueError(f"points must have dimension {self.dim}")
        return a - b, single

    def distance_sq(self, x1, x2):
        """Squared fair distance; symmetric in its arguments and zero on the diagonal."""
        d, single = self._deltas(x1, x2)
        out = np.einsum("ij,jk,ik->i", d, self.sigma, d)
        return float(out[0]) if single else out

    def distance_sq_gradient(self, x, x0):
        """Gradient of ``distance_sq(x, x0)`` in its first argument: 2 Sigma (x - x0)."""
        d, single = self._deltas(x, x0)
        out = 2.0 * d @ self.sigma
        return out[0] if single else out

    def to_dict(self) -> dict:
        return {"dim": self.dim, "sigma": self.sigma.tolist()}


def metric_from_dict(doc: dict) -> FairMetric:
    sigma = as_matrix(doc["sigma"], "sigma")
    if sigma.shape != (doc["dim"], doc["dim"]):
        raise ValueError("metric dimension does not match sigma shape")
    return FairMetric(sigma=sigma)


def save_metric(metric: FairMetric, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metric.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_metric(path) -> FairMetric:
    with open(path, encoding="utf-8") as fh:
        return metric_from_dict(json.load(fh))


@dataclass(frozen=True)
class SubspaceSpec:
    """Which protected columns span the sensitive subspace, and the rank tolerance."""

    protected_columns: tuple[str, ...]
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        object.__setattr__(self, "protected_columns", tuple(self.protected_columns))
        if not self.protected_columns:
            raise ValueError("at least one protected column is required")
        if self.rank_tol <= 0:
            raise ValueError("rank_tol must be positive")


def learn_sensitive_metric(dataset, spec: SubspaceSpec, train_cfg: models.TrainConfig | None = None) -> FairMetric:
    """Learn a sensitive-subspace metric from data.

    One logistic regression per protected column predicts that column from
    the features; the regression weight vectors span the sensitive
    subspace.  The returned metric is the projector onto the orthogonal
    complement of that span, so any displacement inside the span has zero
    fair length.

    Constant protected columns cannot be regressed and are skipped with a
    warning; if every column is skipped this raises.
    """
    if train_cfg is None:
        train_cfg = models.TrainConfig(learning_rate=0.5, batch_size=64, num_steps=3000, seed=0)
    if train_cfg.class_reweight:
        raise ValueError("subspace regressions run without class reweighting")
    x = np.asarray(dataset.features, dtype=np.float64)
    directions = []
    for name in spec.protected_columns:
        bits = np.asarray(dataset.protected[name], dtype=np.float64)
        if np.all(bits == bits[0]):
            warnings.warn(f"protected column {name!r} is constant; skipped", stacklevel=2)
            continue
        model = models.train(x, bits, architecture="logistic", cfg=train_cfg)
        directions.append(model.weights)
    if not directions:
        raise ValueError("no usable protected columns: all were constant")
    basis = orthonormal_basis(directions, rank_tol=spec.rank_tol)
    return FairMetric(sigma=projector_orthogonal_to(basis, x.shape[1]))


def rotated_coordinate_metric(beta: float, dim: int = 2) -> FairMetric:
    """Two-dimensional metric whose cost-free direction is rotated by ``beta`` radians.

    At beta = 0 the metric is diag(0, 1): movement along the first
    coordinate is free and the second coordinate is charged in full.
    Rotating the free direction to (cos beta, sin beta) leaves the single
    charged direction v = (-sin beta, cos beta), so Sigma = v v'.  Its
    diagonal is (sin^2 beta, cos^2 beta); the off-diagonal coupling
    -sin(beta) cos(beta) is what actually tilts the discounted direction
    (without it the free direction would stay axis-aligned for every beta
    strictly between 0 and 90 degrees).
    """
    if dim != 2:
        raise ValueError("rotated coordinate metric is defined for dim == 2")
    s, c = np.sin(beta), np.cos(beta)
    v = np.array([-s, c])
    return FairMetric(sigma=np.outer(v, v))


def misspecification_level(m1: FairMetric, m2: FairMetric) -> float:
    """Gradient-gap constant between two quadratic metrics: 2 ||Sigma1 - Sigma2||_2.

    For quadratic metrics the gradient gap ||grad d1^2 - grad d2^2|| at any
    pair (x, x') is bounded by this constant times ||x - x'||.
    """
    if m1.dim != m2.dim:
        raise ValueError("metrics must share a dimension")
    return 2.0 * float(np.linalg.norm(m1.sigma - m2.sigma, 2))
