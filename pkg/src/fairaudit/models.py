"""Differentiable binary classifiers with loss and input-gradient evaluation.

Two architectures are provided: plain logistic regression and a two-layer
MLP with a smooth activation (tanh or softplus).  Smoothness matters: the
attack module integrates the gradient field of the loss, and the stability
and robustness guarantees it relies on require that field to be Lipschitz,
which rules out ReLU-style kinks.

Every model exposes three evaluation methods, each accepting a single
sample ``x`` of shape ``(d,)`` or a batch of shape ``(n, d)``:

- ``predict_proba(x)``: class-1 probability,
- ``loss(x, y)``: clamped cross-entropy,
- ``input_gradient(x, y)``: gradient of the (unclamped) loss in ``x``.

Any object implementing this triple can be attacked and audited; the test
suite uses small analytic stubs through the same interface.

Models are immutable after training and evaluation is pure, so instances
may be shared across threads.  An optional projector ``P`` is applied as
``x -> P x`` before every forward and gradient evaluation; training with a
projector produces the "project out the sensitive subspace" preprocessing
variant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix

# Probabilities are clamped to [P_FLOOR, 1 - P_FLOOR] inside the loss, which
# bounds it to [LOSS_FLOOR, LOSS_CAP].  The positive floor keeps loss ratios
# well defined; the clamp never moves any statistic materially because it only
# engages at |logit| > ~27.6.
P_FLOOR = 1e-12
LOSS_FLOOR = -np.log1p(-P_FLOOR)
LOSS_CAP = -np.log(P_FLOOR)


def expit(z):
    """Numerically stable logistic function exp(z) / (1 + exp(z))."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def logit(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return float(np.log(p) - np.log1p(-p))


def loss_from_logit(z, y):
    """Clamped cross-entropy computed directly from the logit.

    Equals -y ln p - (1-y) ln(1-p) with p clamped to [P_FLOOR, 1 - P_FLOOR];
    working from the logit avoids the precision loss of forming p first.
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    raw = np.logaddexp(0.0, (1.0 - 2.0 * y) * z)
    out = np.clip(raw, LOSS_FLOOR, LOSS_CAP)
    return out if out.ndim else float(out)


def _softplus(z):
    return np.logaddexp(0.0, z)


_ACTIVATIONS = {
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "softplus": (_softplus, expit),
}


def _check_labels(y) -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64)
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError("labels must be 0 or 1")
    return arr


def _as_batch(x, dim: int):
    """Return (X as (n, d), was_single_sample)."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected input of dimension {dim}, got shape {np.shape(x)}")
    return arr, single


@dataclass(frozen=True)
class LogisticModel:
    """Linear logit classifier: p(x) = expit(bias + w . (P x))."""

    weights: np.ndarray
    bias: float
    projector: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        if self.projector is not None:
            object.__setattr__(self, "projector", as_matrix(self.projector, "projector"))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def _logits(self, x):
        xb, single = _as_batch(x, self.dim)
        if self.projector is not None:
            xb = xb @ self.projector
        z = xb @ self.weights + self.bias
        return z, single

    def predict_proba(self, x):
        z, single = self._logits(x)
        p = expit(z)
        return float(p[0]) if single else p

    def loss(self, x, y):
        z, single = self._logits(x)
        out = loss_from_logit(z, _check_labels(y))
        return float(out[0]) if single else out

    def input_gradient(self, x, y):
        z, single = self._logits(x)
        p = expit(z)
        w = self.weights if self.projector is None else self.projector @ self.weights
        grad = (p - _check_labels(y))[:, None] * w[None, :]
        return grad[0] if single else grad

    def to_dict(self) -> dict:
        return {
            "architecture": "logistic",
            "weights": self.weights.tolist(),
            "bias": float(self.bias),
            "projector": None if self.projector is None else self.projector.tolist(),
        }


@dataclass(frozen=True)
class MlpModel:
    """Two-layer network with a smooth activation and a linear output logit."""

    layer1_weights: np.ndarray  # (hidden, input)
    layer1_bias: np.ndarray  # (hidden,)
    layer2_weights: np.ndarray  # (hidden,)
    layer2_bias: float
    activation: str = "tanh"
    projector: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "layer1_weights", np.asarray(self.layer1_weights, dtype=np.float64))
        object.__setattr__(self, "layer1_bias", np.asarray(self.layer1_bias, dtype=np.float64))
        object.__setattr__(self, "layer2_weights", np.asarray(self.layer2_weights, dtype=np.float64))
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}; use tanh or softplus")
        h, d = self.layer1_weights.shape
        if self.layer1_bias.shape != (h,) or self.layer2_weights.shape != (h,):
            raise ValueError("inconsistent MLP parameter shapes")
        if self.projector is not None:
            object.__setattr__(self, "projector", as_matrix(self.projector, "projector"))

    @property
    def dim(self) -> int:
        return self.layer1_weights.shape[1]

    def _forward(self, x):
        xb, single = _as_batch(x, self.dim)
        if self.projector is not None:
            xb = xb @ self.projector
        act, _ = _ACTIVATIONS[self.activation]
        z1 = xb @ self.layer1_weights.T + self.layer1_bias
        z = act(z1) @ self.layer2_weights + self.layer2_bias
        return z, z1, single

    def predict_proba(self, x):
        z, _, single = self._forward(x)
        p = expit(z)
        return float(p[0]) if single else p

    def loss(self, x, y):
        z, _, single = self._forward(x)
        out = loss_from_logit(z, _check_labels(y))
        return float(out[0]) if single else out

    def input_gradient(self, x, y):
        z, z1, single = self._forward(x)
        _, dact = _ACTIVATIONS[self.activation]
        p = expit(z)
        # d logit / d x' = (act'(z1) * w2) @ W1, then chain through the projector
        dlogit = (dact(z1) * self.layer2_weights) @ self.layer1_weights
        if self.projector is not None:
            dlogit = dlogit @ self.projector
        grad = (p - _check_labels(y))[:, None] * dlogit
        return grad[0] if single else grad

    def to_dict(self) -> dict:
        return {
            "architecture": "mlp",
            "activation": self.activation,
            "layer1_weights": self.layer1_weights.tolist(),
            "layer1_bias": self.layer1_bias.tolist(),
            "layer2_weights": self.layer2_weights.tolist(),
            "layer2_bias": float(self.layer2_bias),
            "projector": None if self.projector is None else self.projector.tolist(),
        }


def model_from_dict(doc: dict):
    """Inverse of ``Model.to_dict``; the round trip is bit-identical."""
    arch = doc.get("architecture")
    proj = doc.get("projector")
    if arch == "logistic":
        return LogisticModel(weights=doc["weights"], bias=doc["bias"], projector=proj)
    if arch == "mlp":
        return MlpModel(
            layer1_weights=doc["layer1_weights"],
            layer1_bias=doc["layer1_bias"],
            layer2_weights=doc["layer2_weights"],
            layer2_bias=doc["layer2_bias"],
            activation=doc["activation"],
            projector=proj,
        )
    raise ValueError(f"unknown architecture tag {arch!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


@dataclass(frozen=True)
class TrainConfig:
    """Settings for the mini-batch gradient-descent trainer.

    Plain fixed-step GD is used instead of an adaptive optimizer: at the
    data scales this package targets determinism and simplicity win, and
    the fitted model is only an audit subject.  ``class_reweight`` weights
    each sample by the inverse frequency of its class.
    """

    learning_rate: float = 0.1
    batch_size: int = 64
    num_steps: int = 2000
    class_reweight: bool = False
    seed: int = 0
    preprocess_projector: np.ndarray | None = None
    hidden_units: int = 50
    activation: str = "tanh"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size <= 0 or self.num_steps < 0:
            raise ValueError("batch_size must be positive and num_steps non-negative")
        if self.preprocess_projector is not None:
            object.__setattr__(
                self, "preprocess_projector", as_matrix(self.preprocess_projector, "preprocess_projector")
            )


def train(features, labels, architecture: str = "logistic", cfg: TrainConfig = TrainConfig()):
    """Fit a classifier with seed-deterministic mini-batch gradient descent.

    ``architecture`` is ``"logistic"`` or ``"mlp"``; the MLP width and
    activation come from ``cfg``.  When ``cfg.preprocess_projector`` is set
    the trainer works on projected inputs and the returned model stores the
    projector, so evaluation applies it too.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("features must be a non-empty (n, d) array")
    y = _check_labels(labels)
    if y.shape != (x.shape[0],):
        raise ValueError("labels must be a 1-D array matching features")
    n, d = x.shape

    if cfg.class_reweight:
        n_pos = int(np.sum(y == 1.0))
        if n_pos == 0 or n_pos == n:
            raise ValueError("class_reweight requires both classes in the training data")
        sample_weight = np.where(y == 1.0, n / (2.0 * n_pos), n / (2.0 * (n - n_pos)))
    else:
        sample_weight = np.ones(n)

    proj = cfg.preprocess_projector
    if proj is not None:
        if proj.shape != (d, d):
            raise ValueError(f"projector shape {proj.shape} does not match feature dimension {d}")
        x = x @ proj

    rng = np.random.default_rng(cfg.seed)
    if architecture == "logistic":
        params = {"w": np.zeros(d), "b": 0.0}
    elif architecture == "mlp":
        h = cfg.hidden_units
        params = {
            "w1": rng.normal(0.0, 1.0 / np.sqrt(d), size=(h, d)),
            "b1": np.zeros(h),
            "w2": rng.normal(0.0, 1.0 / np.sqrt(h), size=h),
            "b2": 0.0,
        }
        act, dact = _ACTIVATIONS[cfg.activation]
    else:
        raise ValueError(f"unknown architecture {architecture!r}")

    order = np.arange(n)
    pos = n  # force a reshuffle on the first step
    for _ in range(cfg.num_steps):
        if pos + cfg.batch_size > n:
            order = rng.permutation(n)
            pos = 0
        idx = order[pos : pos + cfg.batch_size]
        pos += cfg.batch_size
        xb, yb, wb = x[idx], y[idx], sample_weight[idx]

        if architecture == "logistic":
            z = xb @ params["w"] + params["b"]
            err = wb * (expit(z) - yb)
            params["w"] -= cfg.learning_rate * (xb.T @ err) / len(idx)
            params["b"] -= cfg.learning_rate * float(np.mean(err))
        else:
            z1 = xb @ params["w1"].T + params["b1"]
            a = act(z1)
            z = a @ params["w2"] + params["b2"]
            err = wb * (expit(z) - yb)
            dz1 = (err[:, None] * params["w2"][None, :]) * dact(z1)
            params["w2"] -= cfg.learning_rate * (a.T @ err) / len(idx)
            params["b2"] -= cfg.learning_rate * float(np.mean(err))
            params["w1"] -= cfg.learning_rate * (dz1.T @ xb) / len(idx)
            params["b1"] -= cfg.learning_rate * np.mean(dz1, axis=0)

    if architecture == "logistic":
        return LogisticModel(weights=params["w"], bias=float(params["b"]), projector=proj)
    return MlpModel(
        layer1_weights=params["w1"],
        layer1_bias=params["b1"],
        layer2_weights=params["w2"],
        layer2_bias=float(params["b2"]),
        activation=cfg.activation,
        projector=proj,
    )
