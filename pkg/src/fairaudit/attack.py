"""Gradient-flow attack: the unfair map and its stability diagnostics.

Starting from an audit point x0 with label y, the attack follows the
penalized ascent field

    g(x) = grad_x loss(f(x), y) - lam * grad_x d^2(x, x0)

by explicit forward-Euler steps x_k = x_{k-1} + eta_k g(x_{k-1}).  The
end point after all steps is the unfair map Phi(x0, y): a point the fair
metric considers similar to x0 (large deviations in non-discounted
directions are paid for at rate lam) on which the model does worse.  The
effective horizon is T = sum_k eta_k, so the same flow can be expressed
either by a step budget or by a stopping time.

Plain forward Euler is used deliberately: the audited statistic is defined
algorithmically, and a fancier adaptive integrator would change what is
being measured.  For fields with an analytically known flow,
``stability_gap`` checks the discretization against the global error bound
h * m * sqrt(d) / (2 L) * (e^{L T} - 1), where L is a Lipschitz constant of
the field and m bounds ||J_g(x) g(x)||_inf along the path.

``unfair_map`` is pure: identical inputs give bit-identical outputs, and
each sample's outcome depends only on its own inputs, so callers may
process samples concurrently in any order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fair_metric import FairMetric

DIVERGENCE_RADIUS = 1e6


class DivergenceError(RuntimeError):
    """Euler iterates left the trust region or became non-finite."""


class StabilityBoundError(RuntimeError):
    """Observed Euler error exceeded the global stability bound."""


@dataclass(frozen=True)
class AttackConfig:
    """Penalty strength, step budget, and step-size schedule.

    ``schedule`` is ``"constant"`` (every step ``eta``) or ``"decay"``
    (step t gets ``decay_c / t**decay_p``).  ``num_steps == 0`` is allowed
    and makes the attack the identity map.
    """

    lam: float
    num_steps: int
    schedule: str = "constant"
    eta: float = 0.01
    decay_c: float = 0.02
    decay_p: float = 2.0 / 3.0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.num_steps < 0:
            raise ValueError("num_steps must be non-negative")
        if self.schedule not in ("constant", "decay"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.schedule == "constant" and self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.schedule == "decay" and (self.decay_c <= 0 or self.decay_p < 0):
            raise ValueError("decay_c must be positive and decay_p non-negative")

    def step_sizes(self) -> np.ndarray:
        if self.schedule == "constant":
            return np.full(self.num_steps, self.eta)
        t = np.arange(1, self.num_steps + 1, dtype=np.float64)
        return self.decay_c / t**self.decay_p

    @property
    def horizon(self) -> float:
        """Effective stopping time T = sum of step sizes."""
        return float(np.sum(self.step_sizes()))


def audit_preset() -> AttackConfig:
    """Default settings for auditing trained classifiers on tabular data."""
    return AttackConfig(lam=50.0, num_steps=500, schedule="constant", eta=0.01)


def sim_preset() -> AttackConfig:
    """Default settings for the 2-D synthetic study (decaying steps)."""
    return AttackConfig(lam=100.0, num_steps=400, schedule="decay", decay_c=0.02, decay_p=2.0 / 3.0)


def constant_config_for_horizon(lam: float, horizon: float, eta: float = 0.01) -> AttackConfig:
    """Constant-step config whose step count best matches the requested horizon."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    return AttackConfig(lam=lam, num_steps=int(round(horizon / eta)), schedule="constant", eta=eta)


@dataclass(frozen=True)
class AttackTrace:
    """Per-step record of one attack: iterates x_0..x_N, losses, and penalties.

    ``losses[k]`` is the clamped model loss at iterate k and ``penalties[k]``
    is lam * d^2(x_k, x_0), so ``losses - penalties`` is the penalized
    objective the flow ascends.
    """

    iterates: np.ndarray  # (N+1, d)
    losses: np.ndarray  # (N+1,)
    penalties: np.ndarray  # (N+1,)
    step_sizes: np.ndarray  # (N,)
    horizon: float

    def objective(self) -> np.ndarray:
        return self.losses - self.penalties

    def to_jsonl(self) -> str:
        lines = []
        for k in range(self.iterates.shape[0]):
            lines.append(
                json.dumps(
                    {
                        "step": k,
                        "x": self.iterates[k].tolist(),
                        "loss": float(self.losses[k]),
                        "penalty": float(self.penalties[k]),
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + "\n"


def flow_field(model, metric: FairMetric, lam: float, x, x0, y):
    """Penalized ascent field g(x); accepts single points or (n, d) batches."""
    return model.input_gradient(x, y) - lam * metric.distance_sq_gradient(x, x0)


def unfair_map(model, metric: FairMetric, cfg: AttackConfig, x0, y, record_trace: bool = False):
    """Run the Euler attack from a single point; returns (x_final, trace or None)."""
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim != 1 or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite 1-D point")
    steps = cfg.step_sizes()
    x = x0.copy()
    trace = None
    if record_trace:
        iterates = np.empty((len(steps) + 1, x0.shape[0]))
        losses = np.empty(len(steps) + 1)
        penalties = np.empty(len(steps) + 1)
        iterates[0] = x
        losses[0] = model.loss(x, y)
        penalties[0] = cfg.lam * metric.distance_sq(x, x0)
    for k, eta in enumerate(steps, start=1):
        x = x + eta * flow_field(model, metric, cfg.lam, x, x0, y)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x - x0) > DIVERGENCE_RADIUS:
            raise DivergenceError(f"attack diverged at step {k}")
        if record_trace:
            iterates[k] = x
            losses[k] = model.loss(x, y)
            penalties[k] = cfg.lam * metric.distance_sq(x, x0)
    if record_trace:
        trace = AttackTrace(
            iterates=iterates,
            losses=losses,
            penalties=penalties,
            step_sizes=steps,
            horizon=float(np.sum(steps)),
        )
    return x, trace


def unfair_map_batch(model, metric: FairMetric, cfg: AttackConfig, x0, y, skip_divergent: bool = False):
    """Vectorized attack over an (n, d) batch of independent samples.

    Returns ``(x_final, divergent)`` where ``divergent`` is the sorted list
    of sample indices whose iterates blew up.  Diverged samples are frozen
    at their last finite iterate; unless ``skip_divergent`` is set, any
    divergence raises instead.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim != 2:
        raise ValueError("x0 must be an (n, d) array")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (x0.shape[0],):
        raise ValueError("y must be a 1-D array matching x0")
    x = x0.copy()
    alive = np.ones(x0.shape[0], dtype=bool)
    divergent: list[int] = []
    for k, eta in enumerate(cfg.step_sizes(), start=1):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        xa = x[idx]
        xa = xa + eta * flow_field(model, metric, cfg.lam, xa, x0[idx], y[idx])
        bad = ~np.all(np.isfinite(xa), axis=1) | (np.linalg.norm(xa - x0[idx], axis=1) > DIVERGENCE_RADIUS)
        if np.any(bad):
            bad_idx = idx[bad]
            if not skip_divergent:
                raise DivergenceError(f"attack diverged at step {k} on sample {int(bad_idx[0])}")
            divergent.extend(int(i) for i in bad_idx)
            alive[bad_idx] = False
        good = idx[~bad]
        x[good] = xa[~bad]
    return x, sorted(divergent)


def loss_ratio(model, metric: FairMetric, cfg: AttackConfig, x0, y) -> float:
    """Loss at the attacked point divided by the loss at the original point.

    With step sizes inside the stability region of the penalized objective
    the ratio cannot drop below 1 (the flow ascends loss minus penalty, and
    the penalty is zero at the start), so values meaningfully above 1
    quantify how much the model's treatment of similar points differs.
    """
    phi, _ = unfair_map(model, metric, cfg, x0, y)
    return float(model.loss(phi, y) / model.loss(x0, y))


@dataclass(frozen=True)
class StabilityProbe:
    """Constants entering the global Euler error bound."""

    lipschitz_L: float
    curvature_m: float
    dim_d: int
    max_step_h: float

    def __post_init__(self):
        if min(self.lipschitz_L, self.curvature_m, self.max_step_h) <= 0 or self.dim_d <= 0:
            raise ValueError("all probe constants must be positive")

    def bound(self, horizon: float, h: float | None = None) -> float:
        h_eff = self.max_step_h if h is None else h
        return (
            h_eff
            * self.curvature_m
            * np.sqrt(self.dim_d)
            / (2.0 * self.lipschitz_L)
            * np.expm1(self.lipschitz_L * horizon)
        )


@dataclass(frozen=True)
class LinearFlowProblem:
    """Flow field g(x) = A x + c with A symmetric, solved in closed form.

    The exact solution through x0 is computed by eigendecomposition of A,
    which also handles singular A (zero eigenvalues integrate to linear
    drift).  Used to measure true Euler discretization error.
    """

    a: np.ndarray
    c: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        x0 = np.asarray(self.x0, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("a must be square")
        if np.max(np.abs(a - a.T)) > 1e-10:
            raise ValueError("a must be symmetric")
        if c.shape != (a.shape[0],) or x0.shape != (a.shape[0],):
            raise ValueError("c and x0 must match the dimension of a")
        evals, evecs = np.linalg.eigh(a)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "_evals", evals)
        object.__setattr__(self, "_evecs", evecs)

    def field(self, x):
        return self.a @ x + self.c

    def exact(self, t: float) -> np.ndarray:
        lam = self._evals
        y0 = self._evecs.T @ self.x0
        cv = self._evecs.T @ self.c
        growth = np.exp(lam * t)
        # (e^{lam t} - 1)/lam, continuous at lam = 0 where it equals t
        small = np.abs(lam) < 1e-14
        drift = np.where(small, t, np.expm1(np.where(small, 1.0, lam) * t) / np.where(small, 1.0, lam))
        return self._evecs @ (growth * y0 + drift * cv)


def stability_gap(probe: StabilityProbe, problem, step_sizes) -> float:
    """Max L2 gap between Euler iterates and the problem's exact flow.

    Checks the gap against the probe's global error bound for the realized
    horizon and maximal step; a violation raises ``StabilityBoundError``.
    The problem object must expose ``x0``, ``field(x)`` and ``exact(t)``.
    """
    steps = np.asarray(step_sizes, dtype=np.float64)
    if steps.ndim != 1 or steps.size == 0 or np.any(steps <= 0):
        raise ValueError("step_sizes must be a non-empty positive 1-D array")
    h = float(np.max(steps))
    if h > probe.max_step_h + 1e-15:
        raise ValueError(f"maximal step {h} exceeds probe.max_step_h {probe.max_step_h}")
    x = np.asarray(problem.x0, dtype=np.float64).copy()
    t = 0.0
    gap = 0.0
    for eta in steps:
        x = x + eta * problem.field(x)
        t += eta
        gap = max(gap, float(np.linalg.norm(problem.exact(t) - x)))
    bound = probe.bound(t, h)
    if gap > bound:
        raise StabilityBoundError(f"Euler gap {gap} exceeds stability bound {bound}")
    return gap
