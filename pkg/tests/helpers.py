"""Independent oracle implementations shared across test modules.

Everything here deliberately avoids the library's own code paths: pure
Python floats, scalar math, and brute-force search, so library bugs cannot
cancel out in the comparisons.
"""

import math

LOSS_P_FLOOR = 1e-12


def reference_normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def bisect_normal_quantile(p: float, lo: float = -10.0, hi: float = 10.0) -> float:
    """Invert the erf-series CDF by bisection to ~1e-13."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if reference_normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def reference_clamped_loss(logit: float, y: float) -> float:
    u = (1.0 - 2.0 * y) * logit
    raw = max(u, 0.0) + math.log1p(math.exp(-abs(u)))
    floor = -math.log1p(-LOSS_P_FLOOR)
    cap = -math.log(LOSS_P_FLOOR)
    return min(max(raw, floor), cap)


def reference_euler_loss_ratio(weights, bias, sigma, lam, step_sizes, x0, y):
    """Scalar re-implementation of the Euler attack for a logistic model.

    Returns (x_final, loss_ratio) using plain Python arithmetic.
    """
    d = len(x0)
    x = [float(v) for v in x0]
    x_start = list(x)

    def logit_at(pt):
        return bias + sum(w * v for w, v in zip(weights, pt))

    for eta in step_sizes:
        z = logit_at(x)
        p = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
        grad_loss = [(p - y) * w for w in weights]
        diff = [x[i] - x_start[i] for i in range(d)]
        grad_pen = [2.0 * sum(sigma[i][j] * diff[j] for j in range(d)) for i in range(d)]
        x = [x[i] + eta * (grad_loss[i] - lam * grad_pen[i]) for i in range(d)]
    ratio = reference_clamped_loss(logit_at(x), y) / reference_clamped_loss(logit_at(x_start), y)
    return x, ratio


def reference_mean_sd(values):
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)
