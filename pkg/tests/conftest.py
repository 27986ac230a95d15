"""Session-scoped fixtures for the expensive shared artifacts."""

import numpy as np
import pytest

from fairaudit import attack, sim
from fairaudit.fair_metric import rotated_coordinate_metric
from fairaudit.models import LogisticModel


@pytest.fixture(scope="session")
def sim_dataset():
    """The default synthetic draw used across the suite."""
    return sim.generate(sim.SimConfig(seed=7))


@pytest.fixture(scope="session")
def true_metric():
    return rotated_coordinate_metric(0.0)


@pytest.fixture(scope="session")
def default_sweep(sim_dataset, true_metric):
    """Full 21x21 coefficient sweep under the correct metric (the slow fixture)."""
    return sim.sweep_heatmap(
        sim_dataset.features,
        sim_dataset.labels,
        sim.GridSpec.default(),
        true_metric,
        attack.sim_preset(),
        alpha=0.05,
        delta=1.25,
    )


SYMMETRY_W1 = (0.8, 2.0, 4.0)
SYMMETRY_W2 = (-2.0, 0.0, 2.0)


def _signed_grid():
    w1 = sorted({s * v for v in SYMMETRY_W1 for s in (1.0, -1.0)})
    return sim.GridSpec(w1_values=tuple(w1), w2_values=SYMMETRY_W2)


@pytest.fixture(scope="session")
def symmetric_sweep_large(true_metric):
    """Small +-theta1 grid on a large draw from the group-balanced generator.

    With equal group weights the generator is exactly exchangeable under
    (x1, g) -> (-x1, 1-g), so the +-theta1 statistics differ only by
    finite-sample noise, which n = 4000 keeps below a few percent.
    """
    ds = sim.generate(sim.SimConfig(seed=11, minority_prob=0.5, n_samples=4000))
    cells = sim.sweep_heatmap(ds.features, ds.labels, _signed_grid(), true_metric, attack.sim_preset())
    return {(c.theta1, c.theta2): c.t_n for c in cells}


@pytest.fixture(scope="session")
def mirror_sweep_pair(true_metric):
    """The same small grid evaluated on a draw and on its reflection.

    Reflecting features through x1 -> -x1 while swapping the group bit maps
    the generator onto itself, so theta1 and -theta1 must give exactly
    equal statistics across the two datasets.
    """
    ds = sim.generate(sim.SimConfig(seed=11, minority_prob=0.5))
    mirrored = ds.features.copy()
    mirrored[:, 0] *= -1.0
    grid = _signed_grid()
    orig = sim.sweep_heatmap(ds.features, ds.labels, grid, true_metric, attack.sim_preset())
    refl = sim.sweep_heatmap(mirrored, ds.labels, grid, true_metric, attack.sim_preset())
    return (
        {(c.theta1, c.theta2): c.t_n for c in orig},
        {(c.theta1, c.theta2): c.t_n for c in refl},
    )


@pytest.fixture(scope="session")
def unfair_sim_model(sim_dataset):
    """Strongly coordinate-1-dependent classifier with its fitted intercept."""
    b = sim.fit_bias(sim_dataset.features, sim_dataset.labels, 4.0, 0.0)
    return LogisticModel(weights=np.array([4.0, 0.0]), bias=b)
