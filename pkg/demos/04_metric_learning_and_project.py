#!/usr/bin/env python3
"""Learn a sensitive-subspace fair metric and compare Baseline vs Project.

The metric is learned by regressing each protected attribute on the
features and projecting out the span of the regression weights.  The
"Project" training variant applies that projector to every input, which
is the simplest way to stop a model from using sensitive variation.
Both models are audited with the learned metric, and group-fairness
summaries (balanced accuracy, average odds difference) are reported.
"""

import numpy as np

from fairaudit import TrainConfig, audit, audit_preset, train
from fairaudit.dataset import Dataset
from fairaudit.fair_metric import SubspaceSpec, learn_sensitive_metric
from fairaudit.sim import average_odds_difference, balanced_accuracy

rng = np.random.default_rng(42)
n = 2000

# Features: the first two directions carry the protected signal, the rest
# carry the legitimate signal the label actually depends on.
x = rng.normal(size=(n, 5))
protected = (x[:, 0] + 0.5 * x[:, 1] + 0.3 * rng.normal(size=n) > 0).astype(int)
labels = ((x[:, 2] - 0.5 * x[:, 3] + 0.8 * (2 * protected - 1) + 0.5 * rng.normal(size=n)) > 0).astype(int)

half = n // 2
train_ds = Dataset(
    feature_names=tuple("abcde"),
    features=x[:half],
    labels=labels[:half],
    protected={"grp": protected[:half]},
)
audit_ds = Dataset(
    feature_names=tuple("abcde"),
    features=x[half:],
    labels=labels[half:],
    protected={"grp": protected[half:]},
)

metric = learn_sensitive_metric(audit_ds, SubspaceSpec(("grp",)))
print("learned metric:: projector rank %.0f of %d" % (np.trace(metric.sigma), metric.dim))

cfg = TrainConfig(learning_rate=0.3, batch_size=128, num_steps=4000, class_reweight=True, seed=0, hidden_units=16)
baseline = train(train_ds.features, train_ds.labels, "mlp", cfg)
project_cfg = TrainConfig(
    learning_rate=0.3,
    batch_size=128,
    num_steps=4000,
    class_reweight=True,
    seed=0,
    hidden_units=16,
    preprocess_projector=metric.sigma,
)
project = train(train_ds.features, train_ds.labels, "mlp", project_cfg)

for name, model in [("Baseline", baseline), ("Project", project)]:
    preds = (model.predict_proba(audit_ds.features) >= 0.5).astype(int)
    bal = balanced_accuracy(audit_ds.labels, preds)
    aod = average_odds_difference(audit_ds.labels, preds, audit_ds.protected["grp"])
    report = audit(model, metric, audit_preset(), audit_ds.features, audit_ds.labels)
    verdict = "REJECT" if report.reject else "accept"
    print()
    print(f"== {name}")
    print(f"   balanced accuracy     : {bal:.3f}")
    print(f"   average odds difference: {aod:+.3f}")
    print(f"   audit: S_n={report.s_n:.3f}  T_n={report.t_n:.3f}  -> {verdict} individual fairness")

print()
print("Projecting out the sensitive span removes the attack surface the")
print("metric measures (at some cost in accuracy when, as here, the label")
print("genuinely depends on group).")
