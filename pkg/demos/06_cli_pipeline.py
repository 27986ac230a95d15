#!/usr/bin/env python3
"""Drive the complete command-line pipeline in a scratch directory.

simulate -> split -> metric (learned) -> train -> audit, with every
command configured through a JSON document.  Exit code 0 means the audit
failed to reject fairness, 3 means it rejected, 10 means an operational
error; pipelines can branch on this.
"""

import json
import tempfile
from pathlib import Path

from fairaudit import cli

root = Path(tempfile.mkdtemp(prefix="fairaudit-demo-"))
print(f"working in {root}")


def run(command, **config):
    cfg = root / f"{command}-config.json"
    cfg.write_text(json.dumps(config, indent=2))
    code = cli.main([command, "--config", str(cfg)])
    print(f"  $ fairaudit {command} --config {cfg.name}  ->  exit {code}")
    return code


print("\n1. generate synthetic audit data")
run("simulate", n_samples=600, seed=11, data_output=str(root / "data.csv"))

print("\n2. split into disjoint train / audit files (independence by construction)")
run(
    "split",
    input=str(root / "data.csv"),
    train_output=str(root / "train.csv"),
    audit_output=str(root / "audit.csv"),
    train_fraction=0.7,
    seed=0,
)

print("\n3. learn the fair metric from the audit split")
run(
    "metric",
    data=str(root / "audit.csv"),
    label_column="label",
    protected_columns=["group"],
    standardize=False,
    metric_output=str(root / "metric.json"),
)

print("\n4. train a classifier on the train split")
run(
    "train",
    data=str(root / "train.csv"),
    label_column="label",
    protected_columns=["group"],
    standardize=False,
    num_steps=3000,
    model_output=str(root / "model.json"),
)

print("\n5. audit it on the held-out split")
code = run(
    "audit",
    model=str(root / "model.json"),
    metric=str(root / "metric.json"),
    data=str(root / "audit.csv"),
    label_column="label",
    protected_columns=["group"],
    report_output=str(root / "report.json"),
    samples_output=str(root / "samples.csv"),
)

report = json.loads((root / "report.json").read_text())
print("\nreport summary:")
for key in ("n", "s_n", "v_n", "t_n", "ci_lo", "ci_hi", "alpha", "delta", "reject"):
    print(f"  {key:6s} = {report[key]}")
print(f"  error_rate = {report['error_rate']}")
print(f"\nverdict: {'REJECTED' if code == 3 else 'not rejected'} (exit code {code})")
