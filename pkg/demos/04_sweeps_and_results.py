"""Run a small seeded sweep end-to-end and peek at the results files.

This is the same machinery the CLI drives; everything is derived from the
master seed, so rerunning reproduces the CSV byte for byte.
Run with: python demos/04_sweeps_and_results.py
"""

import csv
import json
from collections import defaultdict
from pathlib import Path

from causalstack.experiment import ExperimentConfig, run_generalization_sweep
from causalstack.training import TrainConfig

out = Path("demo_results")
cfg = ExperimentConfig(
    graph="er", density=1.0, n=6, k=6,
    train_sizes=(100, 1000),
    models=("pseudo_ll", "exp_causal", "exp_skeleton", "bound_zero_shot"),
    seeds=(0, 1, 2),
    master_seed=42,
    test_interventions=10, test_samples=300,
    train=TrainConfig(lr=1e-2, iterations=500, batch_size=256),
    output_dir=str(out),
)

csv_path, manifest_path = run_generalization_sweep(cfg)
print("wrote", csv_path, "and", manifest_path, "\n")

rows = list(csv.DictReader(csv_path.open()))
by_cell = defaultdict(list)
for row in rows:
    if row["metric"] == "nll_mean":
        by_cell[(row["model"], row["train_samples"])].append(float(row["value"]))

print(f"{'model':18s} {'train':>6s} {'nll_mean (mean over seeds)':>28s}")
for (model, train), vals in sorted(by_cell.items()):
    label = train if train else "-"
    print(f"{model:18s} {label:>6s} {sum(vals) / len(vals):28.3f}")

manifest = json.loads(manifest_path.read_text())
print("\nmanifest keys:", sorted(manifest))
print("true adjacency for seed 0:", manifest["graphs"]["0"])
print("\nLow-data column: the causal mask wins. High-data column: everyone")
print("closes in on the bound, and the structure advantage shrinks.")
