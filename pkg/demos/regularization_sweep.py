"""Concentration error of the regularized adjacency across tau on a sparse
block model, for data-driven weights, oracle truncation and no regularization.

Run with: python3 demos/regularization_sweep.py
"""
from bispectral.experiments import ExperimentConfig, run_experiment, summarize

cfg = ExperimentConfig("fig2_concentration_vs_tau", grid=[1.0, 1.5, 2.0, 3.0], replicates=2, n0=200)
records = run_experiment(cfg)
for row in summarize(records):
    if row["metric"] == "rel_err":
        print(f"tau={row['tau']:>4s} {row['mode']:8s} relative error {float(row['mean']):.3f}")
