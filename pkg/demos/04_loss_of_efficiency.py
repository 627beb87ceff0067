"""
Price of protection without an attack
=====================================

With no jamming and no process noise the posterior Cramer-Rao bound is the
best any tracker can do. A short Monte Carlo run compares the three RFS
trackers against it; the command-line ``loe`` verb does the same at full
scale.
"""
import numpy as np

from rgpo_rfs.cli import ExperimentConfig, run_experiment

exp = ExperimentConfig(scenario=1, trackers=("adaptive", "nonadaptive", "naive"), n_runs=10)
tab = run_experiment(exp, loe=True)

print("  k   pcrb " + " ".join(f"{n:>12s}" for n in tab.trackers))
for i in range(0, len(tab.steps), 10):
    print(f"{tab.steps[i]:3d} {tab.pcrb[i]:6.2f} " + " ".join(f"{tab.rmse[n][i]:12.2f}" for n in tab.trackers))
