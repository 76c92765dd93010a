"""Detection performance as ROC curves.

Runs alternating H0/H1 trials, reads the consensus value at one honest
node, and compares against the clairvoyant detector that knows where the
source is.  A second pass adds a Byzantine node.  Use more trials for
smoother curves; 200 keeps this under a minute.
"""

from calod.experiments import AttackSpec, ExperimentConfig, run_roc_experiment

clean = run_roc_experiment(ExperimentConfig(n_trials=200), intensities=(0.1, 0.5))
for key, row in sorted(clean.aggregates["roc"].items()):
    print(f"{key:18s} AUC {row['auc']:.3f}  min error {row['min_error_probability']:.3f}")

attacked = run_roc_experiment(
    ExperimentConfig(n_trials=200, attack=AttackSpec(mu_x=2.5), variants=("vanilla", "robust")),
    intensities=(0.5,))
print("\nwith one Byzantine node:")
for key, row in sorted(attacked.aggregates["roc"].items()):
    print(f"{key:18s} AUC {row['auc']:.3f}")

print("\nfirst rows of one curve:")
print("\n".join(attacked.artifacts["roc_robust_0.5.csv"].splitlines()[:5]))
