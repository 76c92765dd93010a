"""How convergence time grows with the network, and what trimming costs.

Each node links to its 10 nearest peers and the field grows with the node
count, so density stays fixed.  Iterations to converge grow more slowly
than the node count.
"""

from calod.experiments import ExperimentConfig, run_overhead_experiment, run_scaling_experiment

scaling = run_scaling_experiment(ExperimentConfig(n_trials=10), n_values=(10, 20, 50, 100))
print("   N   mean T*   mean T*/N")
for row in scaling.aggregates["table"]:
    print(f"{row['n']:4d}  {row['mean_t_star']:8.1f}  {row['mean_rel_rate']:10.3f}")

overhead = run_overhead_experiment(ExperimentConfig(n_trials=20)).aggregates
print(f"\nvanilla mean T*/N {overhead['mean_rel_rate_vanilla']:.3f}")
print(f"robust runs that never reach the true mean's band: {overhead['robust_undefined']}/20")
print(f"iterations to settle on their own limit: vanilla "
      f"{overhead['mean_t_star_own_limit_vanilla']:.1f}, robust "
      f"{overhead['mean_t_star_own_limit_robust']:.1f}")
