"""Acceptance criteria at their stated tolerances.

Each test records a PASS/FAIL line through the ``verdict`` fixture; the
summary is printed after the session.  Shared experiment runs are cached
per module so the whole file stays within a couple of minutes on one core.
"""

import itertools
import json

import numpy as np
import pytest

from calod.consensus import ConsensusConfig, consensus_oracle, gamma_p, run_consensus
from calod.experiments import (AttackSpec, ExperimentConfig, run_convergence_demo,
                               run_overhead_experiment, run_roc_experiment,
                               run_scaling_experiment)
from calod.radiation_model import ScenarioParams, local_lod_statistic, sample_observations
from calod.topology import TopologyConfig, generate

pytestmark = pytest.mark.acceptance

ATTACK = AttackSpec(n_byzantine=1, mu_x=2.5, sigma_x2=0.1)


@pytest.fixture(scope="module")
def attack_roc():
    cfg = ExperimentConfig(n_trials=1000, attack=ATTACK, variants=("vanilla", "robust"))
    return run_roc_experiment(cfg, intensities=(0.5,))


def test_convergence_within_thirty_iterations(verdict):
    report = run_convergence_demo(ExperimentConfig(), n_runs=100)
    agg = report.aggregates
    max_err = agg["final_rel_deviation_max"]
    ok = (agg["t_star_undefined"] == 0 and agg["t_star_median"] <= 30 and max_err < 1e-3)
    verdict(1, "convergence", ok,
            f"median T*={agg['t_star_median']} (undefined {agg['t_star_undefined']}/100), "
            f"max final rel error={max_err:.2e}")


def test_matches_mean_on_random_graphs(verdict):
    rng = np.random.default_rng(20240)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 11))
        top = generate(TopologyConfig(n_nodes=n, radius=float(rng.uniform(1.2, 4.3)),
                                      max_retries=100_000), rng)
        params = ScenarioParams().with_source(pos=tuple(rng.uniform(0, 3, 2)))
        z = sample_observations(int(rng.integers(2)), top.positions, params, rng)
        f = local_lod_statistic(z, params)
        trace = run_consensus(f, top, ConsensusConfig(max_iters=500))
        target = consensus_oracle(f)
        worst = max(worst, float(np.max(np.abs(trace.final - target)) / abs(target)))
    verdict(2, "least-squares oracle", worst < 1e-6, f"worst relative error {worst:.2e}")


def _trimmed_mean(values, p):
    s = np.sort(values)
    return float(np.mean(s[p:len(s) - p]))


def test_trim_operator_properties(verdict):
    rng = np.random.default_rng(7)
    failures = []
    for case in range(10_000):
        size = int(rng.integers(1, 16))
        p = int(rng.integers(0, (size - 1) // 2 + 1))
        values = rng.normal(0, rng.choice([1e-3, 1.0, 1e3]), size)
        out = gamma_p(values, p)
        if not np.isclose(out, size * _trimmed_mean(values, p), rtol=1e-12, atol=1e-12):
            failures.append((case, "identity"))
        if gamma_p(values, 0) != float(sum(values.tolist())):
            failures.append((case, "plain sum"))
        if not np.isclose(gamma_p(rng.permutation(values), p), out, rtol=1e-12, atol=1e-12):
            failures.append((case, "permutation"))
        if p:
            hit = rng.choice(size, size=int(rng.integers(1, p + 1)), replace=False)
            pushed = values.copy()
            pushed[hit] = rng.choice([-1e300, 1e300], size=hit.size)
            rest = np.delete(values, hit)
            bounded = gamma_p(pushed, p)
            lo, hi = size * rest.min(), size * rest.max()
            slack = 1e-12 * max(abs(lo), abs(hi), 1.0)
            if not lo - slack <= bounded <= hi + slack:
                failures.append((case, "bounded influence"))
    verdict(3, "trim operator", not failures,
            f"{len(failures)} violations in 10^4 cases" + (f", first {failures[0]}" if failures else ""))


def test_lod_close_to_clairvoyant(verdict):
    report = run_roc_experiment(ExperimentConfig(n_trials=1000), intensities=(0.1, 0.5))
    roc = report.aggregates["roc"]
    parts, ok = [], True
    for key in ("0.1", "0.5"):
        lod, lrt = roc[f"vanilla_{key}"]["auc"], roc[f"clairvoyant_{key}"]["auc"]
        ok &= lod >= lrt - 0.05
        parts.append(f"I_s={key}: AUC {lod:.3f} vs clairvoyant {lrt:.3f} (gap {lrt - lod:.3f})")
    ok &= roc["vanilla_0.5"]["auc"] > roc["vanilla_0.1"]["auc"]
    verdict(4, "LOD vs clairvoyant", ok, "; ".join(parts))


def test_vanilla_breaks_under_attack(verdict, attack_roc):
    demo = run_convergence_demo(ExperimentConfig(attack=ATTACK), n_runs=100)
    ratios = [r["final_deviation"] / r["baseline_deviation"] if r["baseline_deviation"] else np.inf
              for r in demo.records]
    auc = attack_roc.aggregates["roc"]["vanilla_0.5"]["auc"]
    ok = min(ratios) > 10 and auc <= 0.60
    verdict(5, "attack susceptibility", ok,
            f"min deviation ratio {min(ratios):.3g} over 100 runs, vanilla AUC {auc:.3f}")


def test_robust_variant_resists_attack(verdict, attack_roc):
    rows = attack_roc.records
    within = np.mean([r["robust_rel_deviation"] <= 0.10 for r in rows])
    roc = attack_roc.aggregates["roc"]
    gain = roc["robust_0.5"]["auc"] - roc["vanilla_0.5"]["auc"]
    ok = within >= 0.95 and gain >= 0.15
    verdict(6, "robustness", ok,
            f"within 10% of oracle in {within:.1%} of runs, AUC gain {gain:.3f}")


def test_scaling_with_network_size(verdict):
    report = run_scaling_experiment(ExperimentConfig(n_trials=50), n_values=(10, 20, 50, 100))
    table = report.aggregates["table"]
    t = [row["mean_t_star"] for row in table]
    rate = [row["mean_rel_rate"] for row in table]
    undefined = sum(row["t_star_undefined"] for row in table)
    ok = (undefined == 0 and all(a <= b for a, b in zip(t, t[1:])) and rate[-1] < rate[0])
    verdict(7, "scaling", ok,
            "mean T* " + ", ".join(f"{v:.1f}" for v in t)
            + "; mean T*/N " + ", ".join(f"{v:.3f}" for v in rate)
            + f"; undefined {undefined}")


def test_robust_overhead_is_small(verdict):
    agg = run_overhead_experiment(ExperimentConfig(n_trials=100)).aggregates
    rel = agg["relative_overhead"]
    ok = rel is not None and 0.0 <= rel <= 0.25
    verdict(8, "robust overhead", ok,
            f"relative overhead {rel}; robust runs never inside the band: "
            f"{agg['robust_undefined']}/100; vanilla: {agg['vanilla_undefined']}/100")


def _strip_time(text):
    doc = json.loads(text)
    doc["provenance"].pop("timestamp", None)
    return doc


def test_reruns_are_byte_identical(verdict, tmp_path):
    cfg = ExperimentConfig(n_trials=20, attack=ATTACK, variants=("vanilla", "robust"),
                           master_seed=99)
    runs = {
        "converge": lambda c: run_convergence_demo(c, n_runs=3),
        "roc": lambda c: run_roc_experiment(c, intensities=(0.1, 0.5)),
        "scaling": lambda c: run_scaling_experiment(c.replace(n_trials=3), n_values=(10, 20)),
        "overhead": run_overhead_experiment,
    }
    mismatched = []
    for (name, fn), pass_no in itertools.product(runs.items(), (0, 1)):
        fn(cfg).write(tmp_path / f"{name}-{pass_no}")
    for name in runs:
        a, b = tmp_path / f"{name}-0", tmp_path / f"{name}-1"
        for csv in sorted(a.glob("*.csv")):
            if csv.read_bytes() != (b / csv.name).read_bytes():
                mismatched.append(f"{name}/{csv.name}")
        if _strip_time((a / "report.json").read_text()) != _strip_time((b / "report.json").read_text()):
            mismatched.append(f"{name}/report.json")
    verdict(9, "determinism", not mismatched,
            "all outputs identical" if not mismatched else f"differs: {mismatched}")
