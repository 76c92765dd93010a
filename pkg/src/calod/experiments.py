"""
Monte-Carlo experiment drivers.

Each driver takes an :class:`ExperimentConfig`, simulates independent trials
and returns an :class:`ExperimentReport` holding per-trial records, aggregate
tables and CSV artifacts.  Trial ``t`` of an experiment draws all of its
randomness from a stream keyed by ``(master_seed, tag, t)``, so changing the
number of trials never changes the earlier ones, and different variants or
source intensities evaluated on the same trial see the same scene.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import platform
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from calod import __version__
from calod.consensus import (AttackConfig, ConsensusConfig, ConvergenceTrace,
                             consensus_oracle, run_consensus)
from calod.metrics import (empirical_roc, iterations_to_within,
                           relative_convergence_rate)
from calod.radiation_model import (Hypothesis, ScenarioParams, clairvoyant_lrt,
                                   local_lod_statistic, sample_observations)
from calod.topology import Topology, TopologyConfig, generate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackSpec:
    """Attack as configured for an experiment.

    When `byzantine_ids` is None, `n_byzantine` nodes are picked uniformly at
    random in every trial.
    """

    n_byzantine: int = 1
    mu_x: float = 1.5
    sigma_x2: float = 0.1
    byzantine_ids: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.n_byzantine < 0:
            raise ValueError("n_byzantine must be >= 0")
        if not self.sigma_x2 >= 0:
            raise ValueError("sigma_x2 must be >= 0")
        if self.byzantine_ids is not None:
            object.__setattr__(self, "byzantine_ids",
                               tuple(sorted(set(int(i) for i in self.byzantine_ids))))


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioParams = ScenarioParams()
    topology: TopologyConfig = TopologyConfig()
    consensus: ConsensusConfig = ConsensusConfig()
    attack: Optional[AttackSpec] = None
    n_trials: int = 1000
    master_seed: int = 0
    output_dir: Optional[str] = None
    hypothesis: str = "H1"
    freeze_nodes: bool = False
    freeze_source: bool = False
    freeze_byzantine: bool = False
    fraction: float = 0.95
    intensities: tuple[float, ...] = (0.1, 0.5)
    variants: tuple[str, ...] = ("vanilla",)
    n_values: tuple[int, ...] = (10, 20, 50, 100)
    scaling_k: int = 10
    scaling_constant_density: bool = True
    scaling_max_iters: int = 3000
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.hypothesis not in ("H0", "H1"):
            raise ValueError(f"hypothesis must be 'H0' or 'H1', got {self.hypothesis!r}")
        for v in self.variants:
            if v not in ("vanilla", "robust"):
                raise ValueError(f"unknown variant {v!r}")
        if not 0 < self.fraction < 1:
            raise ValueError("fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return _jsonable(dataclasses.asdict(self))

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


_SECTIONS = {"scenario": ScenarioParams, "topology": TopologyConfig,
             "consensus": ConsensusConfig, "attack": AttackSpec}


def config_from_dict(doc: Optional[dict]) -> ExperimentConfig:
    """Build a config from a nested mapping; missing keys keep their defaults."""
    doc = dict(doc or {})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _SECTIONS:
            if value is None:
                kwargs[key] = None
                continue
            cls = _SECTIONS[key]
            fields = {f.name for f in dataclasses.fields(cls)}
            bad = set(value) - fields
            if bad:
                raise ValueError(f"unknown keys in [{key}]: {sorted(bad)}")
            value = dict(value)
            for name in ("source_pos", "byzantine_ids"):
                if value.get(name) is not None:
                    value[name] = tuple(value[name])
            kwargs[key] = cls(**value)
        elif key in ("intensities", "variants", "n_values"):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    """Read a YAML (or JSON) config document."""
    import yaml

    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    with path.open() as fh:
        doc = yaml.safe_load(fh)
    return config_from_dict(doc)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass
class ExperimentReport:
    """Result of one experiment.

    `artifacts` maps output file names to their full text; :meth:`write`
    puts them, plus ``report.json``, into a directory.
    """

    name: str
    config: ExperimentConfig
    records: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)

    def provenance(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "master_seed": self.config.master_seed,
            "version": f"calod {__version__}",
            "numpy": np.__version__,
            "python": platform.python_version(),
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }

    def to_dict(self) -> dict:
        return {
            "experiment": self.name,
            "aggregates": _jsonable(self.aggregates),
            "records": _jsonable(self.records),
            "files": sorted(self.artifacts) + ["report.json"],
            "provenance": self.provenance(),
        }

    def write(self, output_dir=None) -> Path:
        out = Path(output_dir or self.config.output_dir or f"out/{self.name}")
        out.mkdir(parents=True, exist_ok=True)
        for fname, text in sorted(self.artifacts.items()):
            with (out / fname).open("w", newline="") as fh:
                fh.write(text)
        with (out / "report.json").open("w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True, allow_nan=False)
            fh.write("\n")
        self.files = [str(out / f) for f in sorted(self.artifacts)] + [str(out / "report.json")]
        return out


def trial_seed(master_seed: int, tag: str, trial: int) -> np.random.SeedSequence:
    """Seed sequence for one trial; independent of how many trials are run."""
    return np.random.SeedSequence(master_seed, spawn_key=(zlib.crc32(tag.encode()), trial))


@dataclass
class Scene:
    """Everything drawn for one trial before consensus starts."""

    topology: Topology
    params: ScenarioParams
    hypothesis: Hypothesis
    z: np.ndarray
    f_local: np.ndarray
    attack: Optional[AttackConfig]
    attack_seed: np.random.SeedSequence

    def attack_rng(self) -> np.random.Generator:
        # a fresh generator per run keeps falsification noise identical across variants
        return np.random.default_rng(self.attack_seed)


def _required_min_degree(cfg: ExperimentConfig, variants: Sequence[str]) -> int:
    need = cfg.topology.min_degree
    if "robust" in variants or cfg.consensus.variant == "robust":
        need = max(need, 2 * cfg.consensus.p + 1)
    return need


def draw_scene(cfg: ExperimentConfig, tag: str, trial: int, hypothesis: Hypothesis,
               topology_config: Optional[TopologyConfig] = None,
               intensity: Optional[float] = None) -> Scene:
    """Draw the topology, source, observations and attackers of one trial."""
    topo_cfg = topology_config or cfg.topology
    s_topo, s_source, s_obs, s_byz, s_attack = trial_seed(cfg.master_seed, tag, trial).spawn(5)
    frozen = trial_seed(cfg.master_seed, "frozen-scene", 0).spawn(3)

    top = generate(topo_cfg, np.random.default_rng(frozen[0] if cfg.freeze_nodes else s_topo))
    if cfg.freeze_source:
        src = cfg.scenario.source_pos
    else:
        src = tuple(np.random.default_rng(s_source).uniform(0.0, topo_cfg.region, size=2))
    params = cfg.scenario.with_source(pos=src, intensity=intensity)
    z = sample_observations(hypothesis, top.positions, params, np.random.default_rng(s_obs))

    attack = None
    spec = cfg.attack
    if spec is not None and (spec.byzantine_ids or spec.n_byzantine > 0):
        if spec.byzantine_ids is not None:
            ids = spec.byzantine_ids
        else:
            if spec.n_byzantine >= top.n_nodes:
                raise ValueError("n_byzantine must leave at least one honest node")
            byz_rng = np.random.default_rng(frozen[1] if cfg.freeze_byzantine else s_byz)
            ids = tuple(int(i) for i in byz_rng.choice(top.n_nodes, spec.n_byzantine, replace=False))
        attack = AttackConfig(byzantine_ids=ids, mu_x=spec.mu_x, sigma_x2=spec.sigma_x2)
    return Scene(top, params, Hypothesis(hypothesis), z, local_lod_statistic(z, params),
                 attack, s_attack)


def run_scene(scene: Scene, consensus: ConsensusConfig, with_attack: bool = True) -> ConvergenceTrace:
    attack = scene.attack if with_attack else None
    return run_consensus(scene.f_local, scene.topology, consensus, attack,
                         scene.attack_rng() if attack is not None else None)


def designated_node(trace: ConvergenceTrace) -> int:
    """Lowest-index honest node; its final state is the network's score."""
    return int(np.flatnonzero(trace.honest_mask)[0])


def relative_deviation(trace: ConvergenceTrace) -> float:
    target = trace.target
    dev = trace.honest_deviation()
    if target == 0:
        return 0.0 if dev == 0 else float("inf")
    return dev / abs(target)


def _map_trials(fn: Callable, args: list, n_jobs: int) -> list:
    if n_jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * n_jobs))))
    return [fn(a) for a in args]


def _mean_or_none(values) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _csv(header: Sequence[str], rows) -> str:
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- convergence

def _convergence_trial(job):
    cfg, trial = job
    scene = draw_scene(cfg, "converge", trial, Hypothesis[cfg.hypothesis], _topology_for(cfg, ()))
    trace = run_scene(scene, cfg.consensus)
    target = trace.target
    t_star = iterations_to_within(trace, target, cfg.fraction)
    rec = {
        "trial": trial,
        "n_nodes": trace.n_nodes,
        "byzantine_ids": list(scene.attack.byzantine_ids) if scene.attack else [],
        "target": target,
        "t_star": t_star,
        "rel_rate": relative_convergence_rate(t_star, trace.n_nodes),
        "final_deviation": trace.honest_deviation(),
        "final_rel_deviation": relative_deviation(trace),
    }
    if scene.attack is not None:
        base = run_scene(scene, cfg.consensus, with_attack=False)
        rec["baseline_deviation"] = base.honest_deviation()
        rec["baseline_rel_deviation"] = relative_deviation(base)
    return rec, (trace if trial == 0 else None)


def _topology_for(cfg: ExperimentConfig, variants: Sequence[str]) -> TopologyConfig:
    need = _required_min_degree(cfg, variants)
    if need == cfg.topology.min_degree:
        return cfg.topology
    return dataclasses.replace(cfg.topology, min_degree=need)


def run_convergence_demo(cfg: ExperimentConfig, n_runs: int = 1) -> ExperimentReport:
    """Consensus runs of the configured variant/attack on fresh scenes.

    The full trace of run 0 is written to ``trace.csv``; every run records
    ``T*``, the final honest deviation from the oracle and, under attack,
    the deviation of the same scene without the attack.
    """
    results = _map_trials(_convergence_trial, [(cfg, t) for t in range(n_runs)], cfg.n_jobs)
    records = [r for r, _ in results]
    trace = results[0][1]
    t_stars = [r["t_star"] for r in records]
    agg = {
        "n_runs": n_runs,
        "variant": cfg.consensus.variant,
        "attack": dataclasses.asdict(cfg.attack) if cfg.attack else None,
        "t_star_median": (float(np.median([t for t in t_stars if t is not None]))
                          if any(t is not None for t in t_stars) else None),
        "t_star_undefined": sum(t is None for t in t_stars),
        "final_rel_deviation_max": float(max(r["final_rel_deviation"] for r in records)),
        "final_rel_deviation_median": float(np.median([r["final_rel_deviation"] for r in records])),
    }
    if cfg.attack is not None:
        agg["baseline_rel_deviation_median"] = float(
            np.median([r["baseline_rel_deviation"] for r in records]))
    report = ExperimentReport("converge", cfg, records, agg)
    report.artifacts["trace.csv"] = trace.to_csv()
    return report


# ------------------------------------------------------------------------ roc

def _roc_trial(job):
    cfg, trial, intensities, variants = job
    hyp = Hypothesis.H0 if trial % 2 == 0 else Hypothesis.H1
    topo_cfg = _topology_for(cfg, variants)
    out = []
    for intensity in intensities:
        scene = draw_scene(cfg, "roc", trial, hyp, topo_cfg, intensity=intensity)
        rec = {"trial": trial, "intensity": intensity, "hypothesis": hyp.name,
               "target": consensus_oracle(scene.f_local),
               "clairvoyant": clairvoyant_lrt(scene.z, scene.topology.positions, scene.params)}
        for variant in variants:
            consensus = dataclasses.replace(cfg.consensus, variant=variant)
            trace = run_scene(scene, consensus)
            rec[variant] = float(trace.final[designated_node(trace)])
            rec[f"{variant}_rel_deviation"] = relative_deviation(trace)
        out.append(rec)
    return out


def _fmt_intensity(x: float) -> str:
    return repr(float(x))


def run_roc_experiment(cfg: ExperimentConfig, intensities: Optional[Sequence[float]] = None,
                       variants: Optional[Sequence[str]] = None) -> ExperimentReport:
    """Steady-state ROC of every ADMM variant plus the clairvoyant LRT baseline.

    Trials alternate H0/H1 (even trials are H0).  Each trial draws a fresh
    scene unless frozen in the config; the scene is shared by all variants
    and intensities of that trial.
    """
    intensities = tuple(cfg.intensities if intensities is None else intensities)
    variants = tuple(cfg.variants if variants is None else variants)
    jobs = [(cfg, t, intensities, variants) for t in range(cfg.n_trials)]
    records = [r for batch in _map_trials(_roc_trial, jobs, cfg.n_jobs) for r in batch]
    records.sort(key=lambda r: (intensities.index(r["intensity"]), r["trial"]))

    report = ExperimentReport("roc", cfg, records)
    aucs: dict = {}
    for intensity in intensities:
        rows = [r for r in records if r["intensity"] == intensity]
        for name in variants + ("clairvoyant",):
            h0 = [r[name] for r in rows if r["hypothesis"] == "H0"]
            h1 = [r[name] for r in rows if r["hypothesis"] == "H1"]
            if not h0 or not h1:
                raise ValueError("the ROC experiment needs at least two trials (one per hypothesis)")
            roc = empirical_roc(h0, h1)
            key = f"{name}_{_fmt_intensity(intensity)}"
            aucs[key] = {"auc": roc.auc, "min_error_probability": roc.min_error_probability(),
                         "n_h0": roc.n_h0, "n_h1": roc.n_h1}
            report.artifacts[f"roc_{key}.csv"] = roc.to_csv()
    report.aggregates = {"n_trials": cfg.n_trials, "intensities": list(intensities),
                         "variants": list(variants), "roc": aucs}
    return report


# -------------------------------------------------------------------- scaling

def _scaling_trial(job):
    cfg, n, trial = job
    k = min(cfg.scaling_k, n - 1)
    base = _topology_for(cfg, ())
    region = base.region
    if cfg.scaling_constant_density:
        # configured region holds the first network size; keep that node density
        region = base.region * float(np.sqrt(n / cfg.n_values[0]))
    topo_cfg = dataclasses.replace(base, n_nodes=n, kind="k_nearest", k=k, region=region)
    scene = draw_scene(cfg, f"scaling-{n}", trial, Hypothesis[cfg.hypothesis], topo_cfg)
    # large networks need more than the steady-state budget; stop once settled
    tol = cfg.consensus.tol if cfg.consensus.tol is not None else 1e-12
    consensus = dataclasses.replace(cfg.consensus, max_iters=cfg.scaling_max_iters, tol=tol)
    trace = run_scene(scene, consensus)
    t_star = iterations_to_within(trace, trace.target, cfg.fraction)
    return {"n": n, "trial": trial, "k": k, "region": region,
            "mean_degree": float(scene.topology.degrees.mean()),
            "min_degree": int(scene.topology.degrees.min()), "t_star": t_star,
            "rel_rate": relative_convergence_rate(t_star, n)}


def run_scaling_experiment(cfg: ExperimentConfig,
                           n_values: Optional[Sequence[int]] = None) -> ExperimentReport:
    """Mean ``T*`` and ``T*/N`` against network size on bounded-degree graphs.

    Each node links to its ``scaling_k`` nearest nodes (capped at N - 1),
    symmetrized.  With ``scaling_constant_density`` the region side grows as
    ``sqrt(N)`` so the node density stays that of the smallest network.
    """
    n_values = tuple(cfg.n_values if n_values is None else n_values)
    if not n_values or list(n_values) != sorted(n_values):
        raise ValueError("n_values must be a non-empty ascending list")
    cfg = cfg.replace(n_values=n_values)
    jobs = [(cfg, n, t) for n in n_values for t in range(cfg.n_trials)]
    records = _map_trials(_scaling_trial, jobs, cfg.n_jobs)
    table = []
    for n in n_values:
        rows = [r for r in records if r["n"] == n]
        table.append({
            "n": n,
            "mean_t_star": _mean_or_none(r["t_star"] for r in rows),
            "mean_rel_rate": _mean_or_none(r["rel_rate"] for r in rows),
            "t_star_undefined": sum(r["t_star"] is None for r in rows),
            "mean_degree": float(np.mean([r["mean_degree"] for r in rows])),
        })
    report = ExperimentReport("scaling", cfg, records, {"variant": cfg.consensus.variant,
                                                        "table": table})
    report.artifacts["scaling.csv"] = _csv(
        ["n", "trial", "t_star", "rel_rate"],
        [(r["n"], r["trial"], r["t_star"], r["rel_rate"]) for r in records])
    return report


# ------------------------------------------------------------------- overhead

def _own_limit_t_star(trace: ConvergenceTrace, fraction: float) -> Optional[int]:
    """T* measured against the value the run itself settles on."""
    limit = float(np.mean(trace.final[trace.honest_mask]))
    return iterations_to_within(trace, limit, fraction)


def _overhead_trial(job):
    cfg, trial = job
    topo_cfg = _topology_for(cfg, ("robust",))
    scene = draw_scene(cfg, "overhead", trial, Hypothesis[cfg.hypothesis], topo_cfg)
    out = []
    for variant in ("vanilla", "robust"):
        trace = run_scene(scene, dataclasses.replace(cfg.consensus, variant=variant),
                          with_attack=False)
        t_star = iterations_to_within(trace, trace.target, cfg.fraction)
        out.append({"seed": trial, "variant": variant, "t_star": t_star,
                    "rel_rate": relative_convergence_rate(t_star, trace.n_nodes),
                    "final_rel_deviation": relative_deviation(trace),
                    "t_star_own_limit": _own_limit_t_star(trace, cfg.fraction)})
    return out


def run_overhead_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Paired attack-free comparison of vanilla and robust ADMM convergence.

    Both variants run on the same scene for every trial.  The overhead is
    the mean paired difference of ``T*/N`` relative to the vanilla mean; it
    is undefined when some run never settles inside the band.
    """
    cfg = cfg.replace(attack=None)
    jobs = [(cfg, t) for t in range(cfg.n_trials)]
    records = [r for pair in _map_trials(_overhead_trial, jobs, cfg.n_jobs) for r in pair]
    van = [r for r in records if r["variant"] == "vanilla"]
    rob = [r for r in records if r["variant"] == "robust"]
    complete = [(a["rel_rate"], b["rel_rate"]) for a, b in zip(van, rob)
                if a["rel_rate"] is not None and b["rel_rate"] is not None]
    agg = {
        "p": cfg.consensus.p,
        "n_pairs": len(van),
        "n_complete_pairs": len(complete),
        "vanilla_undefined": sum(r["t_star"] is None for r in van),
        "robust_undefined": sum(r["t_star"] is None for r in rob),
        "mean_rel_rate_vanilla": _mean_or_none(r["rel_rate"] for r in van),
        "mean_rel_rate_robust": _mean_or_none(r["rel_rate"] for r in rob),
        "robust_final_rel_deviation_median": float(np.median([r["final_rel_deviation"] for r in rob])),
        "mean_t_star_own_limit_vanilla": _mean_or_none(r["t_star_own_limit"] for r in van),
        "mean_t_star_own_limit_robust": _mean_or_none(r["t_star_own_limit"] for r in rob),
    }
    if complete and len(complete) == len(van):
        diffs = np.array([b - a for a, b in complete])
        base = float(np.mean([a for a, _ in complete]))
        agg["mean_overhead"] = float(diffs.mean())
        agg["relative_overhead"] = float(diffs.mean() / base) if base else None
    else:
        agg["mean_overhead"] = None
        agg["relative_overhead"] = None
    report = ExperimentReport("overhead", cfg, records, agg)
    report.artifacts["overhead.csv"] = _csv(
        ["seed", "variant", "t_star", "rel_rate"],
        [(r["seed"], r["variant"], r["t_star"], r["rel_rate"]) for r in records])
    return report


def generate_topology(cfg: ExperimentConfig, trial: int = 0) -> Topology:
    """The topology trial `trial` of a convergence run would use."""
    s_topo = trial_seed(cfg.master_seed, "converge", trial).spawn(5)[0]
    if cfg.freeze_nodes:
        s_topo = trial_seed(cfg.master_seed, "frozen-scene", 0).spawn(3)[0]
    return generate(_topology_for(cfg, ()), np.random.default_rng(s_topo))
