"""Command-line entry point: ``calod <experiment> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from calod.experiments import (AttackSpec, ExperimentConfig, config_from_dict,
                               generate_topology, load_config,
                               run_convergence_demo, run_overhead_experiment,
                               run_roc_experiment, run_scaling_experiment)

DEFAULTS_EPILOG = """\
defaults (used for every field the config file leaves out):
  scenario   lambda_b=0.5  sigma_w2=0.5  source_intensity=0.5  min_dist2=1e-6
             source position redrawn uniformly in the region every trial
  topology   N=10 nodes on a 3.0 x 3.0 square, geometric links of radius 1.5,
             redrawn until connected (and min degree > 2p for robust runs)
  consensus  rho=1.0  max_iters=100 (steady state)  robust trim p=1
  attack     off; when enabled: 1 random Byzantine, mu_x=1.5, sigma_x2=0.1
  trials     1000 Monte-Carlo trials, hypotheses alternate (P0 = P1 = 0.5)
  roc        intensities 0.1 0.5
  scaling    N = 10 20 50 100, k = 10 nearest neighbours, constant density
  seed       --seed, else $LOD_SEED, else the config's master_seed (0)
"""


def _float_list(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _int_list(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML/JSON config document")
    common.add_argument("--seed", type=int, help="master seed (overrides $LOD_SEED and config)")
    common.add_argument("--out", type=Path, help="output directory (default out/<experiment>)")
    common.add_argument("--trials", type=int, help="number of Monte-Carlo trials")
    common.add_argument("--jobs", type=int, help="worker processes (default 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    attack = argparse.ArgumentParser(add_help=False)
    attack.add_argument("--attack", action="store_true", help="enable the Byzantine attack")
    attack.add_argument("--mu-x", type=float, help="attack mean (default 1.5)")
    attack.add_argument("--sigma-x2", type=float, help="attack variance (default 0.1)")
    attack.add_argument("--byzantines", type=int, help="Byzantines per trial (default 1)")

    variant = argparse.ArgumentParser(add_help=False)
    variant.add_argument("--variant", choices=("vanilla", "robust"), help="ADMM variant (default vanilla)")
    variant.add_argument("--p", type=int, help="trim count of the robust variant (default 1)")

    parser = argparse.ArgumentParser(
        prog="calod", description="Consensus-based locally optimum detection experiments.",
        epilog=DEFAULTS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    kw = dict(epilog=DEFAULTS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)

    sub.add_parser("converge", parents=[common, attack, variant], **kw,
                   help="state trajectories of one (or --trials) consensus runs -> trace.csv")
    roc = sub.add_parser("roc", parents=[common, attack], **kw,
                         help="steady-state ROC per variant and intensity -> roc_*.csv")
    roc.add_argument("--intensities", type=_float_list, help="source intensities (default '0.1 0.5')")
    roc.add_argument("--variants", type=lambda t: tuple(t.replace(",", " ").split()),
                     help="ADMM variants (default 'vanilla')")
    roc.add_argument("--p", type=int, help="trim count of the robust variant (default 1)")
    scaling = sub.add_parser("scaling", parents=[common, variant], **kw,
                             help="T* and T*/N against network size -> scaling.csv")
    scaling.add_argument("--n-values", type=_int_list, help="network sizes (default '10 20 50 100')")
    overhead = sub.add_parser("overhead", parents=[common], **kw,
                              help="paired vanilla vs robust convergence -> overhead.csv")
    overhead.add_argument("--p", type=int, help="trim count of the robust variant (default 1)")
    topo = sub.add_parser("topology-gen", parents=[common], **kw,
                          help="draw one topology -> topology.json")
    topo.add_argument("--nodes", type=int, help="number of nodes (default 10)")
    topo.add_argument("--kind", choices=("geometric", "k_nearest"), help="graph model")
    topo.add_argument("--radius", type=float, help="link radius of the geometric model")
    topo.add_argument("--k", type=int, help="neighbours of the k_nearest model")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    changes = {}
    seed = args.seed
    if seed is None and os.environ.get("LOD_SEED"):
        seed = int(os.environ["LOD_SEED"])
    if seed is not None:
        changes["master_seed"] = seed
    if args.out is not None:
        changes["output_dir"] = str(args.out)
    if args.trials is not None:
        changes["n_trials"] = args.trials
    if args.jobs is not None:
        changes["n_jobs"] = args.jobs

    cons = {}
    if getattr(args, "variant", None):
        cons["variant"] = args.variant
    if getattr(args, "p", None) is not None:
        cons["p"] = args.p
    if cons:
        changes["consensus"] = dataclasses.replace(cfg.consensus, **cons)

    atk = {k: getattr(args, a) for k, a in (("mu_x", "mu_x"), ("sigma_x2", "sigma_x2"),
                                            ("n_byzantine", "byzantines"))
           if getattr(args, a, None) is not None}
    if getattr(args, "attack", False) or atk:
        changes["attack"] = dataclasses.replace(cfg.attack or AttackSpec(), **atk)

    if getattr(args, "intensities", None):
        changes["intensities"] = args.intensities
    if getattr(args, "variants", None):
        changes["variants"] = args.variants
    if getattr(args, "n_values", None):
        changes["n_values"] = args.n_values

    topo = {k: getattr(args, a) for k, a in (("n_nodes", "nodes"), ("kind", "kind"),
                                             ("radius", "radius"), ("k", "k"))
            if getattr(args, a, None) is not None}
    if topo:
        changes["topology"] = dataclasses.replace(cfg.topology, **topo)
    return cfg.replace(**changes)


def _run(args) -> int:
    cfg = resolve_config(args)
    if args.command == "topology-gen":
        out = Path(args.out or cfg.output_dir or "out/topology")
        out.mkdir(parents=True, exist_ok=True)
        top = generate_topology(cfg)
        (out / "topology.json").write_text(top.to_json() + "\n")
        print(f"wrote {out / 'topology.json'} ({top.n_nodes} nodes, {top.n_edges} edges)")
        return 0
    if args.command == "converge":
        n_runs = args.trials or 1
        report = run_convergence_demo(cfg.replace(n_trials=n_runs), n_runs=n_runs)
    elif args.command == "roc":
        report = run_roc_experiment(cfg)
    elif args.command == "scaling":
        report = run_scaling_experiment(cfg)
    else:
        report = run_overhead_experiment(cfg)
    out = report.write()
    print(f"{report.name}: wrote {len(report.files)} files to {out}")
    print(json.dumps(report.aggregates, sort_keys=True, default=str))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"calod {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
