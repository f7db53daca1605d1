"""Command-line entry point: ``mpccil <subcommand> [--config PATH] [--seed N] [--out DIR] [--jobs N]``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

from . import config as C
from .controllers import ApfParams
from .errors import MpccilError
from .experiments import (EXPERIMENTS, ApfController, MpccController, PolicyController, gen_course,
                          run_episode, train_policy)
from .policy import load_policy, save_policy

EXPERIMENT_COMMANDS = {
    "bench-runtime": "runtime",
    "exp-density": "density",
    "exp-robustness": "robustness",
    "exp-supervisor": "supervisor",
    "exp-exploration": "exploration",
    "exp-generalization": "generalization",
}


def _common(p):
    p.add_argument("--config", metavar="PATH", help="YAML config merged over the defaults")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for experiment cells")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="mpccil", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", help="learn a policy from generated example paths")
    _common(p)
    p.add_argument("--supervisor", choices=("mpcc", "mpc"), default="mpcc")
    p = sub.add_parser("rollout", help="fly one controller through a scenario")
    _common(p)
    p.add_argument("--policy", metavar="PATH", help="policy checkpoint (default: config 'policy')")
    p.add_argument("--controller", choices=("policy", "mpcc", "apf"), default="policy")
    p.add_argument("--scenario", metavar="PATH", help="scenario file (default: config 'scenario' or a fresh course)")
    p = sub.add_parser("gen-course", help="write a random obstacle course scenario file")
    _common(p)
    for name, exp in EXPERIMENT_COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {exp} experiment")
        _common(p)
        p.add_argument("--policy", metavar="PATH", help="policy checkpoint to evaluate instead of training one")
    return ap


def _load(args, experiment=None):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "policy", None):
        overrides["policy"] = args.policy
    cfg = C.load_config(args.config, experiment, overrides)
    return cfg, int(cfg["seed"])


def cmd_train(args):
    cfg, seed = _load(args)
    cfg = dict(cfg, cache_dir=None)
    policy, summary, report, data = train_policy(cfg, seed, args.supervisor)
    os.makedirs(args.out, exist_ok=True)
    save_policy(policy, os.path.join(args.out, "policy.npz"))
    save_policy(policy, os.path.join(args.out, "policy.txt"))
    if report is not None:
        rows = [asdict(r) for r in report.iterations]
        C.write_report(os.path.join(args.out, "train_report.csv"), rows, cfg, seed)
    if data is not None:
        data.to_csv(os.path.join(args.out, "dataset.csv"))
        data.save(os.path.join(args.out, "dataset.npz"))
    C.write_report(os.path.join(args.out, "train_summary.csv"), [summary], cfg, seed)
    print(json.dumps(summary))
    return 0 if not summary["diverged"] else 2


def cmd_rollout(args):
    cfg, seed = _load(args)
    plant = C.model_from(cfg, "plant")
    scen = args.scenario or cfg.get("scenario")
    if scen:
        world = C.load_scenario(scen, cfg["speed"])
    else:
        gc = C.EXPERIMENT_DEFAULTS["gen-course"]
        world = gen_course(gc["course_length"], *gc["spacing"], seed, speed=cfg["speed"])
    if args.controller == "policy":
        if not cfg.get("policy"):
            raise MpccilError("rollout needs --policy or a 'policy' entry in the config")
        ctrl = PolicyController(load_policy(cfg["policy"]))
    elif args.controller == "mpcc":
        ro = cfg["rollout"]
        ctrl = MpccController(C.weights_from(cfg, K_c=ro["K_c"], beta=ro["beta"]), C.model_from(cfg),
                              avoid_weight=ro["avoid_weight"], onset=ro["avoid_onset"])
    else:
        ctrl = ApfController(ApfParams(speed=cfg["speed"]), plant)
    metrics, traj = run_episode(ctrl, world, plant)
    os.makedirs(args.out, exist_ok=True)
    traj.to_csv(os.path.join(args.out, "trajectory.csv"), metrics)
    row = {k: v for k, v in asdict(metrics).items()}
    C.write_report(os.path.join(args.out, "rollout.csv"), [row], cfg, seed)
    print(json.dumps(row, default=str))
    return 0


def cmd_gen_course(args):
    cfg, seed = _load(args, "gen-course")
    ex = cfg["experiment"]
    world = gen_course(ex["course_length"], ex["spacing"][0], ex["spacing"][1], seed, speed=cfg["speed"])
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"course-{seed}.txt")
    C.save_scenario(world, path)
    print(path)
    return 0


def cmd_experiment(args):
    name = EXPERIMENT_COMMANDS[args.command]
    cfg, seed = _load(args, name)
    rows = EXPERIMENTS[name](cfg, seed, out=args.out, jobs=args.jobs)
    for r in rows:
        print(json.dumps(r, default=str))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"train": cmd_train, "rollout": cmd_rollout, "gen-course": cmd_gen_course}.get(args.command,
                                                                                          cmd_experiment)
    try:
        return handler(args)
    except MpccilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
