"""YAML experiment configuration, scenario files and report plumbing."""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
import os
from dataclasses import fields

import numpy as np
import yaml

from .controllers import MpccWeights
from .dynamics import InputLimits, ModelParams
from .errors import ConfigurationError
from .geometry import build_spline
from .imitation import NOISE_STD, LearnConfig
from .policy import TrainConfig
from .world import Obstacle, World

SCHEMA_VERSION = 1
TIMING_COLUMNS = ("solve_time_mean", "solve_time_max", "policy_time", "wall_time", "controller_time",
                  "harness_time")

DEFAULTS = {
    "seed": 0,
    "model": {"alpha": 0.85, "Ts": 0.1, "c_d": 0.3},
    "plant": {"alpha": 0.85, "wind": [0.0, 0.0]},
    "limits": {"vz_max": 1.0, "roll_max": 0.4, "pitch_max": 0.4, "yaw_rate_max": 1.5},
    "weights": {"K_c": 25.0, "K_l": 100.0, "beta": 1.0, "R": [2.0, 8.0, 8.0, 1.0], "K_f": 10.0, "N": 20,
                "nu_dot_max": 1.3, "nu_dot_reg": 1e-3, "tol": 1e-6, "max_iter": 50},
    "train": {"learning_rate": 3e-3, "batch_size": 64, "epochs": 10},
    "learn": {"exploration": "safe", "onpolicy_K_c": 10.0, "K_f": 10.0, "n_augment": 3,
              "noise_std": [float(v) for v in NOISE_STD], "init_epochs": 50},
    "examples": {"n_return": 4, "n_avoid": 8, "speed": 1.3, "avoid_lateral": [0.1, 0.4]},
    "speed": 1.3,
    "policy": None,
    "cache_dir": None,
    "scenario": None,
    # MPCC baseline in ``rollout``: guidance may cross obstacles, so contouring is loosened
    "rollout": {"K_c": 5.0, "beta": 5.0, "avoid_weight": 500.0, "avoid_onset": 1.0},
    "experiment": {},
}

EXPERIMENT_DEFAULTS = {
    "runtime": {"horizons": [5, 10, 20, 30], "repeats": 3, "steps": 60, "policy_calls": 2000},
    "density": {"spacings": [[0.0, 0.0], [4.0, 2.0], [3.0, 1.5], [2.0, 1.0]], "course_length": 200.0,
                "rollouts": 3, "apf": {}},
    "robustness": {"alphas": [0.70, 0.75, 0.80, 0.85, 0.90, 0.95], "plant_alpha": 0.85, "policies": 3,
                   "train_offsets": [[1.5, 0.0], [-1.5, 0.0], [1.0, 0.4], [-1.0, -0.4]],
                   "test_offsets": [[1.2, 0.0], [-1.2, 0.2], [1.8, -0.2], [-0.8, 0.0], [0.7, 0.3],
                                    [-1.7, -0.3]],
                   "obs_dim": 5, "cap": 50.0, "rescale": 1.0, "supervisors": ["mpcc", "mpc"]},
    "supervisor": {"course_length": 100.0, "spacing": [3.0, 1.5], "seeds": 3, "supervisors": ["mpcc", "mpc"]},
    "exploration": {"K_c": [0.1, 10.0, 25.0], "unsafe": True, "seeds": 3, "test_returns": 6, "test_avoids": 8,
                    "cap": 50.0},
    "generalization": {"radius_scales": [1.0, 1.25, 1.5, 1.75], "kinds": ["cylinder", "box"],
                       "crossing_speeds": [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3], "lateral": 0.0},
    "gen-course": {"course_length": 200.0, "spacing": [3.0, 1.5]},
}


def deep_merge(base, override):
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, experiment=None, overrides=None):
    """Defaults, then the experiment block defaults, then the file, then ``overrides``."""
    cfg = copy.deepcopy(DEFAULTS)
    if experiment is not None:
        cfg["experiment"] = copy.deepcopy(EXPERIMENT_DEFAULTS.get(experiment, {}))
    if path is not None:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping")
        cfg = deep_merge(cfg, user)
        if cfg.get("scenario") and not os.path.isabs(cfg["scenario"]):
            cfg["scenario"] = os.path.join(os.path.dirname(os.path.abspath(path)), cfg["scenario"])
    cfg = deep_merge(cfg, overrides or {})
    validate(cfg)
    return cfg


def validate(cfg):
    ex = cfg.get("experiment", {})
    for key, val in ex.items():
        if isinstance(val, list) and len(val) == 0:
            raise ConfigurationError(f"experiment.{key} must be non-empty")
    for key in ("course_length",):
        if key in ex and not ex[key] > 0:
            raise ConfigurationError("course length must be positive")
    for key in ("rollouts", "repeats", "policies", "seeds"):
        if key in ex and int(ex[key]) < 1:
            raise ConfigurationError(f"experiment.{key} must be >= 1")
    if cfg["learn"]["exploration"] not in ("safe", "unsafe"):
        raise ConfigurationError("learn.exploration must be 'safe' or 'unsafe'")


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def model_from(cfg, block="model", alpha=None):
    m = cfg["model"]
    lim = InputLimits(**cfg["limits"])
    a = m["alpha"] if alpha is None else alpha
    if block == "plant":
        a = cfg["plant"]["alpha"] if alpha is None else alpha
        wind = tuple(cfg["plant"].get("wind", (0.0, 0.0)))
    else:
        wind = (0.0, 0.0)
    return ModelParams.from_alpha(a, Ts=m["Ts"], c_d=m["c_d"], input_limits=lim, wind=wind)


def weights_from(cfg, **changes):
    w = dict(cfg["weights"])
    w["R"] = tuple(w["R"])
    w["Ts"] = cfg["model"]["Ts"]
    w.update(changes)
    names = {f.name for f in fields(MpccWeights)}
    return MpccWeights(**{k: v for k, v in w.items() if k in names})


def train_config_from(cfg, seed):
    return TrainConfig(seed=seed, **cfg["train"])


def learn_config_from(cfg, seed, **changes):
    lc = dict(cfg["learn"])
    lc["noise_std"] = tuple(lc["noise_std"])
    lc.update(changes)
    return LearnConfig(seed=seed, train=train_config_from(cfg, seed), speed=cfg["speed"], **lc)


# --------------------------------------------------------------------------- scenario files

def load_scenario(path, speed=1.3):
    """Plain-text scenario: ``point x y z`` lines form the guidance spline,
    ``cylinder x y r [vx vy]`` and ``box cx cy cz hx hy hz [vx vy]`` add
    obstacles, ``speed v`` sets the setpoint speed.  ``#`` starts a comment.
    """
    pts, obs = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                vals = [float(v) for v in tok[1:]]
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: {exc}") from None
            if tok[0] == "point" and len(vals) == 3:
                pts.append(vals)
            elif tok[0] == "cylinder" and len(vals) in (3, 5):
                obs.append(Obstacle.cylinder(vals[0], vals[1], vals[2], tuple(vals[3:5]) or (0.0, 0.0)))
            elif tok[0] == "box" and len(vals) in (6, 8):
                obs.append(Obstacle.box(vals[0:3], vals[3:6], tuple(vals[6:8]) or (0.0, 0.0)))
            elif tok[0] == "speed" and len(vals) == 1:
                speed = vals[0]
            else:
                raise ConfigurationError(f"{path}:{lineno}: cannot parse {line!r}")
    if len(pts) < 2:
        raise ConfigurationError(f"{path}: a scenario needs at least two guidance points")
    return World(build_spline(pts), tuple(obs), speed)


def save_scenario(world: World, path, n_points=None):
    g = world.guidance
    pts = g.control_points
    with open(path, "w") as fh:
        fh.write(f"speed {world.setpoint_speed!r}\n")
        for p in pts:
            fh.write("point " + " ".join(repr(float(v)) for v in p) + "\n")
        for o in world.obstacles:
            vel = "" if o.velocity == (0.0, 0.0) else " " + " ".join(repr(v) for v in o.velocity)
            if o.kind == "cylinder":
                fh.write(f"cylinder {o.center[0]!r} {o.center[1]!r} {o.size[0]!r}{vel}\n")
            else:
                fh.write("box " + " ".join(repr(v) for v in (*o.center, *o.size)) + vel + "\n")


# --------------------------------------------------------------------------- reports

def write_report(path, rows, cfg, seed, columns=None):
    """CSV with schema version, config hash and seed on every row."""
    if not rows:
        raise ConfigurationError("empty report")
    columns = columns or list(rows[0].keys())
    h = config_hash(cfg)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["schema", "config_hash", "seed"] + columns)
        for r in rows:
            wr.writerow([SCHEMA_VERSION, h, seed] + [_fmt(r.get(c)) for c in columns])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return v


def read_report(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))
