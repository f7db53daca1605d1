"""Time the hot kernels with numba and with the plain-NumPy fallback.

    python3 benchmarks/bench_numba.py            # runs both modes in subprocesses
    python3 benchmarks/bench_numba.py --child    # one mode, as set by MPCCIL_DISABLE_NUMBA

The NumPy path runs the same kernel bodies in the interpreter, so the solver
is slow there; repeat counts are kept small for it.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeats):
    fn()  # compile / warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def child(scale):
    from mpccil import NUMBA_ENABLED
    from mpccil.controllers import MpccWeights, mpcc_solve
    from mpccil.dynamics import ModelParams, cruise_state, step_kernel
    from mpccil.experiments import gen_course
    from mpccil.geometry import closest_point
    from mpccil.world import raycast

    model = ModelParams.from_alpha(0.85)
    world = gen_course(40.0, 3.0, 1.5, seed=1)
    path = world.guidance
    x = cruise_state(path.position(0.0), 0.0, 1.3, model)
    u = np.array([0.1, 0.05, -0.1, 0.0])
    rng = np.random.default_rng(0)
    pts = rng.uniform([0, -2, 0], [40, 2, 2], size=(64, 3))
    w = MpccWeights(N=10)
    res = {
        "numba": NUMBA_ENABLED,
        "step_kernel": _time(lambda: step_kernel(x, u, model.packed), 2000 * scale),
        "closest_point_x64": _time(lambda: [closest_point(path, p) for p in pts], 5 * scale),
        "raycast": _time(lambda: raycast(x, world), 200 * scale),
        "mpcc_solve_N10": _time(lambda: mpcc_solve(x, 0.0, path, w, model), 2 if not NUMBA_ENABLED else 20),
    }
    print(json.dumps(res))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--child", action="store_true")
    ap.add_argument("--scale", type=int, default=1)
    args = ap.parse_args()
    if args.child:
        child(args.scale)
        return
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, MPCCIL_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, __file__, "--child", "--scale", str(args.scale)], env=env,
                              capture_output=True, text=True, check=True)
        out[flag] = json.loads(proc.stdout.strip().splitlines()[-1])
    jit, plain = out["0"], out["1"]
    print(f"{'kernel':<20}{'numba [s]':>14}{'numpy [s]':>14}{'speedup':>10}")
    for k in jit:
        if k == "numba":
            continue
        print(f"{k:<20}{jit[k]:>14.3e}{plain[k]:>14.3e}{plain[k] / jit[k]:>10.1f}")


if __name__ == "__main__":
    main()
