"""Compare the compiled kernels against the numpy fallback.

Runs each backend in a subprocess (selection happens at import time via
TREATACCEL_BACKEND) and reports wall time for the three hot paths plus the
full pipeline.  Usage:

    python benchmarks/bench_backends.py [--n 5000] [--repeats 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _bench_worker(n: int, repeats: int) -> dict:
    import treataccel as ta
    from treataccel import _backend, _pack

    results = {"backend": ta.backend_name()}

    def best(fn) -> float:
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return min(times)

    cfg = ta.default_config()
    accel = ta.parse_accel_spec("form=constant b=2")
    design = ta.DesignSpec.parse("1; x_lci; x_disease; physical; dial2yr")

    results["simulate"] = best(lambda: ta.simulate_cohort(cfg, n=n, seed=7))
    cohort = ta.simulate_cohort(cfg, n=n, seed=7)
    sd = _pack.sweep_data(_pack.pack_subjects(cohort, design, accel))

    sweep = _backend.resolve("aalen_sweep")
    results["aalen_sweep"] = best(lambda: sweep(sd))
    incs, _ = sweep(sd)

    wsweep = _backend.resolve("weight_na_sweep")
    results["weight_sweep"] = best(lambda: wsweep(sd, incs, 1e-6, sd.ts))

    import numpy as np
    grid = np.linspace(0.0, cfg.horizon, 21)
    results["pipeline"] = best(
        lambda: ta.estimate_survival(cohort, design, accel, grid))
    return results


def _run_backend(backend: str, n: int, repeats: int) -> dict:
    env = dict(os.environ, TREATACCEL_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, __file__, "--worker", "--n", str(n),
         "--repeats", str(repeats)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.worker:
        json.dump(_bench_worker(args.n, args.repeats), sys.stdout)
        return

    py = _run_backend("python", args.n, args.repeats)
    co = _run_backend("compiled", args.n, args.repeats)
    if co["backend"] != "compiled":
        print("compiled extension not available; showing python only")
        co = None

    stages = ["simulate", "aalen_sweep", "weight_sweep", "pipeline"]
    print(f"n = {args.n}, best of {args.repeats}")
    print(f"{'stage':<14}{'python':>10}{'compiled':>10}{'speedup':>9}")
    for s in stages:
        if co is None:
            print(f"{s:<14}{py[s]:>9.3f}s")
        else:
            print(f"{s:<14}{py[s]:>9.3f}s{co[s]:>9.3f}s"
                  f"{py[s] / co[s]:>8.1f}x")


if __name__ == "__main__":
    main()
