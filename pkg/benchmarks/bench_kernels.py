"""Compiled vs pure-numpy integration kernels.

Each backend runs in its own interpreter (the pure path is selected with
ROTORTRAP_DISABLE_JIT=1) so compiled helpers never leak into the pure run.

    python3 benchmarks/bench_kernels.py [--periods 200] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, math, sys, time
import numpy as np
from rotortrap import USING_NUMBA
from rotortrap.model import fig3_body, fig3_trap
from rotortrap.rotor1d import integrate_pendulum, librating_state
from rotortrap.rotor3d import BodyState, integrate_rigid
from rotortrap.floquet import mathieu_boundary_q

periods, repeat = int(sys.argv[1]), int(sys.argv[2])
trap = fig3_trap(800.0, 2 * math.pi * 6000.0)
body = fig3_body()
T = trap.period
cases = {
    "pendulum": lambda: integrate_pendulum(trap, body, librating_state(trap.omega_d), periods * T).alpha[-1],
    "rigid": lambda: integrate_rigid(trap, body, BodyState.from_euler(0.01, math.pi / 2 + 0.01, 0.01),
                                      periods * T / 4, sample_dt=T).quat[-1, 0],
    "mathieu": lambda: mathieu_boundary_q(0.0),
}
out = {"numba": USING_NUMBA}
for name, fn in cases.items():
    t0 = time.perf_counter()
    fn()  # warm-up (compilation or cache load)
    first = time.perf_counter() - t0
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = float(fn())
        best = min(best, time.perf_counter() - t0)
    out[name] = {"first_s": first, "best_s": best, "value": value}
print(json.dumps(out))
"""


def run(disable, periods, repeat):
    env = dict(os.environ, ROTORTRAP_DISABLE_JIT="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(periods), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--periods", type=int, default=200, help="drive periods per pendulum run")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    t0 = time.perf_counter()
    jit = run(False, args.periods, args.repeat)
    pure = run(True, args.periods, args.repeat)
    print(f"{'kernel':<10}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}{'|diff|':>12}")
    for name in ("pendulum", "rigid", "mathieu"):
        a, b = jit[name], pure[name]
        print(f"{name:<10}{a['best_s']:12.4f}{b['best_s']:12.4f}{b['best_s'] / a['best_s']:10.1f}"
              f"{abs(a['value'] - b['value']):12.2e}")
    print(f"(numba active: {jit['numba']}; first numba call incl. compile/cache: "
          f"{max(v['first_s'] for k, v in jit.items() if k != 'numba'):.2f} s; total {time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
