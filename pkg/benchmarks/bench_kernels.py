"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter (the backend is fixed at import
time by ``MJSPECTRA_DISABLE_NUMBA``). Numba timings exclude compilation:
every kernel is called once before timing. Results also check that both
backends agree numerically.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from mjspectra import _kernels as K
from mjspectra._accel import BACKEND
from mjspectra.models import Mechanical, Liouville
from mjspectra.trig import Field2D, TrigSeries

repeat = int(sys.argv[1])
mech = Mechanical(V=Field2D(TrigSeries((0.0, 0.3)), TrigSeries((0.0, 0.2))))
liou = Liouville(TrigSeries((1.0, 0.3)), TrigSeries((0.0, 0.2)))
rng = np.random.default_rng(0)
ys = np.column_stack([rng.uniform(0, 6.28, 20000), rng.uniform(0, 6.28, 20000),
                      rng.normal(size=20000), rng.normal(size=20000)])
x = np.linspace(0, 6.28, 4000)
cr, ci = rng.normal(size=64) / np.arange(1, 65) ** 3, rng.normal(size=64) / np.arange(1, 65) ** 3

def integ(model, T):
    C, S = model.packed
    y0 = np.array([0.1, 0.2, 1.0, 0.6])
    ts, Y, cont, nrej, status = K.dopri5(model.kind, C, S, y0, T, 1e-10, 0.01, 10**7, model.guard)
    return float(Y[-1, 0])

cases = {
    "dopri5_mechanical_T200": lambda: integ(mech, 200.0),
    "dopri5_liouville_T200": lambda: integ(liou, 200.0),
    "energies_20000": lambda: float(K.energies(liou.kind, *liou.packed, ys).sum()),
    "vector_fields_20000": lambda: float(K.vector_fields(mech.kind, *mech.packed, ys).sum()),
    "kam_scan_K50": lambda: float(K.kam_scan(0.7548776662466927, 0.5698402909980532, 50, 1.5)[0]),
    "fourier_eval_4000x64": lambda: float(K.fourier_eval(cr, ci, x, 1).sum()),
}
out = {"backend": BACKEND}
for name, fn in cases.items():
    val = fn()                      # warm-up (and numba compilation or cache load)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    out[name] = {"seconds": min(times), "value": val}
print(json.dumps(out))
"""


def run_backend(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    if disable:
        env["MJSPECTRA_DISABLE_NUMBA"] = "1"
    else:
        env.pop("MJSPECTRA_DISABLE_NUMBA", None)
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the table as JSON here")
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    fast = run_backend(False, args.repeat)
    slow = run_backend(True, args.repeat)
    print(f"{'kernel':28s} {'numba [s]':>12s} {'numpy [s]':>12s} {'speedup':>9s} {'rel. diff':>10s}")
    rows = {}
    for name in fast:
        if name == "backend":
            continue
        a, b = fast[name], slow[name]
        diff = abs(a["value"] - b["value"]) / max(1.0, abs(b["value"]))
        rows[name] = {"numba": a["seconds"], "numpy": b["seconds"], "speedup": b["seconds"] / a["seconds"],
                      "rel_diff": diff}
        print(f"{name:28s} {a['seconds']:12.4g} {b['seconds']:12.4g} {b['seconds'] / a['seconds']:9.1f} {diff:10.2e}")
    print(f"backends: {fast['backend']} vs {slow['backend']}; total {time.perf_counter() - t0:.1f} s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
