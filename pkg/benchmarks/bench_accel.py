"""Time the numba kernels against the pure-numpy fallback.

Each path runs in its own interpreter because the flag is read at import:

    python3 benchmarks/bench_accel.py [--n 200,400,800] [--repeats 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = """
import json, sys, time
import numpy as np
from kernel_r2 import NUMBA_ENABLED, estimate
from kernel_r2.neighbours import neighbour_table
from kernel_r2.simgen import gen_heteroscedastic

sizes, repeats = json.loads(sys.argv[1]), int(sys.argv[2])


def best(fn):
    fn()  # warm-up, includes compilation
    out = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return min(out)


rows = []
for n in sizes:
    s = gen_heteroscedastic(n, 0.5, 0)
    rows.append({"n": n,
                 "neighbour_table": best(lambda: neighbour_table(s.x, 6, 0)),
                 "knn_estimate": best(lambda: estimate(s, "knn")),
                 "d_hat": estimate(s, "knn").d_hat})
print(json.dumps({"numba": NUMBA_ENABLED, "rows": rows}))
"""


def run(sizes, repeats, disable):
    env = dict(os.environ)
    env.pop("KERNEL_R2_DISABLE_NUMBA", None)
    if disable:
        env["KERNEL_R2_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKER, json.dumps(sizes), str(repeats)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", default="200,400,800")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    sizes = [int(v) for v in args.n.split(",")]
    fast, slow = run(sizes, args.repeats, False), run(sizes, args.repeats, True)
    print(f"{'n':>6} {'table numba':>12} {'table numpy':>12} {'knn numba':>10} "
          f"{'knn numpy':>10} {'speedup':>8} same")
    for a, b in zip(fast["rows"], slow["rows"]):
        same = a["d_hat"] == b["d_hat"]
        print(f"{a['n']:>6} {a['neighbour_table']:>12.4f} {b['neighbour_table']:>12.4f} "
              f"{a['knn_estimate']:>10.4f} {b['knn_estimate']:>10.4f} "
              f"{b['knn_estimate'] / a['knn_estimate']:>8.1f} {same}")


if __name__ == "__main__":
    main()
