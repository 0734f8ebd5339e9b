"""Horizon sweep on the synthetic slalom.

Longer horizons help the benchmark, at a cost that grows quickly with N. The
frequency-splitting controller gets close to the long-horizon result with a
short one. Defaults take a few minutes; pass --horizons 25,150 for the full
comparison (about 15 min single core).

    python demos/horizon_sweep.py --horizons 10,25,40 --workers 3 --out sweep.csv
"""

import argparse

from fsmca import make_synthetic_slalom
from fsmca.evaluation import sweep_horizons
from fsmca.scaling import recommend_scale

parser = argparse.ArgumentParser()
parser.add_argument("--horizons", default="10,25,40")
parser.add_argument("--scale", type=float, default=0.2)
parser.add_argument("--workers", type=int, default=1)
parser.add_argument("--out")
args = parser.parse_args()

scenario = make_synthetic_slalom()
rec = recommend_scale(scenario.accel(), scenario.dt)
# the advisor is conservative on this manoeuvre; the sweep uses the given k regardless
print(f"recommended k={rec.k_final:.3f} (k_theta={rec.k_theta:.3f}, k_omega={rec.k_omega:.4f}), using k={args.scale}")

rows = sweep_horizons(scenario, args.scale, [int(n) for n in args.horizons.split(",")],
                      workers=args.workers, out=args.out)
for row in rows:
    print(row.line())

by_n = {}
for row in rows:
    by_n.setdefault(row.N, {})[row.mode] = row.rmse_total
print("\n   N   benchmark      fs   fs/benchmark")
for n, r in by_n.items():
    print(f"{n:4d} {r['benchmark']:11.4f} {r['fs']:7.4f} {r['fs'] / r['benchmark']:10.2f}")
