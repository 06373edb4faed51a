"""Empirical vs modelled PDR over distance, written as CSV."""
import argparse
import sys

from wakesim.cli import PDR_COLUMNS, to_csv, pdr_checks, pdr_sweep
from wakesim.scenario import load_scenario

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--trials", type=int, default=1000)
p.add_argument("--step", type=float, default=5.0, help="distance step in m")
p.add_argument("--max", type=float, default=160.0)
p.add_argument("--out", default="pdr_sweep.csv")
args = p.parse_args()

scn = load_scenario()
distances = [1.1] + [round(args.step * k, 6) for k in range(1, int(args.max / args.step) + 1)]
rows = pdr_sweep(scn, distances, args.trials, scn.seed)
with open(args.out, "w") as fh:
    fh.write(to_csv(rows, PDR_COLUMNS))
for label, ok in pdr_checks(rows):
    print("PASS" if ok else "FAIL", label)
print(f"wrote {args.out}", file=sys.stderr)
