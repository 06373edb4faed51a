"""Lifetime of the default tag on a coin cell across update rates."""
import csv
import sys

from wakesim.lifetime import REFERENCE_POINTS, load_battery, load_profile, log_grid, sweep

battery = load_battery("CR2032")
profile = load_profile("eink_tag")
rates = log_grid(1e-7, 1.0, 10) + [r for r, *_ in REFERENCE_POINTS.values() if r > 0]
rows = sweep(battery, profile, rates)

w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
w.writeheader()
w.writerows(rows)
