"""Run the estimation experiment at desk scale and print a per-case summary.

    python3 demos/desk_experiment.py grid.realizations=2 grid.trials=3 system.geometry=UCA

Arguments are ``section.field=value`` overrides on the default configuration.
"""
import sys
import time

from mmwave_dl.config import load_experiment_config
from mmwave_dl.experiment import run_experiment

cfg = load_experiment_config(None, sys.argv[1:] or ["grid.realizations=2", "grid.trials=3"])
t0 = time.perf_counter()
table = run_experiment(cfg, progress=lambda done, total: print(f"\r{done}/{total}", end="", file=sys.stderr))
print(f"\n{len(table)} rows in {time.perf_counter() - t0:.0f} s", file=sys.stderr)

print(f"{'case':<12}{'M':>4}{'NMSE dB':>9}{'SE':>8}{'SE perf':>9}{'l21/|H|':>9}")
for s in table.summary():
    print(f"{s['case']:<12}{s['M']:>4}{s['nmse_db']:>9.2f}{s['se_mean']:>8.3f}"
          f"{s['se_perfect_mean']:>9.3f}{s['l21_normalized_mean']:>9.3f}")
