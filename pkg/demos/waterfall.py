"""Error probability against Eb/N0 for BPSK and QPSK data phases.

Run with ``python3 demos/waterfall.py [trials]``. Results go to stdout as CSV.
"""

import sys

from uralab.config import SystemConfig
from uralab.harness import run_sweep, write_csv

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 50
base = SystemConfig(Ka=8, M=8, B=32, L=400)

for mod in ("BPSK", "QPSK"):
    rows = run_sweep(base.replace(modulation=mod), "ebn0_db", [2, 4, 6, 9, 12], trials)
    print(f"# {mod}")
    print(write_csv(rows), end="")
