#!/usr/bin/env python3
"""Reproduce the reference boundary-control experiment.

Defaults: d=2, lambda=0.5, mu=4, T=3, dt=0.01, N in {10, 20, 40}; emits
table1.csv, figure1.csv and control_trace.csv under out/.  Expect the N=40
row to take tens of minutes.  Pass --config to override any parameter.
"""

import sys

from specelast.cli import main

if __name__ == "__main__":
    sys.exit(main(["--out", "out", "control"] + sys.argv[1:]))
