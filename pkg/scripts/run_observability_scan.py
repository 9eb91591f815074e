#!/usr/bin/env python3
"""Observability scan: random-data reports plus the worst-case ratio curve.

Writes observe_scan.csv / diagnostics.csv via the CLI, then prints the
worst-case (Gramian-minimal) ratio per degree, with and without the
auxiliary boundary observation.
"""

import sys

from specelast.cli import main
from specelast.config import load_config
from specelast.dynamics import TimeGridSpec
from specelast.fields import Material
from specelast.grid import tensor_grid
from specelast.observability import worst_case_ratio


def run(argv):
    cfg_path = None
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
    code = main(["--out", "out", "observe"] + argv)
    if code != 0:
        return code
    cfg = load_config(cfg_path)
    spec = TimeGridSpec(cfg.T, cfg.dt, cfg.scheme)
    material = Material(cfg.lam, cfg.mu)
    for n in cfg.n_values:
        grid = tensor_grid(cfg.d, n, cfg.gamma_faces_or_default)
        with_aux = worst_case_ratio(grid, material, spec, iterations=200,
                                    weight_g=cfg.weight_g, seed=cfg.seed)
        without = worst_case_ratio(grid, material, spec, iterations=200,
                                   weight_g=0.0, seed=cfg.seed)
        print(f"N={n}: worst-case ratio {with_aux.ratio:.4e} "
              f"(auxiliary off: {without.ratio:.4e})")
    return 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
