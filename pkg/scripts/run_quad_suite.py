#!/usr/bin/env python3
"""Run the quadrature/differentiation invariant sweep (N = 2..64)."""

import sys

from specelast.cli import main

if __name__ == "__main__":
    sys.exit(main(["--out", "out", "quad"] + sys.argv[1:]))
