"""Exact variance of every mechanism on a geometric grid, plus an SVG chart.

Writes ``variance.csv`` and ``variance.svg`` into the current directory (or
into ``$LOGMATRIX_OUTPUT_DIR``).
"""

import sys

from logmatrix.cli import main

if __name__ == "__main__":
    t_max = sys.argv[1] if len(sys.argv) > 1 else str(1 << 16)
    sys.exit(main(["compare", "--t-max", t_max, "--svg", "variance.svg", "-o", "variance.csv"]))
