#!/usr/bin/env python3
"""Score the relaxation-and-rounding pipeline against exhaustive enumeration.

Prints one line per random small instance (lower bound, rounded objective,
exact optimum) and a summary of how often the bound holds and the rounding
lands within 5% of exact. Equivalent to `mecopt oracle-compare`.
"""

import os
import sys

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

from mecopt.cli import main  # noqa: E402

if __name__ == "__main__":
    raise SystemExit(main(["oracle-compare", *sys.argv[1:]]))
