"""How far the perturbed factors sit from the plain square root.

Prints the first coefficients of L, R and (1 - z)^(-1/2) for the three
named presets and checks that L R reproduces the all-ones sequence.
"""

import numpy as np

from logmatrix.factor import FactorPair, FactorParams, coeffs_f1
from logmatrix.series import convolve


def main(n=4096):
    f1 = coeffs_f1(n)
    for name in ("fast", "default", "large-n"):
        params = FactorParams.preset(name)
        pair = FactorPair(params).extend_to(n)
        dev = np.max(np.abs(convolve(pair.L, pair.R, n) - 1.0))
        print(f"{name:8s} delta_log={params.delta_log:.3f}  max|L*R-1|={dev:.1e}")
        for m in (1, 2, 16, 256, n - 1):
            print(f"   m={m:5d}  L/f1={pair.L[m] / f1[m]:8.4f}  R/f1={pair.R[m] / f1[m]:8.4f}")


if __name__ == "__main__":
    main()
