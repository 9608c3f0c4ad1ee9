"""The limiting column norm and how slowly the partial sums approach it."""

import numpy as np

from logmatrix.factor import FactorParams
from logmatrix.sensitivity import compute_sensitivity, extrapolated_limit, partial_sums


def main():
    Ns = 2 ** np.arange(4, 21, 4)
    for delta_log in (0.0, 0.51):
        p = FactorParams(-0.51, delta_log)
        res = compute_sensitivity(p)
        print(f"delta_log={delta_log}: Delta^2 = {res.delta_sq:.10g} "
              f"(quadrature error {res.quad_error_estimate:.1e})")
        for N, s in zip(Ns, partial_sums(p, Ns)):
            print(f"   N=2^{int(np.log2(N)):2d}  partial={s:10.5f}  fraction={s / res.delta_sq:.4f}")
        print(f"   partial(2^20) + asymptotic tail = {extrapolated_limit(p, 2**20):.10g}")


if __name__ == "__main__":
    main()
