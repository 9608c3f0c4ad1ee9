"""Stream a Bernoulli sequence through the counter, the fast path and the hybrid.

Shows the released estimates next to the true prefix sum and compares the
realized squared error with the exact variance at a few checkpoints.
"""

import numpy as np

from logmatrix import FactorParams, PrivacyParams, init, variance_at
from logmatrix.approx import alg2_init
from logmatrix.baselines import HybridConfig, hybrid_stream, hybrid_variance


def main(n=1 << 14, seed=3):
    rng = np.random.default_rng(seed)
    xs = (rng.random(n) < 0.3).astype(float)
    truth = np.cumsum(xs)
    privacy = PrivacyParams()
    params = FactorParams(-0.51, 0.0)

    counter = init(params, privacy, seed)
    fast = alg2_init(params, privacy, seed)
    cfg = HybridConfig(unbounded_variant="independent")
    hybrid = hybrid_stream(cfg, privacy, seed)

    outs = {"logmatrix": counter.run(xs), "approx": fast.run(xs), "hybrid": hybrid.run(xs)}
    print(f"approximate counter switched to the expansion at t={fast.switch_epoch}")
    for t in (16, 256, 4096, n):
        sd = {
            "logmatrix": variance_at(counter, t) ** 0.5,
            "approx": variance_at(fast, t) ** 0.5,
            "hybrid": hybrid_variance(t, cfg, privacy) ** 0.5,
        }
        cells = "  ".join(f"{k}={outs[k][t - 1] - truth[t - 1]:+8.1f} (sd {sd[k]:6.1f})" for k in outs)
        print(f"t={t:6d} true={truth[t - 1]:7.0f}  {cells}")


if __name__ == "__main__":
    main()
