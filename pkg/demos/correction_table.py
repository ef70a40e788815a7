"""Build a small correction table and check what it is for.

The minibatch test adds N(0, 1) noise plus a draw from the correction
distribution, and the sum should be standard logistic. This script builds
a coarse table quickly, prints its fit, and compares the convolved noise
with the logistic CDF by sampling.

Run with ``python3 demos/correction_table.py``.
"""
import numpy as np

from mhminibatch.correction import default_table, make_correction, sample_correction
from mhminibatch.data import make_rng
from mhminibatch.stats import ks_distance, logistic_cdf


def main():
    # a coarse grid keeps this to a few seconds; the shipped table uses N=4000
    coarse = make_correction(sigma=1.0, lam=10.0, N=500)
    shipped = default_table()
    for name, table in (("coarse (N=500)", coarse), ("shipped (N=4000)", shipped)):
        print(f"{name:18s} residual {table.residual:.2e}  variance {table.variance():.4f}")

    rng = make_rng(0)
    n = 200_000
    for name, table in (("coarse", coarse), ("shipped", shipped)):
        total = rng.standard_normal(n) + sample_correction(table, rng, n)
        print(f"KS distance of N(0,1) + X_corr ({name}) to the logistic: "
              f"{ks_distance(total, logistic_cdf):.4f}")

    # without the correction the gap is much larger
    plain = rng.standard_normal(n) * np.pi / np.sqrt(3)
    print(f"KS distance of a variance-matched normal alone: {ks_distance(plain, logistic_cdf):.4f}")


if __name__ == "__main__":
    main()
