"""How much data does each acceptance test read per step?

A tempered posterior over the mean of unit-variance Gaussian data is
sampled with the exact Metropolis test, the minibatch Barker test and the
two sequential baselines. For each one the script prints the acceptance
rate, the mean batch size and the posterior mean estimate.

The temperature K = N/100 keeps the posterior width at 0.1 whatever N is.
Without tempering, a proposal on the posterior scale changes the summed
log-likelihood by O(1) while each datum contributes with O(sqrt(N)) spread,
so any test that estimates the sum needs almost all of the data.

Run with ``python3 demos/gaussian_batch_sizes.py``. It takes under a minute.
"""
import numpy as np

from mhminibatch.acceptance import (
    AustereTest,
    BarkerTestConfig,
    FullMetropolisTest,
    MinibatchBarkerTest,
    SubLhdTest,
)
from mhminibatch.chain import ChainConfig, run_chain, summarize
from mhminibatch.correction import default_table
from mhminibatch.data import generate_gaussian_data, trial_seed
from mhminibatch.models import GaussianMeanModel, RandomWalkProposal


def main(N=50_000, T=2000):
    data = generate_gaussian_data(N, mean=0.5, seed=3)
    K = N / 100
    model = GaussianMeanModel(data, temperature=K)
    xbar = data.features[:, 0].mean()
    post_sd = np.sqrt(K / N)
    proposal = RandomWalkProposal([post_sd ** 2])
    tests = {
        "full Metropolis": FullMetropolisTest(),
        "minibatch Barker": MinibatchBarkerTest(BarkerTestConfig(50, 1.5, default_table())),
        "AustereMH (c)": AustereTest("conservative", 50, 0.005),
        "MHSubLhd": SubLhdTest(50, 1.5, 2.0, 0.01),
    }
    print(f"N = {N}, K = {K:g}, sample mean {xbar:.5f}, posterior sd {post_sd:.3f}")
    for i, (name, test) in enumerate(tests.items()):
        cfg = ChainConfig(T=T, test=test, proposal=proposal, theta0=[xbar], seed=trial_seed(7, i))
        res = run_chain(model, cfg)
        s = summarize(res)
        print(f"{name:18s} accept {s['acceptance_rate']:.2f}  mean batch {s['mean_batch']:9.1f}"
              f"  posterior mean {res.samples[:, 0].mean():.5f}")


if __name__ == "__main__":
    main()
