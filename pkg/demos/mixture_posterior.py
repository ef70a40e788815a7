"""Sample the bimodal mixture posterior and score the samples.

Data come from an equal mixture of N(theta1, 2) and N(theta1 + theta2, 2)
with (theta1, theta2) = (0, 1). At temperature K the posterior is a thin
ridge with two modes. The script runs a minibatch chain, bins the samples
on the 50 x 50 metrics grid, and compares the counts with the exact bin
probabilities. A text plot of the sample histogram is printed at the end.

Pass a smaller dataset for a quick look::

    python3 demos/mixture_posterior.py 100000 1000

The defaults (10^6 points, K = 10^4, 3000 samples) take a few minutes.
"""
import sys

import numpy as np

from mhminibatch.acceptance import BarkerTestConfig, MinibatchBarkerTest
from mhminibatch.chain import ChainConfig, run_chain, summarize
from mhminibatch.correction import default_table
from mhminibatch.data import generate_mixture_data
from mhminibatch.metrics import (
    MIXTURE_GRID,
    bin_counts,
    chi_squared,
    poisson_loglike,
    true_bin_probs,
)
from mhminibatch.models import MixtureModel, RandomWalkProposal


def text_plot(counts, width=50):
    shades = " .:-=+*#%@"
    top = counts.max() or 1
    rows = []
    # theta2 increases upwards
    for j in reversed(range(counts.shape[1])):
        rows.append("".join(shades[min(9, int(9 * c / top + 0.999))] for c in counts[:width, j]))
    return "\n".join(rows)


def main(N=1_000_000, T=3000):
    K = N / 100
    model = MixtureModel(generate_mixture_data(N, theta=(0.0, 1.0), seed=0), temperature=K)
    cfg = ChainConfig(T=T, test=MinibatchBarkerTest(BarkerTestConfig(50, 1.5, default_table())),
                      proposal=RandomWalkProposal([0.15 ** 2] * 2), theta0=(0.5, 0.0), seed=1)
    res = run_chain(model, cfg)
    s = summarize(res)
    print(f"N = {N}, K = {K:g}: acceptance {s['acceptance_rate']:.2f}, "
          f"mean batch {s['mean_batch']:.1f}, total data read {s['total_data']}")

    counts = bin_counts(res.samples, MIXTURE_GRID)
    P = true_bin_probs(model, MIXTURE_GRID)
    n = int(counts.sum())
    print(f"Poisson log-likelihood {poisson_loglike(counts, P, n).value:.1f}, "
          f"chi-squared {chi_squared(counts, P, n).value:.1f}")
    # both arrays are flattened with theta1 varying slowest; theta1 = 0.5 is
    # the edge between rows 24 and 25 of the grid
    P2 = np.reshape(P, MIXTURE_GRID.bins)
    left = res.samples[:, 0] < 0.5
    print(f"fraction of samples with theta1 < 0.5: {left.mean():.2f} "
          f"(exact {P2[:25].sum() / P2.sum():.2f})")
    print(text_plot(np.reshape(counts, MIXTURE_GRID.bins)))


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:3]))
