"""Posterior-quality and efficiency metrics.

Binned metrics compare chain samples with bin probabilities of the true
posterior on a regular 2-D grid: a Poisson log-likelihood of the bin counts,
Pearson's chi-squared, and the total variation distance between two count
vectors.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

__all__ = [
    "Grid2D",
    "GridMassError",
    "MetricValue",
    "BinnedPosterior",
    "bin_counts",
    "true_bin_probs",
    "poisson_loglike",
    "chi_squared",
    "tv_distance",
    "accuracy_curve",
    "MIXTURE_GRID",
]


@dataclass(frozen=True)
class Grid2D:
    lo: tuple
    hi: tuple
    bins: tuple

    @property
    def widths(self):
        return tuple((h - l) / n for l, h, n in zip(self.lo, self.hi, self.bins))

    @property
    def n_bins(self):
        return self.bins[0] * self.bins[1]

    def expanded(self, factor):
        """Grid ``factor`` times wider in each direction with the same bin width."""
        lo, hi, bins = [], [], []
        for l, h, n in zip(self.lo, self.hi, self.bins):
            w = (h - l) / n
            extra = int(math.ceil(n * (factor - 1) / 2))
            lo.append(l - extra * w)
            hi.append(h + extra * w)
            bins.append(n + 2 * extra)
        return Grid2D(tuple(lo), tuple(hi), tuple(bins))

    @classmethod
    def parse(cls, spec):
        """``"lo1:hi1:n1,lo2:hi2:n2"``."""
        parts = [p.split(":") for p in spec.split(",")]
        if len(parts) != 2 or any(len(p) != 3 for p in parts):
            raise ValueError(f"grid spec must look like 'lo:hi:n,lo:hi:n', got {spec!r}")
        return cls((float(parts[0][0]), float(parts[1][0])),
                   (float(parts[0][1]), float(parts[1][1])),
                   (int(parts[0][2]), int(parts[1][2])))

    def __str__(self):
        return ",".join(f"{l!r}:{h!r}:{n}" for l, h, n in zip(self.lo, self.hi, self.bins))


# shipped binning for the mixture experiment
MIXTURE_GRID = Grid2D((-1.5, -3.0), (2.5, 3.0), (50, 50))


class GridMassError(ValueError):
    """The grid misses too much posterior mass."""


class MetricValue(NamedTuple):
    """A metric with an explicit flag for an impossible observation
    (a count in a bin of zero probability)."""

    value: float
    impossible: bool = False


@dataclass(frozen=True)
class BinnedPosterior:
    grid: Grid2D
    probs: np.ndarray
    counts: np.ndarray

    @property
    def n(self):
        return int(np.sum(self.counts))

    def poisson_loglike(self):
        return poisson_loglike(self.counts, self.probs, self.n)

    def chi_squared(self):
        return chi_squared(self.counts, self.probs, self.n)


def bin_counts(samples, grid):
    """Counts of 2-D samples per bin, flattened row-major (first coordinate slow).

    Samples outside the grid are dropped.
    """
    s = np.asarray(samples, dtype=float)
    h, _, _ = np.histogram2d(s[:, 0], s[:, 1], bins=grid.bins,
                             range=[[grid.lo[0], grid.hi[0]], [grid.lo[1], grid.hi[1]]])
    return h.astype(np.int64).ravel()


def _bin_log_masses(log_density, grid, sub, cutoff=40.0):
    # midpoint rule with sub x sub points in every bin whose centre (or a
    # neighbour's) lies within `cutoff` nats of the peak; remaining bins use
    # their centre value alone
    w0, w1 = grid.widths
    n0, n1 = grid.bins
    c0 = grid.lo[0] + (np.arange(n0) + 0.5) * w0
    c1 = grid.lo[1] + (np.arange(n1) + 0.5) * w1
    g0, g1 = np.meshgrid(c0, c1, indexing="ij")
    centre = np.asarray(log_density(np.column_stack([g0.ravel(), g1.ravel()])),
                        dtype=float).reshape(n0, n1)
    active = centre > np.max(centre) - cutoff
    grown = active.copy()
    grown[1:, :] |= active[:-1, :]
    grown[:-1, :] |= active[1:, :]
    grown[:, 1:] |= active[:, :-1]
    grown[:, :-1] |= active[:, 1:]
    ii, jj = np.nonzero(grown)
    off0 = ((np.arange(sub) + 0.5) / sub - 0.5) * w0
    off1 = ((np.arange(sub) + 0.5) / sub - 0.5) * w1
    o0, o1 = np.meshgrid(off0, off1, indexing="ij")
    p0 = (c0[ii][:, None] + o0.ravel()[None, :]).ravel()
    p1 = (c1[jj][:, None] + o1.ravel()[None, :]).ravel()
    fine = np.asarray(log_density(np.column_stack([p0, p1])), dtype=float)
    fine = fine.reshape(ii.size, sub * sub)
    top = max(float(np.max(fine)), float(np.max(centre)))
    mass = np.exp(centre - top) * (w0 * w1)
    mass[ii, jj] = np.exp(fine - top).mean(axis=1) * (w0 * w1)
    return mass, top


def true_bin_probs(log_density, grid, sub=16, max_missing=1e-3, expand=3.0, outer_sub=2):
    """Bin probabilities of an unnormalized 2-D density by midpoint quadrature.

    Each bin of ``grid`` is integrated on ``sub x sub`` midpoints. The
    normalizing constant adds the mass of a surrounding grid ``expand``
    times as wide, integrated more coarsely (``outer_sub``), so the
    probabilities sum to the mass inside ``grid``.

    Parameters
    ----------
    log_density : callable or TargetModel
        Maps an ``(n, 2)`` array of points to log densities; a model's
        ``log_posterior`` is used directly.

    Raises
    ------
    GridMassError
        If more than ``max_missing`` of the mass lies outside ``grid``.
    """
    if hasattr(log_density, "log_posterior"):
        log_density = log_density.log_posterior
    mass_in, top_in = _bin_log_masses(log_density, grid, sub)
    big = grid.expanded(expand)
    mass_big, top_big = _bin_log_masses(log_density, big, outer_sub)
    e0 = (big.bins[0] - grid.bins[0]) // 2
    e1 = (big.bins[1] - grid.bins[1]) // 2
    mass_big[e0:e0 + grid.bins[0], e1:e1 + grid.bins[1]] = 0.0
    top = max(top_in, top_big)
    inside = mass_in * math.exp(top_in - top)
    outside = float(mass_big.sum()) * math.exp(top_big - top)
    total = float(inside.sum()) + outside
    probs = inside / total
    if outside / total > max_missing:
        raise GridMassError(
            f"grid holds only {1.0 - outside / total:.6f} of the posterior mass; "
            "enlarge its bounds"
        )
    return probs.ravel()


def poisson_loglike(counts, P, n):
    """``sum_j c_j log(n P_j) - n P_j - log Gamma(c_j + 1)``.

    Bins with ``c_j > 0`` and ``P_j = 0`` make the value ``-inf``; that case
    is reported through ``impossible`` and the finite bins are still summed.
    """
    c = np.asarray(counts, dtype=float).ravel()
    lam = n * np.asarray(P, dtype=float).ravel()
    bad = (c > 0) & (lam <= 0)
    ok = ~bad
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(c[ok] > 0, c[ok] * np.log(lam[ok]), 0.0)
    value = float(np.sum(term - lam[ok] - gammaln(c[ok] + 1.0)))
    return MetricValue(value, bool(np.any(bad)))


def chi_squared(counts, P, n, floor=1e-8):
    """Pearson statistic ``sum (c_j - n P_j)^2 / (n P_j)``.

    Bins whose expectation ``n P_j`` is below ``floor`` are pooled into one
    catch-all bin. A pooled bin with zero expectation contributes nothing if
    empty and flags ``impossible`` otherwise.
    """
    c = np.asarray(counts, dtype=float).ravel()
    lam = n * np.asarray(P, dtype=float).ravel()
    big = lam >= floor
    value = float(np.sum((c[big] - lam[big]) ** 2 / lam[big]))
    pooled_c = float(np.sum(c[~big]))
    pooled_lam = float(np.sum(lam[~big]))
    impossible = False
    if pooled_lam > 0:
        value += (pooled_c - pooled_lam) ** 2 / pooled_lam
    elif pooled_c > 0:
        impossible = True
    return MetricValue(value, impossible)


def tv_distance(counts_a, counts_b):
    """Total variation distance between two normalized count vectors."""
    a = np.asarray(counts_a, dtype=float).ravel()
    b = np.asarray(counts_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("count vectors must share a grid")
    return float(0.5 * np.sum(np.abs(a / a.sum() - b / b.sum())))


def accuracy_curve(samples, batch_sizes, features, labels):
    """Test accuracy of each sampled parameter against cumulative data use.

    Predictions are ``sign(<theta_t, x>)`` with ties assigned to the negative
    class. Returns ``(cumulative_data, accuracy)`` arrays of length ``T``.
    """
    th = np.atleast_2d(np.asarray(samples, dtype=float))
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if th.shape[1] != x.shape[1]:
        raise ValueError(
            f"dimension mismatch: samples have {th.shape[1]} columns, features {x.shape[1]}"
        )
    pred = np.where(th @ x.T > 0, 1, -1)
    acc = np.mean(pred == y[None, :], axis=1)
    cum = np.cumsum(np.asarray(batch_sizes, dtype=np.int64))
    return cum, acc
