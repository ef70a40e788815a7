"""Scalar statistical primitives shared by the acceptance tests.

Contents: the Barker (logistic) acceptance function and its inverse, standard
logistic sampling, a moment accumulator for per-datum log-likelihood-ratio
terms, the quantitative CLT error bound, and a one-sample Kolmogorov-Smirnov
distance.
"""
import math

import numpy as np
from scipy.special import ndtr

__all__ = [
    "LOGISTIC_VARIANCE",
    "barker",
    "logistic_cdf",
    "logit",
    "sample_logistic",
    "MomentAccumulator",
    "clt_error_bound",
    "ks_distance",
    "logistic_gaussian_gap",
]

LOGISTIC_VARIANCE = math.pi ** 2 / 3.0

# beyond this the decision is forced and exp() would overflow
_SATURATION = 700.0


def barker(s):
    """Barker acceptance function ``1 / (1 + exp(-s))``.

    Accepts scalars or arrays. Always exponentiates a non-positive argument,
    so it never overflows; for ``|s| > 700`` it returns exactly 0 or 1.
    NaN propagates.
    """
    arr = np.asarray(s, dtype=float)
    z = np.exp(-np.abs(arr))
    out = np.where(arr >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    out = np.where(arr > _SATURATION, 1.0, out)
    out = np.where(arr < -_SATURATION, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


logistic_cdf = barker


def logit(v):
    """Inverse of :func:`barker`, ``log(v / (1 - v))``."""
    v = np.asarray(v, dtype=float)
    out = np.log(v) - np.log1p(-v)
    if out.ndim == 0:
        return float(out)
    return out


def _open_uniform(rng, size=None):
    # uniforms strictly inside (0, 1) on a 2**-53 lattice
    k = rng.integers(0, 2 ** 53, size=size)
    return (np.asarray(k, dtype=float) + 0.5) / 2.0 ** 53


def sample_logistic(rng, size=None):
    """Draw standard logistic variates by inverting the Barker function.

    Parameters
    ----------
    rng : numpy.random.Generator
    size : int or tuple, optional
        Output shape. ``None`` returns a float.
    """
    v = _open_uniform(rng, size)
    x = logit(v)
    return x


class MomentAccumulator:
    """Streaming statistics of a batch of log-likelihood-ratio terms.

    The running mean and sum of squared deviations are updated with
    Welford's recurrence. Absolute moments depend on the final mean, so the
    pushed values are retained and the standardized moments are computed by
    one pass at query time. Batches may be grown at any point without
    restarting.
    """

    def __init__(self, values=None):
        self._buf = np.empty(64, dtype=float)
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0
        self._lo = math.inf
        self._hi = -math.inf
        if values is not None:
            self.extend(values)

    def _reserve(self, extra):
        need = self.count + extra
        if need > self._buf.size:
            size = max(need, 2 * self._buf.size)
            buf = np.empty(size, dtype=float)
            buf[: self.count] = self._buf[: self.count]
            self._buf = buf

    def push(self, x):
        """Add a single value."""
        x = float(x)
        self._reserve(1)
        self._buf[self.count] = x
        self.count += 1
        self._lo = min(self._lo, x)
        self._hi = max(self._hi, x)
        delta = x - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (x - self.mean)
        return self

    def extend(self, values):
        """Add many values at once (Chan et al. pairwise merge)."""
        values = np.asarray(values, dtype=float).ravel()
        n_b = values.size
        if n_b == 0:
            return self
        self._reserve(n_b)
        self._buf[self.count : self.count + n_b] = values
        mean_b = float(np.add.reduce(values)) / n_b
        dev = values - mean_b
        m2_b = float(np.dot(dev, dev))
        self._lo = min(self._lo, float(values.min()))
        self._hi = max(self._hi, float(values.max()))
        n_a = self.count
        n = n_a + n_b
        delta = mean_b - self.mean
        self.mean += delta * n_b / n
        self._m2 += m2_b + delta * delta * n_a * n_b / n
        self.count = n
        return self

    @property
    def values(self):
        return self._buf[: self.count]

    @property
    def variance(self):
        """Per-sample variance ``(1/b) * sum (x_i - mean)^2``."""
        if self.count == 0:
            return 0.0
        return max(self._m2, 0.0) / self.count

    @property
    def sem2(self):
        """Squared standard error of the mean, ``(1/b^2) * sum (x_i - mean)^2``."""
        if self.count == 0:
            return 0.0
        return max(self._m2, 0.0) / self.count ** 2

    @property
    def degenerate(self):
        """True when all pushed values are equal (zero spread)."""
        return not self._lo < self._hi

    def standardized_moments(self):
        """Return ``(m1, m3)``, the mean absolute and mean absolute cubed
        deviations after standardizing by the per-sample standard deviation.

        Degenerate batches give ``(0.0, 0.0)``.
        """
        if self.degenerate:
            return 0.0, 0.0
        n = self.count
        dev = np.abs(self.values - self.mean)
        s2 = float(np.dot(dev, dev)) / n
        if s2 == 0.0:
            return 0.0, 0.0
        s = math.sqrt(s2)
        m1 = float(np.add.reduce(dev)) / (n * s)
        m3 = float(np.dot(dev * dev, dev)) / (n * s2 * s)
        return m1, m3


def clt_error_bound(m1, m3, b):
    """Bound ``(6.4 m3 + 2 m1) / sqrt(b)`` on the sup-distance between the CDF
    of a batch t-statistic and the standard normal CDF.

    ``m1`` and ``m3`` are standardized absolute moments; see
    :meth:`MomentAccumulator.standardized_moments`.
    """
    if b < 2:
        raise ValueError(f"insufficient batch: b={b}, need b >= 2")
    if m1 < 0 or m3 < 0:
        raise ValueError("absolute moments must be non-negative")
    return (6.4 * m3 + 2.0 * m1) / math.sqrt(b)


def ks_distance(samples, cdf):
    """One-sample Kolmogorov-Smirnov statistic ``sup |F_n - F|``.

    The empirical CDF is compared at both edges of each step.

    Parameters
    ----------
    samples : array_like
        Sample values (sorted internally).
    cdf : callable
        Vectorized reference CDF.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("ks_distance needs at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    upper = np.max(i / n - f)
    lower = np.max(f - (i - 1) / n)
    return float(max(upper, lower))


def logistic_gaussian_gap(scale=1.7, lo=-10.0, hi=10.0, step=1e-3):
    """Sup over a grid of ``|logistic_cdf(x) - Phi(x / scale)|``."""
    n = int(round((hi - lo) / step)) + 1
    x = np.linspace(lo, hi, n)
    return float(np.max(np.abs(logistic_cdf(x) - ndtr(x / scale))))
