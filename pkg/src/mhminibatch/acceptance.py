"""Metropolis-Hastings acceptance tests.

Every test takes ``(model, proposal, theta, theta_new, rng)`` and returns a
:class:`TestDecision`. The strategy classes at the bottom bundle a test with
its configuration so a chain can call ``test.step(...)`` uniformly.

Notation: ``Lambda_i = (N/K) * (l(x_i, theta') - l(x_i, theta))`` and
``psi(u) = log u + log p0(theta) - log p0(theta')`` for the symmetric
random walk. The full-data Metropolis test accepts iff
``mean_i Lambda_i > psi(u)``; the Barker test accepts iff
``Delta + X_log > 0`` with ``Delta = mean_i Lambda_i - psi(1)``.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import stdtr

from .correction import sample_correction
from .data import IndexStream
from .models import lambda_terms, psi
from .stats import MomentAccumulator, clt_error_bound, sample_logistic

__all__ = [
    "TestDecision",
    "BarkerTestConfig",
    "mh_minibatch_step",
    "full_barker_step",
    "full_metropolis_step",
    "austere_step",
    "mhsublhd_step",
    "sublhd_schedule",
    "MinibatchBarkerTest",
    "FullBarkerTest",
    "FullMetropolisTest",
    "AustereTest",
    "SubLhdTest",
]


@dataclass
class TestDecision:
    """Outcome of one acceptance test.

    ``side_cost`` counts data touched by dataset-wide scans (baselines only);
    it is reported separately and never folded into ``batch_used``.
    """

    __test__ = False  # not a pytest class

    accept: bool
    batch_used: int
    epsilon_estimate: float = 0.0
    sem2: float = 0.0
    exhausted_dataset: bool = False
    delta_star: float = float("nan")
    side_cost: int = 0
    degenerate: bool = False


@dataclass(frozen=True)
class BarkerTestConfig:
    """Minibatch Barker test settings.

    m : initial batch size and augmentation increment
    delta : bound on the estimated CLT error before the test may fire
    table : sigma = 1 correction table
    initial_batch : optional first batch size (defaults to ``m``); set to
        ``N`` to force a full-data evaluation
    """

    m: int
    delta: float
    table: object
    initial_batch: int = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.table.sigma != 1.0:
            raise ValueError(f"correction table must have sigma=1, got {self.table.sigma}")


def _log_prior_shift(model, proposal, theta, theta_new):
    return psi(1.0, model, proposal, theta, theta_new)


def _uniform(rng):
    return (float(rng.integers(0, 2 ** 53)) + 0.5) / 2.0 ** 53


def mh_minibatch_step(model, proposal, theta, theta_new, cfg, rng):
    """Minibatch Barker test with a normal top-up and additive correction.

    Grows the batch by ``cfg.m`` until the squared standard error of the
    estimator is below one and the CLT error estimate is at most
    ``cfg.delta``, then accepts iff ``Delta* + X_nc + X_corr > 0`` with
    ``X_nc ~ N(0, 1 - s^2)`` and ``X_corr`` drawn from the table. If the
    dataset runs out first, the exact full-data Barker test decides.
    """
    N = model.N
    m = cfg.m
    if N < m:
        raise ValueError(f"dataset size N={N} is smaller than the batch size m={m}")
    shift = _log_prior_shift(model, proposal, theta, theta_new)
    acc = MomentAccumulator()
    stream = IndexStream(N, rng)
    take = min(N, cfg.initial_batch or m)
    while True:
        idx = stream.draw(take)
        acc.extend(lambda_terms(model, idx, theta, theta_new))
        b = acc.count
        s2 = acc.sem2
        degenerate = acc.degenerate
        if degenerate:
            eps = 0.0
        elif b >= 2:
            m1, m3 = acc.standardized_moments()
            eps = clt_error_bound(m1, m3, b)
        else:
            eps = math.inf
        if s2 < 1.0 and eps <= cfg.delta:
            break
        if b >= N:
            # every datum seen: Delta* equals Delta, run the exact test
            delta = acc.mean - shift
            accept = delta + sample_logistic(rng) > 0.0
            return TestDecision(bool(accept), b, eps, s2, True, delta, degenerate=degenerate)
        take = min(m, N - b)
    delta_star = acc.mean - shift
    x_nc = math.sqrt(max(0.0, 1.0 - s2)) * rng.standard_normal()
    x_corr = sample_correction(cfg.table, rng)
    accept = delta_star + x_nc + x_corr > 0.0
    return TestDecision(bool(accept), b, eps, s2, False, delta_star, degenerate=degenerate)


def full_barker_step(model, proposal, theta, theta_new, rng):
    """Exact Barker test: accept iff ``Delta + X_log > 0``."""
    terms = lambda_terms(model, slice(None), theta, theta_new)
    delta = float(np.mean(terms)) - _log_prior_shift(model, proposal, theta, theta_new)
    accept = delta + sample_logistic(rng) > 0.0
    return TestDecision(bool(accept), model.N, 0.0, 0.0, False, delta)


def full_metropolis_step(model, proposal, theta, theta_new, rng):
    """Exact Metropolis test: accept iff ``Lambda > psi(u)``, ``u ~ U(0, 1)``."""
    u = _uniform(rng)
    terms = lambda_terms(model, slice(None), theta, theta_new)
    lam = float(np.mean(terms))
    accept = lam > psi(u, model, proposal, theta, theta_new)
    delta = lam - _log_prior_shift(model, proposal, theta, theta_new)
    return TestDecision(bool(accept), model.N, 0.0, 0.0, False, delta)


def _per_datum(model, idx, theta, theta_new):
    # l_i = Lambda_i / N, the tempered per-datum log ratio
    return lambda_terms(model, idx, theta, theta_new) / model.N


def austere_step(model, proposal, theta, theta_new, variant, m, eps_test, rng, u=None):
    """Sequential t-test on the mean per-datum log ratio.

    At each stage the batch mean ``l_bar`` is compared with
    ``mu0 = psi(u)/N`` through ``t = (l_bar - mu0) / se`` where
    ``se = s / sqrt(b) * sqrt(1 - (b-1)/(N-1))``. The test decides once the
    two-sided Student-t tail probability drops below ``eps_test``.
    ``variant='conservative'`` uses the batch standard deviation;
    ``'nonconservative'`` uses the dataset-wide one (its full scan is
    recorded in ``side_cost``). ``u`` fixes the uniform instead of drawing it.
    """
    if variant in ("c", "conservative"):
        conservative = True
    elif variant in ("nc", "nonconservative"):
        conservative = False
    else:
        raise ValueError(f"unknown AustereMH variant {variant!r}")
    if m < 2:
        raise ValueError("m must be at least 2")
    if not 0.0 < eps_test < 0.5:
        raise ValueError("eps_test must lie in (0, 0.5)")
    N = model.N
    if N < m:
        raise ValueError(f"dataset size N={N} is smaller than the batch size m={m}")
    u = _uniform(rng) if u is None else float(u)
    mu0 = psi(u, model, proposal, theta, theta_new) / N
    side_cost = 0
    if not conservative:
        s_global = float(np.std(_per_datum(model, slice(None), theta, theta_new), ddof=1))
        side_cost = N
    acc = MomentAccumulator()
    stream = IndexStream(N, rng)
    while True:
        idx = stream.draw(min(m, N - acc.count))
        acc.extend(_per_datum(model, idx, theta, theta_new))
        b = acc.count
        l_bar = acc.mean
        if b >= N:
            return TestDecision(bool(l_bar > mu0), b, 0.0, 0.0, True,
                                N * l_bar - N * mu0, side_cost)
        s = s_global if not conservative else math.sqrt(acc.variance * b / (b - 1))
        se = s / math.sqrt(b) * math.sqrt(1.0 - (b - 1) / (N - 1))
        gap = l_bar - mu0
        if se == 0.0:
            if gap != 0.0:
                return TestDecision(bool(gap > 0), b, 0.0, 0.0, False, N * gap, side_cost)
            continue
        t = gap / se
        p_two = 2.0 * float(stdtr(b - 1, -abs(t)))
        if p_two < eps_test:
            return TestDecision(bool(gap > 0), b, float(p_two), se * se * N * N, False,
                                N * gap, side_cost)


def sublhd_schedule(m, gamma, N):
    """Batch sizes ``m, ceil(gamma*m), ...`` capped at ``N``."""
    sizes = [min(m, N)]
    while sizes[-1] < N:
        sizes.append(min(N, max(sizes[-1] + 1, math.ceil(gamma * sizes[-1]))))
    return sizes


def mhsublhd_step(model, proposal, theta, theta_new, m, gamma, p, delta, rng,
                  C_range=None, u=None):
    """Empirical-Bernstein sequential test with geometric batch growth.

    At stage ``k`` (1-based) with batch size ``b`` and budget
    ``delta_k = (p-1)/p * delta / k^p`` the half-width is
    ``c = s * sqrt(2 log(3/delta_k) / b) + 6 C log(3/delta_k) / b``; the test
    decides once ``|l_bar - mu0| > c``. ``C`` is the range of the per-datum
    log ratios over the full dataset (computed here if not given; the scan is
    recorded in ``side_cost``). ``u`` fixes the uniform instead of drawing it.
    """
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    N = model.N
    if N < m:
        raise ValueError(f"dataset size N={N} is smaller than the batch size m={m}")
    u = _uniform(rng) if u is None else float(u)
    mu0 = psi(u, model, proposal, theta, theta_new) / N
    side_cost = 0
    if C_range is None:
        full = _per_datum(model, slice(None), theta, theta_new)
        C_range = float(np.max(full) - np.min(full))
        side_cost = N
    elif C_range < 0:
        raise ValueError("C_range must be non-negative")
    acc = MomentAccumulator()
    stream = IndexStream(N, rng)
    for k, size in enumerate(sublhd_schedule(m, gamma, N), start=1):
        idx = stream.draw(size - acc.count)
        acc.extend(_per_datum(model, idx, theta, theta_new))
        b = acc.count
        gap = acc.mean - mu0
        if b >= N:
            return TestDecision(bool(gap > 0), b, 0.0, 0.0, True, N * gap, side_cost)
        delta_k = (p - 1.0) / p * delta / k ** p
        log_term = math.log(3.0 / delta_k)
        s = math.sqrt(acc.variance)
        c = s * math.sqrt(2.0 * log_term / b) + 6.0 * C_range * log_term / b
        if abs(gap) > c:
            return TestDecision(bool(gap > 0), b, c, 0.0, False, N * gap, side_cost)
    raise AssertionError("unreachable: schedule always ends at N")


# -- strategies ------------------------------------------------------------------

@dataclass(frozen=True)
class MinibatchBarkerTest:
    config: BarkerTestConfig
    name: str = "minibatch"

    def step(self, model, proposal, theta, theta_new, rng):
        return mh_minibatch_step(model, proposal, theta, theta_new, self.config, rng)


@dataclass(frozen=True)
class FullBarkerTest:
    name: str = "full_barker"

    def step(self, model, proposal, theta, theta_new, rng):
        return full_barker_step(model, proposal, theta, theta_new, rng)


@dataclass(frozen=True)
class FullMetropolisTest:
    name: str = "full_metropolis"

    def step(self, model, proposal, theta, theta_new, rng):
        return full_metropolis_step(model, proposal, theta, theta_new, rng)


@dataclass(frozen=True)
class AustereTest:
    variant: str = "conservative"
    m: int = 50
    eps_test: float = 0.005
    name: str = field(default="austere")

    def step(self, model, proposal, theta, theta_new, rng):
        return austere_step(model, proposal, theta, theta_new, self.variant,
                            self.m, self.eps_test, rng)


@dataclass(frozen=True)
class SubLhdTest:
    m: int = 50
    gamma: float = 1.5
    p: float = 2.0
    delta: float = 0.01
    name: str = "sublhd"

    def step(self, model, proposal, theta, theta_new, rng):
        return mhsublhd_step(model, proposal, theta, theta_new, self.m, self.gamma,
                             self.p, self.delta, rng)
