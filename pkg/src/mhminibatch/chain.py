"""Markov chain driver and run summaries."""
import time
from dataclasses import dataclass, field

import numpy as np

from .data import make_rng
from .models import RandomWalkProposal

__all__ = ["ScheduleEntry", "ChainConfig", "ChainResult", "ChainError", "run_chain",
           "summarize", "log2_histogram"]


@dataclass(frozen=True)
class ScheduleEntry:
    """From step ``start`` (0-based) on, use temperature ``K`` and, if given,
    proposal variance ``cov``."""

    start: int
    K: float
    cov: object = None


@dataclass(frozen=True)
class ChainConfig:
    T: int
    test: object
    proposal: RandomWalkProposal
    theta0: np.ndarray
    seed: object = 0
    temperature: float = None
    schedule: tuple = ()

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        object.__setattr__(self, "theta0", np.atleast_1d(np.asarray(self.theta0, dtype=float)))
        if self.temperature is not None and not self.temperature > 0:
            raise ValueError("temperature must be positive")
        entries = tuple(sorted(self.schedule, key=lambda e: e.start))
        for e in entries:
            if not e.K > 0:
                raise ValueError(f"scheduled temperature at step {e.start} must be positive")
        object.__setattr__(self, "schedule", entries)


@dataclass
class ChainResult:
    """Trajectory of ``T`` steps; ``samples[t]`` is the state after step ``t``."""

    theta0: np.ndarray
    samples: np.ndarray
    batch_sizes: np.ndarray
    accept_flags: np.ndarray
    epsilon_estimates: np.ndarray
    side_costs: np.ndarray
    exhausted: np.ndarray
    wall_times: np.ndarray = field(repr=False, default=None)

    @property
    def T(self):
        return len(self.batch_sizes)

    def truncated(self, n):
        return ChainResult(self.theta0, self.samples[:n], self.batch_sizes[:n],
                           self.accept_flags[:n], self.epsilon_estimates[:n],
                           self.side_costs[:n], self.exhausted[:n],
                           None if self.wall_times is None else self.wall_times[:n])


class ChainError(RuntimeError):
    """A step failed; ``partial`` holds the completed steps, ``step`` the failing index."""

    def __init__(self, message, partial, step):
        super().__init__(message)
        self.partial = partial
        self.step = step


def run_chain(model, cfg):
    """Propose, test and record ``cfg.T`` times.

    One random stream (seeded by ``cfg.seed``) feeds both proposals and
    tests, so a seed fixes the whole trajectory.
    """
    rng = make_rng(cfg.seed)
    d = cfg.theta0.size
    T = cfg.T
    samples = np.empty((T, d))
    batches = np.zeros(T, dtype=np.int64)
    flags = np.zeros(T, dtype=bool)
    eps = np.zeros(T)
    side = np.zeros(T, dtype=np.int64)
    exhausted = np.zeros(T, dtype=bool)
    walls = np.zeros(T)

    if cfg.temperature is not None:
        model = model.with_temperature(cfg.temperature)
    proposal = cfg.proposal
    pending = list(cfg.schedule)
    theta = cfg.theta0.copy()
    for t in range(T):
        while pending and pending[0].start <= t:
            entry = pending.pop(0)
            model = model.with_temperature(entry.K)
            if entry.cov is not None:
                cov = np.broadcast_to(np.asarray(entry.cov, dtype=float), (d,))
                proposal = RandomWalkProposal(cov.copy())
        start = time.perf_counter()
        try:
            theta_new = proposal.propose(theta, rng)
            dec = cfg.test.step(model, proposal, theta, theta_new, rng)
        except Exception as exc:
            partial = ChainResult(cfg.theta0, samples[:t].copy(), batches[:t].copy(),
                                  flags[:t].copy(), eps[:t].copy(), side[:t].copy(),
                                  exhausted[:t].copy(), walls[:t].copy())
            raise ChainError(f"chain aborted at step {t}: {exc}", partial, t) from exc
        if dec.accept:
            theta = theta_new
        samples[t] = theta
        batches[t] = dec.batch_used
        flags[t] = dec.accept
        eps[t] = dec.epsilon_estimate
        side[t] = dec.side_cost
        exhausted[t] = dec.exhausted_dataset
        walls[t] = time.perf_counter() - start
    return ChainResult(cfg.theta0, samples, batches, flags, eps, side, exhausted, walls)


def log2_histogram(values):
    """Counts per bin ``[2^k, 2^(k+1))``; returns ``(lower_edges, counts)``."""
    v = np.asarray(values)
    v = v[v > 0]
    if v.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    k = np.floor(np.log2(v)).astype(np.int64)
    # guard against log2 rounding at exact powers of two
    k = np.where(2.0 ** (k + 1) <= v, k + 1, k)
    k = np.where(2.0 ** k > v, k - 1, k)
    lo, hi = int(k.min()), int(k.max())
    counts = np.bincount(k - lo, minlength=hi - lo + 1)
    edges = 2 ** np.arange(lo, hi + 1, dtype=np.int64)
    return edges, counts


def summarize(result):
    """Acceptance rate, batch-size statistics and a log2-binned histogram."""
    b = np.asarray(result.batch_sizes)
    edges, counts = log2_histogram(b)
    return {
        "T": int(b.size),
        "acceptance_rate": float(np.mean(result.accept_flags)) if b.size else float("nan"),
        "mean_batch": float(np.mean(b)) if b.size else float("nan"),
        "median_batch": float(np.median(b)) if b.size else float("nan"),
        "p99_batch": float(np.percentile(b, 99)) if b.size else float("nan"),
        "max_batch": int(np.max(b)) if b.size else 0,
        "total_data": int(np.sum(b)),
        "side_cost": int(np.sum(result.side_costs)),
        "exhausted_steps": int(np.sum(result.exhausted)),
        "histogram": list(zip(edges.tolist(), counts.tolist())),
    }
