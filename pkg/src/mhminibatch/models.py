"""Target posteriors and the random-walk proposal.

A :class:`TargetModel` couples a dataset with an untempered per-datum
log-likelihood and a prior. The temperature ``K`` scales likelihood terms
only; the prior is never tempered. Additive constants may be dropped from a
log-density because only differences at fixed data enter the tests.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset

__all__ = [
    "ModelDomainError",
    "TargetModel",
    "GaussianMeanModel",
    "MixtureModel",
    "LogisticRegressionModel",
    "RandomWalkProposal",
    "gaussian_mean_loglike_term",
    "mixture_loglike_term",
    "logreg_loglike_term",
    "lambda_term",
    "lambda_terms",
    "psi",
    "propose",
    "MIXTURE_SIGMA_X2",
    "MIXTURE_PRIOR_VAR",
]

MIXTURE_SIGMA_X2 = 2.0
MIXTURE_PRIOR_VAR = (10.0, 1.0)

_LOG_HALF = math.log(0.5)


class ModelDomainError(ValueError):
    """A per-datum log-likelihood term was not finite."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


def gaussian_mean_loglike_term(x, theta):
    """``-(x - theta)^2 / 2``: unit-variance normal, constant dropped."""
    x = np.asarray(x, dtype=float)
    return -0.5 * (x - theta) ** 2


def mixture_loglike_term(x, theta, sigma_x2=MIXTURE_SIGMA_X2):
    """Log density of ``0.5 N(theta1, s2) + 0.5 N(theta1 + theta2, s2)``."""
    x = np.asarray(x, dtype=float)
    t1, t2 = float(theta[0]), float(theta[1])
    norm = -0.5 * math.log(2.0 * math.pi * sigma_x2)
    a = -((x - t1) ** 2) / (2.0 * sigma_x2)
    b = -((x - t1 - t2) ** 2) / (2.0 * sigma_x2)
    return _LOG_HALF + norm + np.logaddexp(a, b)


def logreg_loglike_term(x, y, theta):
    """``-log(1 + exp(-y <theta, x>))`` for labels ``y`` in {-1, +1}.

    ``x`` may be a single feature vector or a matrix with one row per datum.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x.shape[-1] != theta.shape[-1]:
        raise ValueError(
            f"dimension mismatch: features have {x.shape[-1]} columns, "
            f"theta has {theta.shape[-1]}"
        )
    z = np.asarray(y, dtype=float) * (x @ theta)
    return -np.logaddexp(0.0, -z)


@dataclass(frozen=True, eq=False)
class TargetModel:
    """Posterior ``p0(theta) * prod_i p(x_i | theta)^(1/K)``.

    Subclasses implement :meth:`loglike` (vectorized over rows of the
    dataset) and :meth:`log_prior`.
    """

    data: Dataset
    temperature: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    dim = None

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    @property
    def N(self):
        return self.data.N

    def with_temperature(self, K):
        # shares the full-data cache: it holds untempered terms only
        return replace(self, temperature=float(K), _cache=self._cache)

    def log_prior(self, theta):
        return 0.0

    def loglike(self, idx, theta):
        """Untempered log-likelihood terms for the rows ``idx``."""
        raise NotImplementedError

    def loglike_term(self, datum, theta):
        """Log-likelihood of a single datum (a feature row, or ``(row, label)``)."""
        raise NotImplementedError

    def full_loglike(self, theta):
        """Terms for the whole dataset; the two most recent ``theta`` are cached."""
        store = self._cache.setdefault("full", {})
        key = np.asarray(theta, dtype=float).tobytes()
        hit = store.pop(key, None)
        if hit is None:
            hit = self.loglike(slice(None), theta)
            if len(store) >= 2:
                store.pop(next(iter(store)))
        store[key] = hit
        return hit

    def log_posterior(self, thetas):
        """Tempered log posterior (up to a constant) at each row of ``thetas``."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        out = np.empty(len(thetas))
        for k, th in enumerate(thetas):
            out[k] = self.log_prior(th) + np.sum(self.loglike(slice(None), th)) / self.temperature
        return out


def _scalar_theta(theta):
    return float(np.asarray(theta, dtype=float).reshape(-1)[0])


def _compressed(data, bins):
    # per-bin data means and counts; exact for terms linear in x and
    # second-order accurate otherwise
    x = data.features[:, 0]
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return np.array([lo]), np.array([float(x.size)])
    edges = np.linspace(lo, hi, bins + 1)
    which = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    counts = np.bincount(which, minlength=bins).astype(float)
    sums = np.bincount(which, weights=x, minlength=bins)
    keep = counts > 0
    return sums[keep] / counts[keep], counts[keep]


@dataclass(frozen=True, eq=False)
class GaussianMeanModel(TargetModel):
    """Unit-variance normal with unknown mean and a flat prior (d = 1)."""

    dim = 1

    def loglike(self, idx, theta):
        return gaussian_mean_loglike_term(self.data.features[idx, 0], _scalar_theta(theta))

    def loglike_term(self, datum, theta):
        return float(gaussian_mean_loglike_term(datum, _scalar_theta(theta)))

    def log_posterior(self, thetas):
        # sum_i -(x_i - t)^2/2 = -N/2 (t - xbar)^2 + const
        t = np.asarray(thetas, dtype=float).reshape(-1)
        x = self.data.features[:, 0]
        return -0.5 * self.N * (t - x.mean()) ** 2 / self.temperature


@dataclass(frozen=True, eq=False)
class MixtureModel(TargetModel):
    """Two-component mixture with tied means and a diagonal normal prior.

    ``x ~ 0.5 N(t1, 2) + 0.5 N(t1 + t2, 2)``, ``t ~ N(0, diag(10, 1))``.
    """

    prior_var: tuple = MIXTURE_PRIOR_VAR
    sigma_x2: float = MIXTURE_SIGMA_X2

    dim = 2

    def log_prior(self, theta):
        t = np.asarray(theta, dtype=float)
        return float(-0.5 * (t[0] ** 2 / self.prior_var[0] + t[1] ** 2 / self.prior_var[1]))

    def loglike(self, idx, theta):
        return mixture_loglike_term(self.data.features[idx, 0], theta, self.sigma_x2)

    def loglike_term(self, datum, theta):
        return float(mixture_loglike_term(datum, theta, self.sigma_x2))

    def log_posterior(self, thetas, bins=1024):
        """Tempered log posterior at many points.

        The dataset is summarized by per-bin means and counts, which keeps
        grid evaluation over a million data points cheap. ``bins=None``
        evaluates every datum.
        """
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if bins is None:
            xs, ws = self.data.features[:, 0], None
        else:
            key = ("compressed", bins)
            if key not in self._cache:
                self._cache[key] = _compressed(self.data, bins)
            xs, ws = self._cache[key]
        t1 = thetas[:, 0:1]
        t2 = thetas[:, 1:2]
        s2 = self.sigma_x2
        norm = _LOG_HALF - 0.5 * math.log(2.0 * math.pi * s2)
        out = np.empty(len(thetas))
        chunk = max(1, 2_000_000 // max(1, xs.size))
        for a in range(0, len(thetas), chunk):
            b = a + chunk
            ll = norm + np.logaddexp(
                -((xs[None, :] - t1[a:b]) ** 2) / (2 * s2),
                -((xs[None, :] - t1[a:b] - t2[a:b]) ** 2) / (2 * s2),
            )
            out[a:b] = ll.sum(axis=1) if ws is None else ll @ ws
        prior = -0.5 * (thetas[:, 0] ** 2 / self.prior_var[0]
                        + thetas[:, 1] ** 2 / self.prior_var[1])
        return prior + out / self.temperature


@dataclass(frozen=True, eq=False)
class LogisticRegressionModel(TargetModel):
    """Binary logistic regression, labels in {-1, +1}, flat prior."""

    @property
    def dim(self):
        return self.data.d

    def loglike(self, idx, theta):
        return logreg_loglike_term(self.data.features[idx], self.data.labels[idx], theta)

    def loglike_term(self, datum, theta):
        x, y = datum
        return float(logreg_loglike_term(x, y, theta))


# -- log-likelihood ratios -----------------------------------------------------

def lambda_terms(model, idx, theta, theta_new):
    """Per-datum ``Lambda_i = (N/K) * (l(x_i, theta') - l(x_i, theta))``.

    Raises
    ------
    ModelDomainError
        If any term is not finite; ``.index`` carries the dataset row.
    """
    if isinstance(idx, slice):
        new = model.full_loglike(theta_new) if idx == slice(None) else model.loglike(idx, theta_new)
        old = model.full_loglike(theta) if idx == slice(None) else model.loglike(idx, theta)
    else:
        new = model.loglike(idx, theta_new)
        old = model.loglike(idx, theta)
    with np.errstate(invalid="ignore", over="ignore"):
        out = (model.N / model.temperature) * (new - old)
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        row = np.arange(model.N)[idx][bad]
        raise ModelDomainError(f"non-finite log-likelihood term at datum {row}", index=int(row))
    return out


def lambda_term(model, datum, theta, theta_new, index=None):
    """Scalar version of :func:`lambda_terms` for one datum."""
    d = model.loglike_term(datum, theta_new) - model.loglike_term(datum, theta)
    out = (model.N / model.temperature) * d
    if not math.isfinite(out):
        raise ModelDomainError(f"non-finite log-likelihood term at datum {index}", index=index)
    return out


@dataclass(frozen=True)
class RandomWalkProposal:
    """Symmetric Gaussian random walk with diagonal covariance."""

    cov: np.ndarray

    def __post_init__(self):
        cov = np.atleast_1d(np.asarray(self.cov, dtype=float))
        if np.any(cov < 0):
            raise ValueError("proposal variances must be non-negative")
        object.__setattr__(self, "cov", cov)

    @classmethod
    def isotropic(cls, variance, dim):
        return cls(np.full(dim, float(variance)))

    def log_ratio(self, theta, theta_new):
        """``log q(theta'|theta) - log q(theta|theta')``, zero by symmetry."""
        return 0.0

    def propose(self, theta, rng):
        theta = np.asarray(theta, dtype=float)
        return theta + np.sqrt(self.cov) * rng.standard_normal(theta.shape)


def propose(proposal, theta, rng):
    return proposal.propose(theta, rng)


def psi(u, model, proposal, theta, theta_new):
    """``log(u * q(theta'|theta) p0(theta) / (q(theta|theta') p0(theta')))``."""
    if not u > 0:
        raise ValueError(f"psi needs u in (0, 1], got {u}")
    return (math.log(u) + proposal.log_ratio(theta, theta_new)
            + model.log_prior(theta) - model.log_prior(theta_new))
