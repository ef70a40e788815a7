"""Correction distribution for the minibatch Barker test.

A variable ``X_corr`` with density ``C_sigma`` is built so that
``N(0, sigma^2) + X_corr`` is approximately standard logistic. The
deconvolution is discretized on a grid ``Y_j = j*h`` (``j = -N..N``) for the
correction and ``X_i = i*h`` (``i = -2N..2N``) for the sum, with ``h = V/N``,
and solved as a ridge least-squares problem over the per-cell masses
``u_j = h * C_sigma(Y_j)``::

    minimize  ||M u - v||_2^2 + lam * ||u||_2^2
    M_ij = Phi((X_i - Y_j) / sigma),   v_i = S(X_i)

The residual reported everywhere is the sup-norm of ``M u - v`` evaluated
with the finalized (symmetrized, clipped, renormalized) masses.
"""
import math
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import linalg
from scipy.special import ndtr

from .stats import LOGISTIC_VARIANCE, logistic_cdf

__all__ = [
    "CorrectionTable",
    "SingularSystemError",
    "TableFormatError",
    "build_system",
    "solve_ridge",
    "solve_ridge_path",
    "finalize_density",
    "linf_residual",
    "make_correction",
    "sample_correction",
    "save_table",
    "load_table",
    "default_table",
    "DEFAULT_V",
    "TABLE_ENV_VAR",
]

DEFAULT_V = 20.0
TABLE_ENV_VAR = "MHMINIBATCH_TABLE"
_DEFAULT_TABLE_NAME = "correction_sigma1_N4000_lam10.txt"

_MAX_SIGMA = math.sqrt(LOGISTIC_VARIANCE)


class SingularSystemError(np.linalg.LinAlgError):
    """The ridge normal equations are not positive definite."""


class TableFormatError(ValueError):
    """A correction table file is malformed or fails its invariants."""


@dataclass(frozen=True, eq=False)
class CorrectionTable:
    """Discretized correction density on ``Y_j = j * V/N``, ``j = -N..N``.

    ``density`` integrates to one under the cell rule ``h * sum(density)``.
    ``cdf`` holds the cumulative mass at the ``2N + 2`` cell edges
    ``Y_j -/+ h/2``.
    """

    sigma: float
    lam: float
    N: int
    V: float
    density: np.ndarray
    residual: float = float("nan")
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        density = np.asarray(self.density, dtype=float)
        if density.shape != (2 * self.N + 1,):
            raise ValueError(
                f"density has {density.size} entries, expected {2 * self.N + 1}"
            )
        density.setflags(write=False)
        object.__setattr__(self, "density", density)
        cdf = np.concatenate(([0.0], np.cumsum(density) * self.h))
        cdf.setflags(write=False)
        object.__setattr__(self, "cdf", cdf)

    @property
    def h(self):
        return self.V / self.N

    @property
    def grid(self):
        return np.arange(-self.N, self.N + 1) * self.h

    @property
    def edges(self):
        return (np.arange(-self.N, self.N + 2) - 0.5) * self.h

    def mean(self):
        return float(np.sum(self.grid * self.density) * self.h)

    def variance(self):
        y = self.grid
        mu = self.mean()
        return float(np.sum((y - mu) ** 2 * self.density) * self.h)

    def check(self, tol=1e-9):
        """Raise :class:`TableFormatError` if an invariant is violated."""
        d = self.density
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise TableFormatError("invariant violated: negative or non-finite density")
        total = self.h * float(np.sum(d))
        if abs(total - 1.0) > tol:
            raise TableFormatError(f"invariant violated: density mass {total!r} != 1")
        if np.any(np.diff(self.cdf) < 0):
            raise TableFormatError("invariant violated: cdf not monotone")

    def __eq__(self, other):
        if not isinstance(other, CorrectionTable):
            return NotImplemented
        return (
            self.sigma == other.sigma
            and self.lam == other.lam
            and self.N == other.N
            and self.V == other.V
            and (self.residual == other.residual
                 or (math.isnan(self.residual) and math.isnan(other.residual)))
            and np.array_equal(self.density, other.density)
        )


def _grids(N, V):
    h = V / N
    x = np.arange(-2 * N, 2 * N + 1) * h
    y = np.arange(-N, N + 1) * h
    return x, y


def build_system(sigma, N, V=DEFAULT_V):
    """Return ``(M, v)`` for the discretized deconvolution.

    ``M`` has shape ``(4N+1, 2N+1)`` with ``M[i, j] = Phi((X_i - Y_j)/sigma)``
    and ``v[i] = S(X_i)`` the logistic CDF. Row ``i`` corresponds to grid index
    ``i - 2N`` and column ``j`` to ``j - N``.
    """
    if not (0.0 < sigma < _MAX_SIGMA):
        raise ValueError(
            f"no variance left for correction: sigma={sigma} must lie in "
            f"(0, {_MAX_SIGMA:.6f})"
        )
    if N < 1 or int(N) != N:
        raise ValueError("N must be a positive integer")
    if V <= 0:
        raise ValueError("V must be positive")
    N = int(N)
    h = V / N
    x, y = _grids(N, V)
    # X_i - Y_j = (i - j) h, so every entry is a lookup into one vector
    offsets = np.arange(-3 * N, 3 * N + 1)
    phi = ndtr(offsets * (h / sigma))
    col = phi[2 * N:]
    row = phi[2 * N::-1][: 2 * N + 1]
    M = linalg.toeplitz(col, row)
    v = np.asarray(logistic_cdf(x))
    return M, v


def solve_ridge(M, v, lam):
    """Solve ``(M^T M + lam I) u = M^T v`` by Cholesky factorization.

    Raises
    ------
    SingularSystemError
        If the normal matrix is not numerically positive definite (typically
        ``lam = 0`` with rank-deficient ``M``); retry with ``lam > 0``.
    """
    return solve_ridge_path(M, v, [lam])[0]


def solve_ridge_path(M, v, lams):
    """Ridge solutions for several ``lam`` values sharing one ``M^T M``.

    Forming the normal matrix dominates the cost at large ``N``, so sweeps
    over the ridge weight should go through this function.
    """
    lams = [float(lam) for lam in lams]
    if any(lam < 0 for lam in lams):
        raise ValueError("lam must be non-negative")
    M = np.asarray(M, dtype=float)
    v = np.asarray(v, dtype=float)
    if M.ndim != 2 or v.shape != (M.shape[0],):
        raise ValueError(f"dimension mismatch: M {M.shape}, v {v.shape}")
    gram = M.T @ M
    rhs = M.T @ v
    diag = np.diag_indices_from(gram)
    out = []
    for lam in lams:
        A = gram.copy() if len(lams) > 1 else gram
        A[diag] += lam
        try:
            factor = linalg.cho_factor(A, lower=False, overwrite_a=True,
                                       check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                f"normal equations singular at lam={lam}: {exc}; retry with lam > 0"
            ) from exc
        out.append(linalg.cho_solve(factor, rhs, check_finite=False))
    return out


def finalize_density(u, h, sigma=float("nan"), lam=float("nan"), residual=float("nan")):
    """Turn a raw solver vector into a :class:`CorrectionTable`.

    The vector is symmetrized (``u_j`` averaged with ``u_{-j}``), negative
    entries are clipped to zero, and the result is rescaled so that
    ``h * sum(density) == 1``. The scale of ``u`` is irrelevant.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size % 2 != 1:
        raise ValueError("u must be a vector of odd length 2N+1")
    sym = 0.5 * (u + u[::-1])
    dens = np.clip(sym, 0.0, None)
    total = float(np.sum(dens))
    if total <= 0.0:
        raise ValueError("cannot finalize an all-zero (or all-negative) correction")
    dens = dens / (total * h)
    N = (u.size - 1) // 2
    return CorrectionTable(sigma=sigma, lam=lam, N=N, V=N * h, density=dens,
                           residual=residual)


def linf_residual(M, u, v, h=1.0):
    """``max_i |h * sum_j M_ij u_j - v_i|``.

    Pass cell masses with ``h = 1`` or densities with the grid spacing.
    """
    r = h * (np.asarray(M) @ np.asarray(u, dtype=float)) - np.asarray(v)
    return float(np.max(np.abs(r)))


def make_correction(sigma=1.0, lam=10.0, N=4000, V=DEFAULT_V):
    """Build, solve, finalize and measure a correction table."""
    M, v = build_system(sigma, N, V)
    u = solve_ridge(M, v, lam)
    h = V / N
    table = finalize_density(u, h, sigma=float(sigma), lam=float(lam))
    res = linf_residual(M, table.density, v, h)
    return CorrectionTable(sigma=table.sigma, lam=table.lam, N=table.N, V=float(V),
                           density=table.density, residual=res)


def sample_correction(table, rng, size=None):
    """Inverse-transform draws from the tabulated correction density.

    The uniform is located in the CDF by binary search and interpolated
    linearly within its cell, i.e. each cell is sampled uniformly. Results
    are clipped to ``[-V, V]``, so draws that land in empty end cells map to
    the table boundary.
    """
    k = rng.integers(0, 2 ** 53, size=size)
    w = (np.asarray(k, dtype=float) + 0.5) / 2.0 ** 53
    cdf = table.cdf
    # normalize against floating drift in the final cumulative value
    w = w * cdf[-1]
    idx = np.searchsorted(cdf, w, side="right") - 1
    idx = np.clip(idx, 0, table.density.size - 1)
    lo = cdf[idx]
    width = cdf[idx + 1] - lo
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(width > 0, (w - lo) / width, 0.5)
    x = (idx - table.N - 0.5 + frac) * table.h
    x = np.clip(x, -table.V, table.V)
    if np.ndim(x) == 0:
        return float(x)
    return x


# -- file format -------------------------------------------------------------
#
# sigma=<%.17g>
# lambda=<%.17g>
# N=<int>
# V=<%.17g>
# residual=<%.17g>
# <2N+1 density values, %.17g, one per line>
# checksum=<16 hex digits of FNV-1a 64 over every preceding byte>

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data):
    """64-bit FNV-1a hash of ``data`` (bytes)."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _format_table(table):
    lines = [
        f"sigma={table.sigma:.17g}",
        f"lambda={table.lam:.17g}",
        f"N={table.N:d}",
        f"V={table.V:.17g}",
        f"residual={table.residual:.17g}",
    ]
    lines.extend(f"{x:.17g}" for x in table.density)
    body = ("\n".join(lines) + "\n").encode("ascii")
    return body + f"checksum={fnv1a64(body):016x}\n".encode("ascii")


def save_table(table, path):
    """Write ``table`` in the text format documented above."""
    data = _format_table(table)
    with open(path, "wb") as fh:
        fh.write(data)


def _parse_header(line, key, conv):
    prefix = key + "="
    if not line.startswith(prefix):
        raise TableFormatError(f"malformed header: expected '{prefix}...', got {line!r}")
    try:
        return conv(line[len(prefix):])
    except ValueError as exc:
        raise TableFormatError(f"malformed header value in {line!r}") from exc


def parse_table(data):
    """Parse table bytes; see :func:`load_table`."""
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise TableFormatError("table file is not ASCII") from exc
    cut = text.rfind("checksum=")
    if cut < 0 or not text.endswith("\n"):
        raise TableFormatError("truncated table file: missing checksum line")
    body = data[:cut]
    try:
        stored = int(text[cut + len("checksum="):].strip(), 16)
    except ValueError as exc:
        raise TableFormatError("malformed checksum line") from exc
    if fnv1a64(body) != stored:
        raise TableFormatError("checksum mismatch")
    lines = body.decode("ascii").splitlines()
    if len(lines) < 5:
        raise TableFormatError("truncated table file: incomplete header")
    sigma = _parse_header(lines[0], "sigma", float)
    lam = _parse_header(lines[1], "lambda", float)
    N = _parse_header(lines[2], "N", int)
    V = _parse_header(lines[3], "V", float)
    residual = _parse_header(lines[4], "residual", float)
    values = lines[5:]
    if N < 1 or len(values) != 2 * N + 1:
        raise TableFormatError(
            f"truncated table file: {len(values)} density lines for N={N}"
        )
    try:
        density = np.array([float(s) for s in values])
    except ValueError as exc:
        raise TableFormatError("malformed density value") from exc
    table = CorrectionTable(sigma=sigma, lam=lam, N=N, V=V, density=density,
                            residual=residual)
    table.check()
    return table


def load_table(path):
    """Read a table written by :func:`save_table`.

    Raises
    ------
    TableFormatError
        On malformed header, truncation, checksum mismatch or a violated
        density invariant.
    """
    with open(path, "rb") as fh:
        return parse_table(fh.read())


def default_table():
    """The shipped sigma=1 table (N=4000, lam=10), or the file named by the
    ``MHMINIBATCH_TABLE`` environment variable."""
    path = os.environ.get(TABLE_ENV_VAR)
    if path:
        return load_table(path)
    ref = resources.files(__package__).joinpath("data", _DEFAULT_TABLE_NAME)
    return parse_table(ref.read_bytes())
