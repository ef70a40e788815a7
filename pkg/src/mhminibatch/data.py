"""Datasets: IDX (MNIST) files, synthetic generators, minibatch indices.

Random streams are numpy ``Generator`` objects backed by PCG64. Chains and
trials get independent streams from ``SeedSequence`` so results are
reproducible per seed.
"""
import gzip
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "IdxFormatError",
    "make_rng",
    "trial_seed",
    "parse_idx",
    "write_idx",
    "load_idx",
    "mnist_binary_subset",
    "load_mnist_binary",
    "generate_mixture_data",
    "generate_gaussian_data",
    "draw_minibatch",
    "IndexStream",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    """``N x d`` feature matrix with optional labels."""

    features: np.ndarray
    labels: np.ndarray = None
    provenance: str = ""

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("features must be a non-empty N x d matrix")
        object.__setattr__(self, "features", x)
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (x.shape[0],):
                raise ValueError(f"labels have shape {y.shape}, expected ({x.shape[0]},)")
            object.__setattr__(self, "labels", y)

    @property
    def N(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]


def make_rng(seed):
    """PCG64 generator for ``seed`` (an int, a SeedSequence, or a Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(master_seed, trial):
    """Seed for trial ``trial``: ``SeedSequence([master_seed, trial])``."""
    return np.random.SeedSequence([int(master_seed), int(trial)])


# -- IDX -----------------------------------------------------------------------

class IdxFormatError(ValueError):
    pass


_IDX_UBYTE = 0x08


def parse_idx(data):
    """Decode an IDX container of unsigned bytes.

    The header is a big-endian magic ``0x000008nn`` (``nn`` = number of
    dimensions) followed by ``nn`` big-endian 32-bit sizes. The payload must
    match the declared size exactly.
    """
    data = bytes(data)
    if len(data) < 4:
        raise IdxFormatError("truncated: missing magic number")
    zero, dtype, ndim = struct.unpack(">HBB", data[:4])
    if zero != 0 or dtype != _IDX_UBYTE or ndim == 0:
        raise IdxFormatError(f"bad magic 0x{data[:4].hex()}: expected 0x000008nn")
    head = 4 + 4 * ndim
    if len(data) < head:
        raise IdxFormatError("truncated: incomplete dimension header")
    dims = struct.unpack(f">{ndim}I", data[4:head])
    size = 1
    for n in dims:
        size *= n
    if size > len(data) - head:
        raise IdxFormatError(
            f"truncated: header declares {size} bytes, payload has {len(data) - head}"
        )
    if size < len(data) - head:
        raise IdxFormatError(
            f"trailing data: header declares {size} bytes, payload has {len(data) - head}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=head).reshape(dims)


def write_idx(array):
    """Encode a ``uint8`` array as IDX bytes."""
    a = np.asarray(array)
    if a.dtype != np.uint8:
        raise ValueError("write_idx supports uint8 arrays only")
    if a.ndim == 0 or a.ndim > 255:
        raise ValueError("array must have between 1 and 255 dimensions")
    header = struct.pack(">HBB", 0, _IDX_UBYTE, a.ndim)
    header += struct.pack(f">{a.ndim}I", *a.shape)
    return header + np.ascontiguousarray(a).tobytes()


def load_idx(path):
    """Read an IDX file, decompressing gzip transparently."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


def mnist_binary_subset(images, labels, pos_digit=7, neg_digit=1, provenance=""):
    """Keep two digit classes, flatten pixels to ``[0, 1]``, map labels to +/-1."""
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.shape[0] != labels.shape[0]:
        raise ValueError("images and labels differ in length")
    keep = (labels == pos_digit) | (labels == neg_digit)
    x = images[keep].reshape(int(keep.sum()), -1).astype(float) / 255.0
    y = np.where(labels[keep] == pos_digit, 1, -1).astype(np.int8)
    return Dataset(x, y, provenance)


def load_mnist_binary(images_path, labels_path, pos_digit=7, neg_digit=1):
    return mnist_binary_subset(
        load_idx(images_path), load_idx(labels_path), pos_digit, neg_digit,
        provenance=f"{images_path}|{labels_path}",
    )


# -- synthetic data ------------------------------------------------------------

def generate_mixture_data(n, theta=(0.0, 1.0), seed=0, sigma_x2=2.0):
    """``n`` draws from ``0.5 N(t1, s2) + 0.5 N(t1 + t2, s2)``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = make_rng(seed)
    t1, t2 = float(theta[0]), float(theta[1])
    coin = rng.integers(0, 2, size=n)
    x = t1 + t2 * coin + np.sqrt(sigma_x2) * rng.standard_normal(n)
    return Dataset(x, provenance=f"mixture(n={n}, theta=({t1!r}, {t2!r}), seed={seed})")


def generate_gaussian_data(n, mean=0.5, seed=0):
    """``n`` draws from ``N(mean, 1)``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = make_rng(seed)
    x = mean + rng.standard_normal(n)
    return Dataset(x, provenance=f"gaussian(n={n}, mean={mean!r}, seed={seed})")


# -- minibatches ---------------------------------------------------------------

def draw_minibatch(n_total, b, rng, exclude=None):
    """Draw ``b`` distinct indices uniformly from ``range(n_total)`` minus ``exclude``.

    Parameters
    ----------
    n_total : int
        Dataset size (or a :class:`Dataset`).
    b : int
    rng : numpy.random.Generator
    exclude : array_like of int, optional
        Indices already used in this acceptance test.
    """
    if isinstance(n_total, Dataset):
        n_total = n_total.N
    exclude = np.empty(0, dtype=np.int64) if exclude is None else np.asarray(exclude, dtype=np.int64)
    remaining = n_total - exclude.size
    if b < 0 or b > remaining:
        raise ValueError(
            f"insufficient remaining data: asked for {b}, {remaining} of {n_total} left"
        )
    if b == 0:
        return np.empty(0, dtype=np.int64)
    if 2 * (b + exclude.size) > n_total:
        pool = np.setdiff1d(np.arange(n_total), exclude, assume_unique=True)
        return rng.choice(pool, size=b, replace=False)
    # sparse regime: rejection against the exclusion set
    taken = set(exclude.tolist())
    out = []
    while len(out) < b:
        cand = rng.integers(0, n_total, size=2 * (b - len(out)) + 8)
        for c in cand.tolist():
            if c not in taken:
                taken.add(c)
                out.append(c)
                if len(out) == b:
                    break
    return np.array(out, dtype=np.int64)


class IndexStream:
    """Distinct uniform indices from ``range(n_total)``, drawn in chunks.

    Each :meth:`draw` returns indices not handed out before, uniformly over
    the remaining ones, so successive draws extend one sample without
    replacement. Candidates are drawn in bulk and filtered against a mask
    of used indices; once more than half the data would be used, the
    remaining indices are shuffled once and handed out in order.
    """

    def __init__(self, n_total, rng):
        self.n_total = int(n_total)
        self.rng = rng
        self.count = 0
        self._used = None
        self._pool = None
        self._pos = 0

    @property
    def remaining(self):
        return self.n_total - self.count

    def draw(self, b):
        b = int(b)
        if b < 0 or b > self.remaining:
            raise ValueError(
                f"insufficient remaining data: asked for {b}, "
                f"{self.remaining} of {self.n_total} left"
            )
        if self._pool is None and 2 * (self.count + b) > self.n_total:
            if self._used is None:
                self._pool = self.rng.permutation(self.n_total)
            else:
                self._pool = np.flatnonzero(~self._used)
                self.rng.shuffle(self._pool)
            self._used = None
        if self._pool is not None:
            out = self._pool[self._pos:self._pos + b]
            self._pos += b
            self.count += b
            return out.astype(np.int64, copy=False)
        if self._used is None:
            self._used = np.zeros(self.n_total, dtype=bool)
        used = self._used
        parts = []
        need = b
        while need > 0:
            cand = self.rng.integers(0, self.n_total, size=need + need // 8 + 8)
            _, first = np.unique(cand, return_index=True)
            cand = cand[np.sort(first)]
            cand = cand[~used[cand]][:need]
            used[cand] = True
            parts.append(cand)
            need -= cand.size
        out = np.concatenate(parts)
        self.count += b
        return out.astype(np.int64, copy=False)
