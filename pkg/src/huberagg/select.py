"""Training-subset schemes and hyperparameter selection by hold-out and averaging.

Four procedures share one notion of an *estimator family*: a trainer object
with an integer attribute ``K`` and a method ``train(data) -> list`` returning
the fits for family indices ``k = 1..K`` (stored at list positions
``0..K-1``).  Two trainers are provided here — ``ZeroNormTrainer`` indexes
fits by sparsity level, ``GridTrainer`` by position on a fixed penalty grid —
and both read their fits off a single cached homotopy path per dataset.

The procedures:

* ``holdout_select`` trains on one subset and picks the index with the best
  validation risk on the complement (smallest index on ties).
* ``agghoo`` averages the hold-out fits over several subsets.
* ``agcv`` reuses each subset's selected index but averages the corresponding
  full-data fits.
* ``cv_select`` picks a single index by the split-averaged validation risk
  and refits on the full data.

Aggregation is order-canonical: subsets are processed sorted by content, so
permuting a scheme's subsets leaves every output bit-identical.  Trainers
carry content-keyed caches so a subset shared by several procedures (or by
nested V prefixes) is trained and validated once; trainer instances are
therefore not thread-safe — use one per worker.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .losses import Dataset, SparseFit, empirical_risk, zero_norm
from .path import PathConfig, SolutionPath, homotopy_path, zero_norm_family

__all__ = [
    "SplitScheme",
    "SplitRecord",
    "AggregatePredictor",
    "monte_carlo_splits",
    "holdout_select",
    "agghoo",
    "agcv",
    "cv_select",
    "predict",
    "PathCache",
    "ZeroNormTrainer",
    "GridTrainer",
]


# ---------------------------------------------------------------------------
# Split schemes
# ---------------------------------------------------------------------------

@dataclass
class SplitScheme:
    """A collection of training-index subsets of common size ``n_t < n``."""

    n: int
    subsets: list
    n_t: int

    def __post_init__(self):
        self.n = int(self.n)
        self.n_t = int(self.n_t)
        if self.n < 2:
            raise DomainError("a split scheme needs at least two observations")
        if not (1 <= self.n_t < self.n):
            raise DomainError(
                f"training size must satisfy 1 <= n_t < n, got n_t={self.n_t}, n={self.n}"
            )
        subs = []
        for t in self.subsets:
            t = np.sort(np.asarray(t, dtype=int))
            if t.size != self.n_t:
                raise DomainError(f"subset has size {t.size}, expected {self.n_t}")
            if t.size != np.unique(t).size:
                raise DomainError("subset contains repeated indices")
            if t[0] < 0 or t[-1] >= self.n:
                raise DomainError("subset index out of range")
            subs.append(t)
        self.subsets = subs

    @property
    def V(self) -> int:
        return len(self.subsets)

    def complement(self, v: int) -> np.ndarray:
        """Validation indices for subset ``v``."""
        return np.setdiff1d(np.arange(self.n), self.subsets[v], assume_unique=True)

    def prefix(self, V: int) -> "SplitScheme":
        """The scheme made of the first ``V`` subsets."""
        if not (1 <= V <= self.V):
            raise DomainError(f"prefix length {V} out of range 1..{self.V}")
        return SplitScheme(self.n, [t.copy() for t in self.subsets[:V]], self.n_t)


def monte_carlo_splits(n: int, tau: float, V: int, seed: int) -> SplitScheme:
    """``V`` independent uniform subsets of ``{0..n-1}`` of size ``floor(tau*n)``.

    Deterministic given ``seed``; subsets are drawn one after another from a
    single stream, so the scheme for a smaller ``V`` with the same seed is a
    prefix of the scheme for a larger one.  The benchmark relies on that to
    couple its V sweeps.
    """
    n = int(n)
    V = int(V)
    tau = float(tau)
    if V < 1:
        raise DomainError("V must be at least 1")
    if n < 2:
        raise DomainError("need at least two observations to split")
    # The 1e-9 nudge keeps floor() stable when tau*n sits on an integer up to
    # float rounding (e.g. 0.8 * 55).
    n_t = int(np.floor(tau * n + 1e-9))
    if not (1 <= n_t < n):
        raise DomainError(
            f"tau={tau} gives training size {n_t}, outside the valid range [1, {n - 1}]"
        )
    rng = np.random.default_rng(seed)
    subsets = [np.sort(rng.choice(n, size=n_t, replace=False)) for _ in range(V)]
    return SplitScheme(n=n, subsets=subsets, n_t=n_t)


# ---------------------------------------------------------------------------
# Prediction and aggregates
# ---------------------------------------------------------------------------

def predict(predictor, x):
    """Affine evaluation ``q + x @ theta`` for any fit-like object."""
    theta = np.asarray(predictor.theta, dtype=float)
    q = float(predictor.q)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != theta.shape[0]:
        raise DomainError(
            f"predictor has {theta.shape[0]} coefficients but x has width {x.shape[-1]}"
        )
    if x.ndim == 1:
        return q + float(x @ theta)
    return q + x @ theta


@dataclass
class SplitRecord:
    """What one subset contributed to an aggregate."""

    subset: np.ndarray
    k_hat: int
    fit: SparseFit


@dataclass
class AggregatePredictor:
    """Arithmetic mean of per-split fits, with the selections that made it."""

    q: float
    theta: np.ndarray
    per_split: list = field(repr=False)

    def __post_init__(self):
        self.q = float(self.q)
        self.theta = np.asarray(self.theta, dtype=float)

    @property
    def zero_norm(self) -> int:
        return zero_norm(self.theta)

    def predict(self, x):
        return predict(self, x)


def _average(records) -> AggregatePredictor:
    qs = np.array([rec.fit.q for rec in records])
    thetas = np.stack([rec.fit.theta for rec in records])
    return AggregatePredictor(
        q=float(np.mean(qs)), theta=np.mean(thetas, axis=0), per_split=list(records)
    )


# ---------------------------------------------------------------------------
# Hold-out rows (shared by all procedures)
# ---------------------------------------------------------------------------

def _data_digest(data: Dataset) -> bytes:
    cached = getattr(data, "_content_digest", None)
    if cached is not None:
        return cached
    h = hashlib.blake2b(digest_size=16)
    h.update(np.ascontiguousarray(data.x).tobytes())
    h.update(np.ascontiguousarray(data.y).tobytes())
    digest = h.digest()
    data._content_digest = digest
    return digest


def _holdout_row(family, data: Dataset, T: np.ndarray, c: float):
    """Train on the subset, validate on its complement: ``(fits, risks)``.

    Results are memoized on ``family.table_cache`` (when present) keyed by the
    full dataset's content and the subset, so the same row feeds hold-out,
    Agghoo, Agcv and CV without retraining.
    """
    T = np.sort(np.asarray(T, dtype=int))
    cache = getattr(family, "table_cache", None)
    key = None
    if cache is not None:
        key = (_data_digest(data), T.tobytes())
        hit = cache.get(key)
        if hit is not None:
            return hit
    if T.size == 0:
        raise DomainError("training subset is empty")
    comp = np.setdiff1d(np.arange(data.n), T, assume_unique=True)
    if comp.size == 0:
        raise DomainError("training subset leaves no validation data")
    fits = family.train(data.subset(T))
    hold = data.subset(comp)
    risks = np.array([empirical_risk(c, f, hold.x, hold.y) for f in fits])
    row = (fits, risks)
    if cache is not None:
        cache[key] = row
    return row


def _canonical_rows(family, data: Dataset, splits: SplitScheme, c: float):
    """Per-subset hold-out rows in content-sorted order."""
    if splits.V < 1:
        raise DomainError("split scheme is empty")
    if splits.n != data.n:
        raise DomainError(
            f"split scheme indexes {splits.n} observations but data has {data.n}"
        )
    order = sorted(range(splits.V), key=lambda v: tuple(int(i) for i in splits.subsets[v]))
    rows = []
    for v in order:
        T = splits.subsets[v]
        fits, risks = _holdout_row(family, data, T, c)
        rows.append((T, fits, risks))
    return rows


def holdout_select(family, data: Dataset, T, c: float):
    """Smallest validation-risk index on one split: ``(k_hat, fit)``.

    ``k_hat`` is 1-based; ties go to the smallest index.
    """
    fits, risks = _holdout_row(family, data, np.asarray(T, dtype=int), c)
    k = int(np.argmin(risks)) + 1
    return k, fits[k - 1]


# ---------------------------------------------------------------------------
# The four procedures
# ---------------------------------------------------------------------------

def agghoo(family, data: Dataset, splits: SplitScheme, c: float) -> AggregatePredictor:
    """Average of the hold-out-selected fits, one per subset."""
    records = []
    for T, fits, risks in _canonical_rows(family, data, splits, c):
        k = int(np.argmin(risks)) + 1
        records.append(SplitRecord(subset=T, k_hat=k, fit=fits[k - 1]))
    return _average(records)


def agcv(family, data: Dataset, splits: SplitScheme, c: float) -> AggregatePredictor:
    """Like ``agghoo`` but every selected index is refit on the full data.

    The full-data family is trained once and shared across subsets.
    """
    rows = _canonical_rows(family, data, splits, c)
    full_fits = family.train(data)
    records = []
    for T, _fits, risks in rows:
        k = int(np.argmin(risks)) + 1
        records.append(SplitRecord(subset=T, k_hat=k, fit=full_fits[k - 1]))
    return _average(records)


def cv_select(family, data: Dataset, splits: SplitScheme, c: float):
    """Split-averaged validation risk per index; full-data refit at the argmin.

    Returns ``(k_hat, fit)`` with 1-based ``k_hat``, ties to the smallest.
    """
    rows = _canonical_rows(family, data, splits, c)
    risk_matrix = np.stack([risks for _T, _fits, risks in rows])
    avg = np.mean(risk_matrix, axis=0)
    k = int(np.argmin(avg)) + 1
    full_fits = family.train(data)
    return k, full_fits[k - 1]


# ---------------------------------------------------------------------------
# Family trainers backed by the homotopy path
# ---------------------------------------------------------------------------

class PathCache:
    """Content-addressed store of solution paths shared between trainers."""

    def __init__(self, config: PathConfig):
        self.config = config
        self._paths: dict = {}

    def path_for(self, data: Dataset) -> SolutionPath:
        key = _data_digest(data)
        path = self._paths.get(key)
        if path is None:
            path = homotopy_path(self.config, data)
            self._paths[key] = path
        return path


class ZeroNormTrainer:
    """Family indexed by sparsity level: fit ``k`` is the path fit at the
    last (smallest-penalty) knot whose coefficient vector has ``k`` nonzeros,
    for ``k = 1..K``; levels never attained map to the null fit."""

    def __init__(self, config: PathConfig, K: int, cache: PathCache | None = None):
        K = int(K)
        if K < 1:
            raise DomainError("family size K must be at least 1")
        self.config = config
        self.K = K
        self.cache = cache if cache is not None else PathCache(config)
        self.table_cache: dict = {}

    def train(self, data: Dataset) -> list:
        path = self.cache.path_for(data)
        return zero_norm_family(path, self.K).selection_fits


class GridTrainer:
    """Family indexed by position on a fixed decreasing penalty grid; fits
    are read off the homotopy path by exact interpolation."""

    def __init__(self, config: PathConfig, grid, cache: PathCache | None = None):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise DomainError("penalty grid must be a nonempty 1-D array")
        if np.any(~np.isfinite(grid)) or np.any(grid <= 0):
            raise DomainError("penalty grid must be positive and finite")
        if np.any(np.diff(grid) > 0):
            raise DomainError("penalty grid must be nonincreasing")
        self.config = config
        self.grid = grid
        self.K = int(grid.size)
        self.cache = cache if cache is not None else PathCache(config)
        self.table_cache: dict = {}

    def train(self, data: Dataset) -> list:
        path = self.cache.path_for(data)
        return [path.fit_at(float(lam)) for lam in self.grid]
