"""Huber loss primitives and exact one-dimensional location fits.

Everything here works on plain numpy arrays.  The loss with threshold
``c > 0`` is quadratic (``u**2 / 2``) inside ``[-c, c]`` and linear
(``c * (|u| - c/2)``) outside, so its derivative is the clip of ``u``
to ``[-c, c]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "Dataset",
    "SparseFit",
    "huber_loss",
    "huber_grad",
    "huber_intercept",
    "huber_intercept_interval",
    "empirical_risk",
    "zero_norm",
    "HARD_ZERO_RTOL",
]

# A coefficient counts as zero when |theta_j| <= HARD_ZERO_RTOL * max(1, ||theta||_inf).
HARD_ZERO_RTOL = 1e-10


def _check_c(c: float) -> float:
    c = float(c)
    if not np.isfinite(c) or c <= 0:
        raise DomainError(f"loss threshold c must be a positive finite real, got {c!r}")
    return c


def huber_loss(u, c):
    """Elementwise Huber loss with threshold ``c``."""
    c = _check_c(c)
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("huber_loss got non-finite residuals")
    a = np.abs(u)
    return np.where(a <= c, 0.5 * u * u, c * (a - 0.5 * c))


def huber_grad(u, c):
    """Derivative of the Huber loss: ``clip(u, -c, c)``."""
    c = _check_c(c)
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("huber_grad got non-finite residuals")
    return np.clip(u, -c, c)


@dataclass
class Dataset:
    """Design matrix ``x`` (n, d) paired with responses ``y`` (n,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2:
            raise DomainError(f"x must be 2-D (n, d), got shape {x.shape}")
        if y.ndim != 1:
            raise DomainError(f"y must be 1-D, got shape {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise DomainError(f"x has {x.shape[0]} rows but y has {y.shape[0]} entries")
        if x.shape[0] < 1:
            raise DomainError("dataset must contain at least one observation")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise DomainError("dataset contains non-finite values")
        self.x = x
        self.y = y

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.x[idx], self.y[idx])


def zero_norm(theta, rtol: float = HARD_ZERO_RTOL) -> int:
    """Count coefficients that are nonzero beyond the hard-zero tolerance."""
    theta = np.asarray(theta, dtype=float)
    if theta.size == 0:
        return 0
    cut = rtol * max(1.0, float(np.max(np.abs(theta))))
    return int(np.sum(np.abs(theta) > cut))


@dataclass
class SparseFit:
    """Affine predictor ``x -> q + x @ theta``."""

    q: float
    theta: np.ndarray
    meta: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.q = float(self.q)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.ndim != 1:
            raise DomainError("theta must be a 1-D coefficient vector")

    @property
    def zero_norm(self) -> int:
        return zero_norm(self.theta)

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.theta.shape[0]:
            raise DomainError(
                f"design width {x.shape[-1]} does not match coefficient "
                f"length {self.theta.shape[0]}"
            )
        if x.ndim == 1:
            return self.q + float(x @ self.theta)
        return self.q + x @ self.theta


def empirical_risk(c, fit, x, y) -> float:
    """Mean Huber loss of the residuals ``y - fit.predict(x)``."""
    y = np.asarray(y, dtype=float)
    resid = y - fit.predict(x)
    return float(np.mean(huber_loss(resid, c)))


def huber_intercept_interval(c, values) -> tuple[float, float]:
    """Exact minimizer interval of ``q -> sum_i huber(values_i - q)``.

    The derivative ``g(q) = -sum_i clip(values_i - q, -c, c)`` is continuous,
    nondecreasing and piecewise linear with breakpoints at ``values_i -+ c``;
    its zero set is a closed interval which this routine computes exactly from
    the sorted breakpoints.
    """
    c = _check_c(c)
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise DomainError("huber_intercept needs at least one value")
    if not np.all(np.isfinite(v)):
        raise DomainError("huber_intercept got non-finite values")

    # Work with s(q) = sum_i clip(v_i - q, -c, c), nonincreasing in q.
    bps = np.unique(np.concatenate([v - c, v + c]))
    svals = np.clip(v[None, :] - bps[:, None], -c, c).sum(axis=1)
    # Snap float-noise sums to exact zero.  On a segment with no point in the
    # quadratic band the true sum is a multiple of c, so a value at rounding
    # scale can only be a genuine zero (a flat minimizer stretch) or sit within
    # one ulp of a root; without the snap such a stretch collapses to a point
    # and the tie-break below loses its room to move.
    tol = 32.0 * np.finfo(float).eps * v.size * (float(np.max(np.abs(bps))) + c)
    svals[np.abs(svals) <= tol] = 0.0

    # s > 0 left of the zero set, s < 0 right of it.
    if svals[0] <= 0.0:  # zero set starts at or before the first breakpoint
        lo_idx = 0
    else:
        lo_idx = int(np.searchsorted(-svals, 0.0, side="left"))  # first s <= 0
    if svals[-1] >= 0.0:
        hi_idx = bps.size - 1
    else:
        hi_idx = int(np.searchsorted(-svals, 0.0, side="right")) - 1  # last s >= 0

    def root_between(k):
        # linear segment [bps[k], bps[k+1]] with s changing sign strictly
        s0, s1 = svals[k], svals[k + 1]
        return bps[k] + (bps[k + 1] - bps[k]) * s0 / (s0 - s1)

    if svals[lo_idx] == 0.0:
        q_lo = bps[lo_idx]
    elif lo_idx == 0:
        q_lo = bps[0]  # unreachable for finite data (s = n*c > 0 there); safety
    else:
        q_lo = root_between(lo_idx - 1)

    if svals[hi_idx] == 0.0:
        q_hi = bps[hi_idx]
    elif hi_idx == bps.size - 1:
        q_hi = bps[-1]
    else:
        q_hi = root_between(hi_idx)

    if q_hi < q_lo:  # unique interior minimizer found from both sides
        q_lo = q_hi = root_between(max(lo_idx - 1, 0))
    return float(q_lo), float(q_hi)


def huber_intercept(c, values, anchor: float = 0.0) -> float:
    """Location fit under the Huber loss with a deterministic tie-break.

    Among all minimizers of ``q -> sum_i huber(values_i - q)`` (a closed
    interval), returns the one closest to ``-anchor``, i.e. the projection
    of ``-anchor`` onto the minimizer interval.  With ``anchor = 0`` this is
    the minimum-magnitude minimizer.
    """
    q_lo, q_hi = huber_intercept_interval(c, values)
    target = -float(anchor)
    return float(min(max(target, q_lo), q_hi))
