"""Piecewise-constant regression on a fixed partition of the real line.

A partition into ``d`` consecutive intervals turns 1-D regression into
fitting a step function: a level per interval, with ``k`` "jumps" where
consecutive levels differ.  ``fit_k_jumps`` minimizes the empirical Huber
risk over all step functions with at most ``k`` jumps by exact dynamic
programming over contiguous interval blocks; the per-block cost is the exact
1-D Huber location objective, so the DP is an exact ERM, not a heuristic.

Each block's optimal level is generally a closed interval, not a point.  The
remaining freedom is resolved deterministically: choose levels inside their
intervals driving the data-weighted mean level ``sum_j P_n(I_j) * u_j`` as
close to zero as possible (a box-constrained 1-D projection solved by a
greedy water-filling pass), then give any data-free block the level of its
nearest fitted neighbor.

``jump_to_sparse`` rewrites a step function in the cumulative-indicator
basis, where the coefficient vector is the first differences of the levels
and the number of nonzeros equals the number of jumps — the bridge between
segmentation and sparse regression.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .losses import SparseFit, huber_intercept_interval, huber_loss

__all__ = [
    "IntervalPartition",
    "StepFunction",
    "AggregateStep",
    "fit_k_jumps",
    "jump_to_sparse",
    "indicator_design",
    "agghoo_jumps",
    "write_step_csv",
]


@dataclass
class IntervalPartition:
    """``d`` consecutive intervals covering the real line.

    ``boundaries`` holds the ``d - 1`` finite cut points in increasing
    order; interval ``j`` is ``[b[j-1], b[j])`` with the outer two extending
    to -inf and +inf.  Every interval's supremum is the next one's infimum.
    """

    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float).ravel()
        if b.size and (not np.all(np.isfinite(b)) or np.any(np.diff(b) <= 0)):
            raise DomainError("boundaries must be finite and strictly increasing")
        self.boundaries = b

    @property
    def d(self) -> int:
        return self.boundaries.size + 1

    def locate(self, u) -> np.ndarray:
        """Interval index (0-based) of each point; right-closed cuts."""
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise DomainError("points must be finite")
        return np.searchsorted(self.boundaries, u, side="right")

    def masses(self, u) -> np.ndarray:
        """Empirical measure of each interval under the sample ``u``."""
        u = np.asarray(u, dtype=float)
        counts = np.bincount(self.locate(u), minlength=self.d)
        return counts / max(u.size, 1)

    def edges(self):
        """(left, right) endpoint arrays, with infinities on the outside."""
        left = np.concatenate([[-np.inf], self.boundaries])
        right = np.concatenate([self.boundaries, [np.inf]])
        return left, right


@dataclass
class StepFunction:
    """One level per interval of a partition."""

    partition: IntervalPartition
    levels: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float).ravel()
        if lv.size != self.partition.d:
            raise DomainError(
                f"need one level per interval: got {lv.size} for {self.partition.d}"
            )
        if not np.all(np.isfinite(lv)):
            raise DomainError("levels must be finite")
        self.levels = lv

    @property
    def jump_count(self) -> int:
        return int(np.sum(self.levels[1:] != self.levels[:-1]))

    @property
    def jump_indices(self) -> np.ndarray:
        """Positions ``j`` (0-based) where ``levels[j + 1] != levels[j]``."""
        return np.flatnonzero(self.levels[1:] != self.levels[:-1])

    def __call__(self, u):
        return self.levels[self.partition.locate(u)]


# ---------------------------------------------------------------------------
# Exact k-jump ERM
# ---------------------------------------------------------------------------

def _block_cost(c, ys):
    """Exact minimal Huber cost of one block and its minimizer interval."""
    if ys.size == 0:
        return 0.0, -np.inf, np.inf
    lo, hi = huber_intercept_interval(c, ys)
    cost = float(np.sum(huber_loss(ys - lo, c)))
    return cost, lo, hi


def fit_k_jumps(partition: IntervalPartition, u, y, k: int, c: float) -> StepFunction:
    """Empirical-risk-minimizing step function with at most ``k`` jumps.

    Dynamic programming over the last block boundary gives the exact optimum
    in O(d^2 k) block-cost evaluations.  Block levels are then placed inside
    their exact minimizer intervals by the data-weighted-mean tie-break (see
    module docstring), and data-free blocks copy their nearest fitted
    neighbor, so the reported jump count can fall below ``k``.
    """
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if u.size != y.size:
        raise DomainError(f"u has {u.size} points but y has {y.size}")
    if u.size == 0:
        raise DomainError("need at least one observation")
    if not np.all(np.isfinite(y)):
        raise DomainError("responses must be finite")
    c = float(c)
    if not np.isfinite(c) or c <= 0:
        raise DomainError("loss threshold c must be positive")
    d = partition.d
    k = int(k)
    if k < 0 or k >= d:
        raise DomainError(f"jump count must satisfy 0 <= k <= d - 1 = {d - 1}")

    bins = partition.locate(u)
    by_interval = [y[bins == j] for j in range(d)]

    # cost[a][b], interval of minimizers, for each contiguous block a..b.
    cost = np.zeros((d, d))
    box_lo = np.zeros((d, d))
    box_hi = np.zeros((d, d))
    counts = np.zeros((d, d), dtype=int)
    for a in range(d):
        acc = []
        for b in range(a, d):
            acc.append(by_interval[b])
            ys = np.concatenate(acc) if acc else np.empty(0)
            cst, lo, hi = _block_cost(c, ys)
            cost[a, b] = cst
            box_lo[a, b] = lo
            box_hi[a, b] = hi
            counts[a, b] = ys.size

    # best[j][b]: minimal cost of covering intervals 0..b with j jumps.
    best = np.full((k + 1, d), np.inf)
    first = np.zeros((k + 1, d), dtype=int)  # start of the last block
    best[0] = cost[0]
    for j in range(1, k + 1):
        for b in range(j, d):
            # last block starts at a in [j, b]
            cands = best[j - 1, j - 1 : b] + cost[j : b + 1, b]
            a_rel = int(np.argmin(cands))
            best[j, b] = cands[a_rel]
            first[j, b] = j + a_rel

    # Recover the blocks of the k-jump optimum.
    blocks = []
    b = d - 1
    for j in range(k, 0, -1):
        a = int(first[j, b])
        blocks.append((a, b))
        b = a - 1
    blocks.append((0, b))
    blocks.reverse()

    levels = _assign_levels(partition, u, blocks, cost, box_lo, box_hi, counts)
    step = StepFunction(partition=partition, levels=levels)

    # Hard sanity bound on the total variation of the fit: each fitted level
    # lies inside its block's data range, so consecutive-level moves cannot
    # exceed a data-controlled budget.
    tv = float(np.sum(np.abs(np.diff(levels))))
    budget = 2.0 * k * c + 4.0 * float(np.sum(np.abs(y)))
    if tv > budget + 1e-9 * (1.0 + budget):
        raise AssertionError(
            f"total variation {tv:.6g} exceeds the bound {budget:.6g}"
        )
    return step


def _assign_levels(partition, u, blocks, cost, box_lo, box_hi, counts):
    """Place block levels: tie-break toward zero weighted mean, then copy
    neighbors onto data-free blocks."""
    n = u.size
    segs = []
    for (a, b) in blocks:
        w = counts[a, b] / n
        segs.append((a, b, w, box_lo[a, b], box_hi[a, b]))

    fitted = [s for s in segs if s[2] > 0]
    s_lo = sum(s[2] * s[3] for s in fitted)
    s_hi = sum(s[2] * s[4] for s in fitted)
    values = {}
    if s_lo >= 0.0:
        for a, b, w, lo, hi in fitted:
            values[a] = lo
    elif s_hi <= 0.0:
        for a, b, w, lo, hi in fitted:
            values[a] = hi
    else:
        # Raise levels from their lower ends, in block order, until the
        # weighted mean reaches zero.
        need = -s_lo
        for a, b, w, lo, hi in fitted:
            room = w * (hi - lo)
            take = min(need, room)
            values[a] = lo + take / w
            need = max(need - take, 0.0)

    # Data-free blocks copy the nearest fitted block (left first).
    levels = np.empty(partition.d)
    block_vals = []
    for i, (a, b, w, lo, hi) in enumerate(segs):
        if w > 0:
            block_vals.append(values[a])
        else:
            block_vals.append(None)
    for i in range(len(segs)):
        if block_vals[i] is None:
            left = next((block_vals[j] for j in range(i - 1, -1, -1) if block_vals[j] is not None), None)
            if left is None:
                left = next(block_vals[j] for j in range(i + 1, len(segs)) if block_vals[j] is not None)
            block_vals[i] = left
    for (a, b, _w, _lo, _hi), val in zip(segs, block_vals):
        levels[a : b + 1] = val
    return levels


# ---------------------------------------------------------------------------
# Reduction to sparse regression
# ---------------------------------------------------------------------------

def jump_to_sparse(partition: IntervalPartition, step: StepFunction) -> SparseFit:
    """Rewrite a step function as intercept + first-difference coefficients.

    In the cumulative-indicator basis (feature ``m`` is the indicator of
    lying at or beyond interval ``m + 1``) the step function is the affine
    predictor with intercept ``levels[0]`` and coefficients
    ``diff(levels)``; its zero-norm is the jump count.
    """
    if step.partition.d != partition.d:
        raise DomainError("step function does not match the partition")
    theta = np.diff(step.levels)
    return SparseFit(q=float(step.levels[0]), theta=theta, meta={"basis": "cumulative-indicator"})


def indicator_design(partition: IntervalPartition, u) -> np.ndarray:
    """Design matrix of the cumulative-indicator basis at the points ``u``.

    Column ``m`` is ``1`` when the point lies in interval ``m + 1`` or
    later, so ``q + Z @ diff(levels)`` reproduces the step function exactly.
    """
    bins = partition.locate(u)
    m = np.arange(1, partition.d)
    return (bins[:, None] >= m[None, :]).astype(float)


# ---------------------------------------------------------------------------
# Aggregated hold-out over jump counts
# ---------------------------------------------------------------------------

@dataclass
class JumpRecord:
    subset: np.ndarray
    jumps_hat: int
    step: StepFunction


@dataclass
class AggregateStep:
    """Pointwise average of per-split selected step functions."""

    step: StepFunction
    per_split: list = field(repr=False)

    def __call__(self, u):
        return self.step(u)


def agghoo_jumps(partition: IntervalPartition, u, y, splits, c: float,
                 max_jumps: int | None = None) -> AggregateStep:
    """Aggregated hold-out over the family of k-jump fits, k = 0..max_jumps.

    For each subset: fit every jump count on the subset, pick the smallest
    validation-risk count on the complement (ties to fewer jumps), then
    average the selected step functions level by level.  Subsets are
    processed in content-sorted order so the result is invariant to the
    scheme's ordering.
    """
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if u.size != y.size:
        raise DomainError(f"u has {u.size} points but y has {y.size}")
    if splits.V < 1:
        raise DomainError("split scheme is empty")
    if splits.n != u.size:
        raise DomainError(f"split scheme indexes {splits.n} points but data has {u.size}")
    if max_jumps is None:
        max_jumps = partition.d - 1
    max_jumps = int(max_jumps)
    if not (0 <= max_jumps <= partition.d - 1):
        raise DomainError("max_jumps out of range")

    order = sorted(range(splits.V), key=lambda v: tuple(int(i) for i in splits.subsets[v]))
    records = []
    for v in order:
        T = splits.subsets[v]
        comp = splits.complement(v)
        fits = [fit_k_jumps(partition, u[T], y[T], kk, c) for kk in range(max_jumps + 1)]
        risks = np.array(
            [float(np.mean(huber_loss(y[comp] - f(u[comp]), c))) for f in fits]
        )
        kk = int(np.argmin(risks))
        records.append(JumpRecord(subset=T, jumps_hat=kk, step=fits[kk]))

    levels = np.mean(np.stack([rec.step.levels for rec in records]), axis=0)
    return AggregateStep(step=StepFunction(partition, levels), per_split=records)


# ---------------------------------------------------------------------------
# CSV dump
# ---------------------------------------------------------------------------

def write_step_csv(step: StepFunction, file):
    """One row per interval: ``interval_left, interval_right, level``."""
    import csv as _csv

    left, right = step.partition.edges()
    with open(file, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["interval_left", "interval_right", "level"])
        for lo, hi, lv in zip(left, right, step.levels):
            w.writerow([repr(float(lo)), repr(float(hi)), repr(float(lv))])
