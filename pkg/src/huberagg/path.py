"""Huberized lasso: exact solution paths and a certified single-penalty solver.

The problem solved throughout, for data ``(x, y)`` with ``n`` rows:

    minimize over (q, theta):
        mean(huber(y - q - x @ theta, c)) + lam * ||theta||_1
    subject to (optionally):
        ||theta||_1 <= n ** alpha

The intercept ``q`` is never penalized.  Two independent routes are
implemented so they can cross-check each other:

* ``homotopy_path`` tracks the piecewise-linear path ``lam -> (q, theta)``
  exactly, emitting a knot at every event (a residual crossing the elbow
  ``+-c``, a coefficient entering or leaving the active set, or the l1 cap
  becoming active).
* ``solve_fixed_lambda`` runs an accelerated proximal-gradient iteration at
  one penalty value until the KKT certificate passes.

Both are validated by ``kkt_certificate``, which is plain gradient
arithmetic on the data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PathError, SolverError
from .losses import (
    HARD_ZERO_RTOL,
    Dataset,
    SparseFit,
    huber_intercept,
    huber_loss,
    zero_norm,
)

__all__ = [
    "PathConfig",
    "SolutionPath",
    "ZeroNormFamily",
    "kkt_certificate",
    "lambda_max",
    "build_grid",
    "homotopy_path",
    "zero_norm_family",
    "solve_fixed_lambda",
    "fit_grid_family",
    "write_path_csv",
]

GRID_SIZE = 100
GRID_MIN_RATIO = 0.05


@dataclass
class PathConfig:
    """Knobs shared by the path tracker and the fixed-penalty solver.

    ``alpha`` controls the l1 cap ``n ** alpha`` (active when
    ``cap_enabled``); it must lie in (1/2, 1).  ``knot_tol`` is the relative
    lambda window inside which simultaneous events are merged into one knot,
    and ``cond_limit`` the condition-number guard beyond which a degenerate
    active-set system is an error.
    """

    c: float
    alpha: float = 0.75
    cap_enabled: bool = True
    kkt_tol: float = 1e-7
    max_knots: int | None = None
    knot_tol: float = 1e-10
    cond_limit: float = 1e12
    max_iter: int = 200_000

    def __post_init__(self):
        self.c = float(self.c)
        if not np.isfinite(self.c) or self.c <= 0:
            raise DomainError(f"c must be positive and finite, got {self.c!r}")
        if not (0.5 < self.alpha < 1.0):
            raise DomainError(f"alpha must lie in (1/2, 1), got {self.alpha!r}")
        if self.kkt_tol <= 0:
            raise DomainError("kkt_tol must be positive")
        if self.knot_tol <= 0:
            raise DomainError("knot_tol must be positive")
        if self.cond_limit <= 1:
            raise DomainError("cond_limit must exceed 1")

    def cap(self, n: int) -> float | None:
        return float(n) ** self.alpha if self.cap_enabled else None

    def knot_budget(self, n: int, d: int) -> int:
        if self.max_knots is not None:
            return int(self.max_knots)
        return 10 * min(n, d) + 100


# ---------------------------------------------------------------------------
# KKT certificate
# ---------------------------------------------------------------------------

def kkt_certificate(c, x, y, q, theta, lam, cap=None):
    """Max violation of the first-order conditions at ``(q, theta)``.

    With ``g_j = mean(clip(y - q - x@theta, -c, c) * x[:, j])`` the fit is
    optimal iff the mean clipped residual vanishes, ``|g_j| <= lam`` on the
    zero coefficients and ``g_j == lam * sign(theta_j)`` on the active ones.
    When the l1 cap is attained, the same holds with ``lam`` replaced by
    ``lam + mu`` for a single multiplier ``mu >= 0``; the best such ``mu``
    is computed here in closed form (the violation is piecewise linear and
    convex in ``mu``).

    Returns ``(residual, mu_hat)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    n = x.shape[0]
    psi = np.clip(y - q - x @ theta, -c, c)
    g = x.T @ psi / n
    g0 = abs(float(np.mean(psi)))

    if theta.size == 0:
        return g0, 0.0
    cut = HARD_ZERO_RTOL * max(1.0, float(np.max(np.abs(theta))))
    active = np.abs(theta) > cut

    mu = 0.0
    if (
        cap is not None
        and np.any(active)
        and float(np.sum(np.abs(theta))) >= cap * (1.0 - 1e-9)
    ):
        v = g[active] * np.sign(theta[active]) - lam
        over = np.abs(g[~active]) - lam if np.any(~active) else np.array([-np.inf])
        hi = max(float(np.max(v)), float(np.max(over)))
        lo = float(np.min(v))
        mu = max(0.0, 0.5 * (hi + lo))

    lam_eff = lam + mu
    viol = g0
    if np.any(active):
        viol = max(viol, float(np.max(np.abs(g[active] - lam_eff * np.sign(theta[active])))))
    if np.any(~active):
        viol = max(viol, max(0.0, float(np.max(np.abs(g[~active]))) - lam_eff))
    return viol, mu


# ---------------------------------------------------------------------------
# Entry penalty and grid
# ---------------------------------------------------------------------------

def lambda_max(c, x, y):
    """Smallest penalty at which the all-zero coefficient fit is optimal.

    Computed from the intercept-only fit: ``max_j |mean(clip(y - q0) * x_j)|``
    where ``q0`` is the exact Huber location of ``y`` (minimum-magnitude
    tie-break).  Invariant under shifts of ``y``.
    """
    data = Dataset(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    q0 = huber_intercept(c, data.y, anchor=0.0)
    psi = np.clip(data.y - q0, -c, c)
    if data.d == 0:
        return 0.0
    return float(np.max(np.abs(data.x.T @ psi))) / data.n


def build_grid(lam_max, size=GRID_SIZE, min_ratio=GRID_MIN_RATIO):
    """Geometric penalty grid from ``lam_max`` down to ``min_ratio * lam_max``."""
    lam_max = float(lam_max)
    if not np.isfinite(lam_max) or lam_max <= 0:
        raise DomainError(f"grid needs a positive finite lambda_max, got {lam_max!r}")
    if size < 2:
        raise DomainError("grid size must be at least 2")
    return np.geomspace(lam_max, min_ratio * lam_max, int(size))


# ---------------------------------------------------------------------------
# Solution path container
# ---------------------------------------------------------------------------

@dataclass
class SolutionPath:
    """Piecewise-linear path ``lam -> (q, theta)`` sampled at its knots.

    ``lambdas`` is decreasing.  Between consecutive knots the fit is affine
    in ``lam``; above the first knot it equals the first knot's (null) fit;
    below the last knot it either stays constant (cap attained) or continues
    along ``terminal_dir``.
    """

    lambdas: np.ndarray
    qs: np.ndarray
    thetas: np.ndarray
    events: list
    zero_norms: np.ndarray
    terminal_dir_q: float
    terminal_dir_theta: np.ndarray
    truncated_at_cap: bool
    knot_budget_exceeded: bool
    n: int
    d: int
    c: float
    alpha: float
    cap: float | None

    @property
    def num_knots(self) -> int:
        return len(self.lambdas)

    def knot_fit(self, m: int) -> SparseFit:
        return SparseFit(self.qs[m], self.thetas[m].copy(), meta={"knot": m, "lam": float(self.lambdas[m])})

    def fit_at(self, lam: float) -> SparseFit:
        """Exact path fit at penalty ``lam > 0`` (affine between knots)."""
        lam = float(lam)
        if not np.isfinite(lam) or lam < 0:
            raise DomainError(f"lambda must be nonnegative and finite, got {lam!r}")
        lams = self.lambdas
        if lam >= lams[0] or len(lams) == 1:
            return self.knot_fit(0)
        if lam <= lams[-1]:
            if self.truncated_at_cap:
                return self.knot_fit(len(lams) - 1)
            dl = lam - lams[-1]
            q = self.qs[-1] + dl * self.terminal_dir_q
            theta = self.thetas[-1] + dl * self.terminal_dir_theta
            return SparseFit(q, theta)
        # knots are decreasing: find m with lams[m] >= lam >= lams[m + 1]
        m = int(np.searchsorted(-lams, -lam, side="right")) - 1
        lo, hi = lams[m + 1], lams[m]
        t = (lam - lo) / (hi - lo)
        q = t * self.qs[m] + (1.0 - t) * self.qs[m + 1]
        theta = t * self.thetas[m] + (1.0 - t) * self.thetas[m + 1]
        return SparseFit(q, theta)


@dataclass
class ZeroNormFamily:
    """Path fits reindexed by sparsity level ``k = 0 .. K``.

    ``fits[k]`` is the path fit at the last (smallest-lambda) knot whose
    coefficient vector has exactly ``k`` nonzeros; sparsity levels never
    attained on the path map to the null fit (index 0 always does).
    ``source_knot[k]`` records the knot used, or -1 for the null fit.
    """

    K: int
    fits: list
    source_knot: list

    @property
    def selection_fits(self) -> list:
        """Fits for k = 1..K, the index set model selection ranges over."""
        return self.fits[1:]


def zero_norm_family(path: SolutionPath, K: int) -> ZeroNormFamily:
    K = int(K)
    if K < 0:
        raise DomainError("K must be nonnegative")
    null_fit = SparseFit(path.qs[0], np.zeros(path.d), meta={"null": True})
    fits = [null_fit] * (K + 1)
    source = [-1] * (K + 1)
    for m in range(path.num_knots):
        z = int(path.zero_norms[m])
        if 0 < z <= K:
            fits[z] = path.knot_fit(m)
            source[z] = m
    fits[0] = null_fit
    source[0] = -1
    return ZeroNormFamily(K=K, fits=fits, source_knot=source)


# ---------------------------------------------------------------------------
# Homotopy path tracker
# ---------------------------------------------------------------------------

_EVENT_ORDER = {"elbow": 0, "leave": 1, "enter": 2, "cap": 3}

_TRACE = None  # debug hook: list collecting recovery decisions when set


def _guarded_solve(G, B, cond_limit):
    """Solve the symmetric PSD system ``G w = B`` (columns of B) exactly.

    Eigen-directions below ``max_eig / cond_limit`` are dropped; if the
    right-hand side has mass on a dropped direction the system is
    inconsistent and the path cannot continue.  The leading entry of the
    segment Gram counts quadratic-zone rows, so a top eigenvalue below 1/2
    means the zone is empty and the whole matrix is roundoff residue --
    without the absolute test such a matrix looks well-conditioned (all
    eigenvalues equally tiny) and would "invert" to garbage.
    """
    evals, evecs = np.linalg.eigh(G)
    emax = float(evals[-1]) if evals.size else 0.0
    bscale = max(1.0, float(np.max(np.abs(B)))) if B.size else 1.0
    if emax < 0.5:
        if B.size and np.max(np.abs(B)) > 1e-9 * bscale:
            raise PathError("active-set system is singular and inconsistent")
        return np.zeros_like(B)
    keep = evals > emax / cond_limit
    Bt = evecs.T @ B
    if not np.all(keep):
        drop = ~keep
        if np.max(np.abs(Bt[drop])) > 1e-9 * bscale:
            raise PathError(
                "active-set system exceeds the condition guard "
                f"(cond ~ {emax / max(np.min(np.abs(evals[drop])), 1e-300):.2e})"
            )
    inv = np.where(keep, 1.0 / np.where(keep, evals, 1.0), 0.0)
    return evecs @ (inv[:, None] * Bt)


class _PathState:
    """Mutable bookkeeping for one homotopy run."""

    def __init__(self, config: PathConfig, data: Dataset):
        self.cfg = config
        self.x = data.x
        self.y = data.y
        self.n, self.d = data.x.shape
        self.c = config.c
        self.cap = config.cap(self.n)
        self.xh = np.hstack([np.ones((self.n, 1)), self.x])  # augmented design
        self.zone = np.zeros(self.n, dtype=np.int8)
        self.active = np.zeros(self.d, dtype=bool)
        self.sign = np.zeros(self.d, dtype=np.int8)
        # running sums over the quadratic zone / linear zones
        self.SQ = np.zeros((self.d + 1, self.d + 1))
        self.tQy = np.zeros(self.d + 1)
        self.tLin = np.zeros(self.d + 1)

    def init_zones(self, q0: float):
        r = self.y - q0
        self.zone[:] = 0
        self.zone[r > self.c] = 1
        self.zone[r < -self.c] = -1
        quad = self.zone == 0
        xq = self.xh[quad]
        self.SQ = xq.T @ xq
        self.tQy = xq.T @ self.y[quad]
        self.tLin = self.c * (
            self.xh[self.zone == 1].sum(axis=0) - self.xh[self.zone == -1].sum(axis=0)
        )

    def flip_zone(self, i: int, znew: int):
        zold = int(self.zone[i])
        if zold == znew:
            return
        xi = self.xh[i]
        if zold == 0:
            self.SQ -= np.outer(xi, xi)
            self.tQy -= self.y[i] * xi
        else:
            self.tLin -= self.c * zold * xi
        if znew == 0:
            self.SQ += np.outer(xi, xi)
            self.tQy += self.y[i] * xi
        else:
            self.tLin += self.c * znew * xi
        self.zone[i] = znew

    def cols(self):
        idx = np.flatnonzero(self.active)
        return idx, np.concatenate([[0], idx + 1])

    def solve_segment(self):
        """Base point and lambda-direction of the current affine segment."""
        idx, cols = self.cols()
        G = self.SQ[np.ix_(cols, cols)]
        b0 = self.tQy[cols] + self.tLin[cols]
        e = np.zeros(cols.size)
        e[1:] = self.sign[idx]
        B = np.stack([b0, -self.n * e], axis=1)
        W = _guarded_solve(G, B, self.cfg.cond_limit)
        return idx, cols, W[:, 0], W[:, 1]


def _theta_full(d, idx, vec):
    out = np.zeros(d)
    out[idx] = vec
    return out


def homotopy_path(config: PathConfig, data: Dataset) -> SolutionPath:
    """Track the full huberized-lasso path from ``lambda_max`` downward.

    Emits one knot per event batch (events within a relative ``knot_tol``
    lambda window are merged and processed in the order: elbow crossings,
    departures, entries, cap).  Raises ``PathError`` on degenerate
    configurations that cannot be resolved.
    """
    st = _PathState(config, data)
    n, d, c = st.n, st.d, st.c
    y, x = st.y, st.x

    q0 = huber_intercept(c, y, anchor=0.0)
    psi0 = np.clip(y - q0, -c, c)
    g0 = x.T @ psi0 / n if d else np.zeros(0)
    lam_max_val = float(np.max(np.abs(g0))) if d else 0.0

    knots_lam, knots_q, knots_theta, knots_events = [], [], [], []

    def finish(term_q=0.0, term_theta=None, truncated=False, budget=False):
        thetas = np.array(knots_theta) if knots_theta else np.zeros((0, d))
        lams = np.array(knots_lam)
        qs = np.array(knots_q)
        znorms = np.array([zero_norm(t) for t in thetas], dtype=int)
        # canonical intercept tie-break at every knot: project the
        # minimum-|q + theta.mean_x| point of the exact minimizer interval
        xbar = x.mean(axis=0) if d else np.zeros(0)
        for m in range(len(lams)):
            anchor = float(thetas[m] @ xbar)
            qs[m] = huber_intercept(c, y - x @ thetas[m], anchor=anchor)
        return SolutionPath(
            lambdas=lams,
            qs=qs,
            thetas=thetas,
            events=knots_events,
            zero_norms=znorms,
            terminal_dir_q=float(term_q),
            terminal_dir_theta=term_theta if term_theta is not None else np.zeros(d),
            truncated_at_cap=truncated,
            knot_budget_exceeded=budget,
            n=n,
            d=d,
            c=c,
            alpha=config.alpha,
            cap=st.cap,
        )

    scale0 = max(1.0, lam_max_val)
    if d == 0 or lam_max_val <= 1e-15 * scale0 or lam_max_val == 0.0:
        # degenerate design: the null fit is optimal for every penalty
        knots_lam.append(0.0)
        knots_q.append(q0)
        knots_theta.append(np.zeros(d))
        knots_events.append([("terminal", -1)])
        return finish()

    st.init_zones(q0)

    def try_null_slide(lam_at):
        """Slide along a Gram null direction to escape a saturated knot.

        Once the active set saturates the quadratic zone (|active| + 1
        unknowns vs |zone 0| rows) the Gram matrix turns singular and the
        minimizer at ``lam_at`` is a whole tie segment: moving along a null
        direction leaves the fit on quadratic-zone rows, and hence the entire
        gradient, unchanged.  The solution for smaller penalties continues
        from the far end of that segment, so slide until the first kink -- a
        linear-zone residual reaching the elbow (which frees capacity), a
        coefficient reaching zero, or the l1 cap -- and record the endpoint
        as a second knot at the same penalty.
        """
        idx, cols = st.cols()
        G = st.SQ[np.ix_(cols, cols)]
        evals, evecs = np.linalg.eigh(G)
        emax = float(evals[-1])
        if emax < 0.5:
            # G's leading entry counts the quadratic-zone rows, so a tiny top
            # eigenvalue means the zone is empty and every direction is null
            nullmask = np.ones(evals.size, dtype=bool)
        else:
            nullmask = evals <= emax / config.cond_limit
        if not np.any(nullmask):
            if _TRACE is not None:
                _TRACE.append(("no-null", len(knots_lam) - 1, evals.tolist()))
            return "no"
        nb = evecs[:, nullmask]
        esig = np.zeros(cols.size)
        esig[1:] = st.sign[idx]
        u = nb @ (nb.T @ esig)
        unorm = float(np.linalg.norm(u))
        if unorm <= 1e-10:
            if _TRACE is not None:
                _TRACE.append(("no-u", len(knots_lam) - 1, evals.tolist()))
            return "no"
        u /= unorm
        th_now = knots_theta[-1]
        w_now = np.concatenate([[knots_q[-1]], th_now[idx]])
        zc = st.xh[:, cols]
        rho = zc @ u
        r0 = y - zc @ w_now
        tiny = 1e-12
        btol = 1e-9 * max(1.0, st.c)
        best_t, best = np.inf, None
        for i in np.flatnonzero(st.zone != 0):
            zi = int(st.zone[i])
            if abs(rho[i]) <= tiny:
                continue
            gap = r0[i] - zi * st.c
            if abs(gap) <= btol:
                # already on the elbow: if the slide pushes it inward it must
                # join the quadratic zone before any motion happens
                if zi * rho[i] > tiny and 0.0 < best_t:
                    best_t, best = 0.0, ("elbow", int(i))
                continue
            ti = gap / rho[i]
            if tiny < ti < best_t:
                best_t, best = ti, ("elbow", int(i))
        for k, j in enumerate(idx):
            if abs(u[1 + k]) <= tiny:
                continue
            tj = -th_now[j] / u[1 + k]
            if tiny < tj < best_t:
                best_t, best = tj, ("leave", int(j))
        capv = config.cap(n)
        if capv is not None:
            rate = float(st.sign[idx] @ u[1:])
            l0 = float(np.abs(th_now).sum())
            if rate > tiny and l0 < capv:
                tc = (capv - l0) / rate
                if tiny < tc < best_t:
                    best_t, best = tc, ("cap", -1)
        if best is None:
            if _TRACE is not None:
                _TRACE.append(("no-kink", len(knots_lam) - 1))
            return "no"
        w_slid = w_now + best_t * u
        th_slid = th_now.copy()
        th_slid[idx] = w_slid[1:]
        kind, i = best
        if kind == "leave":
            th_slid[i] = 0.0
        knots_lam.append(lam_at)
        knots_q.append(float(w_slid[0]))
        knots_theta.append(th_slid)
        knots_events.append([(kind, i)])
        if _TRACE is not None:
            xmat = st.xh[:, 1:]
            r_end = y - w_slid[0] - xmat @ th_slid
            g_end = xmat.T @ np.clip(r_end, -st.c, st.c) / n
            _TRACE.append(
                (
                    "slide",
                    len(knots_lam) - 1,
                    kind,
                    i,
                    best_t,
                    {
                        "evals": evals.tolist(),
                        "nnull": int(np.sum(nullmask)),
                        "Q": np.flatnonzero(st.zone == 0).tolist(),
                        "u": u.tolist(),
                        "rho_lin": {int(ii): float(rho[ii]) for ii in np.flatnonzero(st.zone != 0)},
                        "end_excess": float(
                            np.max(np.abs(g_end[st.active]) - lam_at) if np.any(st.active) else 0.0
                        ),
                        "end_mean": float(np.mean(np.clip(r_end, -st.c, st.c))),
                    },
                )
            )
        if kind == "elbow":
            st.flip_zone(i, 0)
        elif kind == "leave":
            st.active[i] = False
            st.sign[i] = 0
        elif kind == "cap":
            return "cap"
        return "slid"

    def settle_segment(lam_at, tags):
        """Solve the segment continuing below ``lam_at``, repairing degeneracies.

        Saturated configurations are resolved by null-direction slides; a
        grazing enter whose gradient only touched the boundary is retracted
        as a last resort.  Returns the settled segment, or None when a slide
        ran into the l1 cap (the path truncates there).
        """
        entered = [pair for pair in tags if pair[0] == "enter"]
        slides = 0
        while True:
            try:
                return _solve_with_consistency(st, lam_at)
            except PathError:
                # zone flips made while the failed attempt tried to stabilize
                # are boundary settling at this knot and are kept: an exit that
                # empties the quadratic zone is often exactly what makes the
                # configuration singular, and the slide must see that state
                if _TRACE is not None:
                    import sys

                    _TRACE.append(
                        ("fail", len(knots_lam) - 1, lam_at, str(sys.exc_info()[1]))
                    )
                status = try_null_slide(lam_at) if slides < n + d + 8 else "no"
                if status == "cap":
                    return None
                if status == "slid":
                    slides += 1
                    continue
                if entered:
                    kind, i = entered.pop()
                    st.active[i] = False
                    st.sign[i] = 0
                    tags.remove((kind, i))
                    if _TRACE is not None:
                        _TRACE.append(("retract", len(knots_lam) - 1, kind, i))
                    continue
                raise

    # first knot: the null fit at lambda_max, where the first variables enter
    tie = config.knot_tol * max(1.0, lam_max_val)
    entering = np.flatnonzero(np.abs(g0) >= lam_max_val - tie)
    knots_lam.append(lam_max_val)
    knots_q.append(q0)
    knots_theta.append(np.zeros(d))
    knots_events.append([("enter", int(j)) for j in entering])
    for j in entering:
        st.active[j] = True
        st.sign[j] = 1 if g0[j] > 0 else -1

    lam_hi = lam_max_val
    lam_floor = 1e-12 * lam_max_val
    budget = config.knot_budget(n, d)
    carried = settle_segment(lam_max_val, knots_events[-1])
    if carried is None:
        return finish(truncated=True)

    grazed = set()
    while True:
        idx, cols, base, dirv = carried
        if len(knots_lam) >= budget:
            warnings.warn(
                f"homotopy stopped after reaching the knot budget ({budget})",
                RuntimeWarning,
            )
            return finish(term_q=dirv[0], term_theta=_theta_full(d, idx, dirv[1:]), budget=True)

        zc = st.xh[:, cols]
        pr_base = y - zc @ base
        pr_dir = -(zc @ dirv)

        events, grazing = _scan_events(st, lam_hi, lam_floor, idx, base, dirv, pr_base, pr_dir)

        # Grazing kinks happen "now": execute the top-priority one as a
        # zero-length event at lam_hi, re-settle, and store a duplicate-
        # lambda knot, then rescan.  Each (kind, index) runs at most once
        # per lambda so a flip the settling logic rejects cannot loop.
        pick = None
        if grazing and len(grazed) <= n + d + 8:
            fresh = [g for g in grazing if (g[1], g[2]) not in grazed]
            if fresh:
                pick = min(fresh, key=lambda g: (_EVENT_ORDER[g[1]], g[2]))
        if pick is not None:
            _, kind, i, extra = pick
            grazed.add((kind, i))
            if kind == "cap":
                w_now = base + lam_hi * dirv
                knots_lam.append(lam_hi)
                knots_q.append(w_now[0])
                knots_theta.append(_theta_full(d, idx, w_now[1:]))
                knots_events.append([("cap", -1)])
                return finish(truncated=True)
            if kind == "elbow":
                zold = int(st.zone[i])
                st.flip_zone(i, 0 if zold != 0 else int(extra))
            elif kind == "leave":
                st.active[i] = False
                st.sign[i] = 0
            elif kind == "enter":
                st.active[i] = True
                st.sign[i] = int(extra)
            carried = settle_segment(lam_hi, [(kind, int(i))])
            if carried is None:
                return finish(truncated=True)
            g_idx, g_cols, g_base, g_dir = carried
            w_now = g_base + lam_hi * g_dir
            knots_lam.append(lam_hi)
            knots_q.append(w_now[0])
            knots_theta.append(_theta_full(d, g_idx, w_now[1:]))
            knots_events.append([(kind, int(i))])
            continue

        if not events:
            return finish(term_q=dirv[0], term_theta=_theta_full(d, idx, dirv[1:]))

        lam_next = max(ev[0] for ev in events)
        w_next = base + lam_next * dirv
        # Merge events only when they coincide as vertices.  Closeness in
        # lambda alone is not enough: on a nearly singular segment the
        # direction is huge, and a lambda window of knot_tol can span an
        # O(1) stretch of coefficient space.  Capping the window so the
        # extrapolation across it moves the solution by at most ~1e-8
        # keeps genuinely distinct events (whose order the next segment
        # must re-decide) out of a single batch.
        window = config.knot_tol * max(1.0, lam_next)
        dmag = float(np.max(np.abs(dirv)))
        wscale = max(1.0, float(np.max(np.abs(w_next))))
        if dmag * window > 1e-8 * wscale:
            window = 1e-8 * wscale / dmag
        batch = sorted(
            (ev for ev in events if ev[0] >= lam_next - window),
            key=lambda ev: (_EVENT_ORDER[ev[1]], ev[2]),
        )
        theta_next = _theta_full(d, idx, w_next[1:])
        hit_cap = False
        tags = []
        for _, kind, i, extra in batch:
            tags.append((kind, i))
            if kind == "elbow":
                zold = int(st.zone[i])
                znew = 0 if zold != 0 else int(extra)
                st.flip_zone(i, znew)
            elif kind == "leave":
                st.active[i] = False
                st.sign[i] = 0
                theta_next[i] = 0.0
            elif kind == "enter":
                st.active[i] = True
                st.sign[i] = int(extra)
                theta_next[i] = 0.0
            elif kind == "cap":
                hit_cap = True

        knots_lam.append(lam_next)
        knots_q.append(w_next[0])
        knots_theta.append(theta_next)
        knots_events.append(tags)

        if hit_cap:
            return finish(truncated=True)

        carried = settle_segment(lam_next, tags)
        if carried is None:
            return finish(truncated=True)
        lam_hi = lam_next
        grazed = set()


def _solve_with_consistency(st: _PathState, lam_hi: float):
    """Solve the segment at ``lam_hi`` and settle boundary memberships.

    Observations sitting exactly on the elbow (and coefficients that just
    entered) must be assigned to the side consistent with the direction of
    motion as lambda decreases; inconsistent guesses are flipped and the
    segment re-solved.
    """
    c = st.c
    for _ in range(40):
        idx, cols, base, dirv = st.solve_segment()
        zc = st.xh[:, cols]
        w = base + lam_hi * dirv
        r = st.y - zc @ w
        slope = -(zc @ dirv)  # d r / d lambda
        stol = 1e-10 * max(1.0, float(np.max(np.abs(slope))) if slope.size else 0.0)
        btol = 1e-7 * max(1.0, c)

        changed = False
        for bsign in (1, -1):
            on_boundary = np.flatnonzero(np.abs(r - bsign * c) <= btol)
            for i in on_boundary:
                z = int(st.zone[i])
                s = float(slope[i])
                if z == bsign and bsign * s > stol:
                    st.flip_zone(i, 0)
                    changed = True
                elif z == 0 and bsign * s < -stol:
                    st.flip_zone(i, bsign)
                    changed = True
        if not changed:
            # sign-consistency of freshly entered coefficients: theta_j moves
            # as -h * dir_j below the knot and must match its KKT sign
            th = w[1:]
            dth = dirv[1:]
            bad = np.abs(th) <= 1e-9 * max(1.0, float(np.max(np.abs(th))) if th.size else 0.0)
            viol = bad & (st.sign[idx] * dth > 1e-9 * max(1.0, float(np.max(np.abs(dth))) if dth.size else 0.0))
            if np.any(viol):
                raise PathError(
                    "entering coefficient moves against its KKT sign "
                    f"(columns {idx[viol].tolist()}); degenerate configuration"
                )
            return idx, cols, base, dirv
    raise PathError("elbow membership did not stabilize; degenerate configuration")


def _scan_events(st: _PathState, lam_hi, lam_floor, idx, base, dirv, pr_base, pr_dir):
    """Path events in ``(lam_floor, lam_hi - guard]`` plus grazing kinks.

    Returns ``(events, grazing)``.  Events are tuples ``(lam_star, kind,
    index, extra)`` where ``extra`` is the boundary sign for elbow events
    and the entering sign for enter events.  Grazing kinks are crossings
    that fall inside the anti-stall guard band ``(lam_hi - guard, lam_hi]``
    yet are genuine: their equality is violated at ``lam_hi`` itself by a
    clear margin, which only happens on a fast (nearly singular) segment
    whose solution sweeps a finite stretch within a hair of lambda.  Such
    kinks must be executed at ``lam_hi`` rather than discarded -- dropping
    one lets the scan fire a phantom crossing further down the same line
    (e.g. the far side of the elbow tube).  Crossings in the band whose
    equality already holds at ``lam_hi`` within noise are the just-fired
    knot equalities and are not reported.
    """
    cfg = st.cfg
    guard = cfg.knot_tol * max(1.0, lam_hi)
    upper = lam_hi - guard
    if upper <= lam_floor:
        return [], []
    events = []
    grazing = []
    w_hi = base + lam_hi * dirv
    wscale = max(1.0, float(np.max(np.abs(w_hi))))

    # elbow crossings: r_i(lam) = +-c
    nz = np.abs(pr_dir) > 1e-300
    r_hi = pr_base + lam_hi * pr_dir
    for bsign in (1, -1):
        lam_star = np.full(st.n, -1.0)
        lam_star[nz] = (bsign * st.c - pr_base[nz]) / pr_dir[nz]
        ok = (lam_star > lam_floor) & (lam_star <= upper)
        for i in np.flatnonzero(ok):
            events.append((float(lam_star[i]), "elbow", int(i), bsign))
        gr = (lam_star > upper) & (lam_star <= lam_hi)
        for i in np.flatnonzero(gr):
            if abs(r_hi[i] - bsign * st.c) > 1e-5 * max(1.0, st.c):
                grazing.append((float(lam_star[i]), "elbow", int(i), bsign))

    # departures: theta_j(lam) = 0 for active j
    th_base, th_dir = base[1:], dirv[1:]
    nz = np.abs(th_dir) > 1e-300
    lam_star = np.where(nz, -th_base / np.where(nz, th_dir, 1.0), -1.0)
    ok = (lam_star > lam_floor) & (lam_star <= upper)
    for k in np.flatnonzero(ok):
        events.append((float(lam_star[k]), "leave", int(idx[k]), 0))
    gr = (lam_star > upper) & (lam_star <= lam_hi)
    for k in np.flatnonzero(gr):
        if abs(w_hi[1 + k]) > 1e-5 * wscale:
            grazing.append((float(lam_star[k]), "leave", int(idx[k]), 0))

    # entries: |g_j(lam)| = lam for inactive j
    quad = st.zone == 0
    xq = st.xh[quad]
    gb = (xq.T @ pr_base[quad] + st.tLin) / st.n
    gd = (xq.T @ pr_dir[quad]) / st.n
    inactive = np.flatnonzero(~st.active)
    if inactive.size:
        gbj = gb[inactive + 1]
        gdj = gd[inactive + 1]
        g_hi = gbj + lam_hi * gdj
        for ssign in (1, -1):
            den = ssign - gdj
            nz = np.abs(den) > 1e-300
            lam_star = np.where(nz, gbj / np.where(nz, den, 1.0), -1.0)
            ok = (lam_star > lam_floor) & (lam_star <= upper)
            for k in np.flatnonzero(ok):
                events.append((float(lam_star[k]), "enter", int(inactive[k]), ssign))
            gr = (lam_star > upper) & (lam_star <= lam_hi)
            for k in np.flatnonzero(gr):
                if abs(abs(g_hi[k]) - lam_hi) > 1e-5 * max(1.0, lam_hi):
                    grazing.append((float(lam_star[k]), "enter", int(inactive[k]), ssign))

    # cap: sum_j |theta_j(lam)| reaches the l1 budget
    if st.cap is not None and idx.size:
        s = st.sign[idx].astype(float)
        ell_b = float(s @ th_base)
        ell_d = float(s @ th_dir)
        ell_hi = ell_b + lam_hi * ell_d
        if abs(ell_d) > 1e-300 and ell_hi <= st.cap:
            lam_star = (st.cap - ell_b) / ell_d
            if lam_floor < lam_star <= upper:
                events.append((float(lam_star), "cap", -1, 0))
            elif upper < lam_star <= lam_hi:
                grazing.append((float(lam_star), "cap", -1, 0))

    return events, grazing


# ---------------------------------------------------------------------------
# Proximal-gradient solver (independent of the homotopy)
# ---------------------------------------------------------------------------

def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _project_l1(v, radius):
    """Euclidean projection of ``v`` onto the l1 ball of the given radius."""
    a = np.abs(v)
    total = float(a.sum())
    if total <= radius:
        return v
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - radius
    k = np.arange(1, a.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    tau = css[rho] / (rho + 1.0)
    return np.sign(v) * np.maximum(a - tau, 0.0)


def _tie_break_intercept(c, x, y, theta):
    anchor = float(theta @ x.mean(axis=0)) if x.shape[1] else 0.0
    return huber_intercept(c, y - x @ theta, anchor=anchor)


def _polish(c, x, y, lam, theta, q):
    """One Newton-style solve on the zones/support implied by the iterate.

    Fixing the elbow memberships and the active support turns the KKT
    equalities into a small linear least-squares problem in
    ``(q, theta_active)``.  The caller certifies the result before use.
    """
    n = x.shape[0]
    r = y - q - x @ theta
    quad = np.abs(r) <= c
    cut = HARD_ZERO_RTOL * max(1.0, float(np.max(np.abs(theta))) if theta.size else 0.0)
    act = np.flatnonzero(np.abs(theta) > cut)
    s = np.sign(theta[act])

    ones = np.ones((n, 1))
    A = np.hstack([ones[quad], x[np.ix_(quad, act)]])
    if A.shape[0] == 0:
        return None
    hi = r > c
    lo = r < -c
    lin = c * (
        np.concatenate([[hi.sum() - lo.sum()], x[hi][:, act].sum(axis=0) - x[lo][:, act].sum(axis=0)])
    )
    rhs_y = np.concatenate([[y[quad].sum()], x[np.ix_(quad, act)].T @ y[quad]])
    target = np.concatenate([[0.0], n * lam * s])
    G = A.T @ A
    b = rhs_y + lin - target
    try:
        w, *_ = np.linalg.lstsq(G, b, rcond=None)
    except np.linalg.LinAlgError:
        return None
    theta_new = np.zeros_like(theta)
    theta_new[act] = w[1:]
    return float(w[0]), theta_new


def solve_fixed_lambda(config: PathConfig, data: Dataset, lam: float, init: SparseFit | None = None) -> SparseFit:
    """Certified solution at a single penalty via accelerated proximal gradient.

    Runs FISTA (with function-value restarts and a Lipschitz step from the
    augmented design) until the KKT certificate passes at ``kkt_tol``,
    attempting a Newton-style polish on the identified zones/support along
    the way.  Raises ``SolverError`` if the iteration budget is exhausted.
    """
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise DomainError(f"lambda must be nonnegative and finite, got {lam!r}")
    x, y = data.x, data.y
    n, d = x.shape
    c = config.c
    cap = config.cap(n)
    tol = config.kkt_tol

    xh = np.hstack([np.ones((n, 1)), x])
    L = float(np.linalg.svd(xh, compute_uv=False)[0]) ** 2 / n
    step = 1.0 / L

    if init is not None:
        q = float(init.q)
        theta = np.asarray(init.theta, dtype=float).copy()
    else:
        q = huber_intercept(c, y, anchor=0.0)
        theta = np.zeros(d)
    if cap is not None:
        theta = _project_l1(theta, cap)

    def objective(qv, tv):
        return float(np.mean(huber_loss(y - qv - x @ tv, c))) + lam * float(np.sum(np.abs(tv)))

    def certified(qv, tv):
        qt = _tie_break_intercept(c, x, y, tv)
        resid, _ = kkt_certificate(c, x, y, qt, tv, lam, cap=cap)
        if resid <= tol:
            return SparseFit(qt, tv.copy(), meta={"kkt_residual": resid, "lam": lam})
        return None

    q_prev, theta_prev = q, theta.copy()
    t_mom = 1.0
    f_prev = objective(q, theta)
    check_every = 16

    for it in range(1, config.max_iter + 1):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        beta = (t_mom - 1.0) / t_next
        qv = q + beta * (q - q_prev)
        tv = theta + beta * (theta - theta_prev)

        psi = np.clip(y - qv - x @ tv, -c, c)
        grad = -(xh.T @ psi) / n
        q_new = qv - step * grad[0]
        t_new = _soft_threshold(tv - step * grad[1:], step * lam)
        if cap is not None:
            t_new = _project_l1(t_new, cap)

        q_prev, theta_prev = q, theta
        q, theta, t_mom = q_new, t_new, t_next

        f = objective(q, theta)
        if f > f_prev:  # function-value restart
            t_mom = 1.0
        f_prev = f

        if it % check_every == 0:
            fit = certified(q, theta)
            if fit is not None:
                return fit
            cap_active = cap is not None and float(np.sum(np.abs(theta))) >= cap * (1.0 - 1e-9)
            if not cap_active and it >= 2 * check_every:
                polished = _polish(c, x, y, lam, theta, q)
                if polished is not None:
                    qp, tp = polished
                    if cap is None or float(np.sum(np.abs(tp))) <= cap * (1.0 + 1e-9):
                        fit = certified(qp, tp)
                        if fit is not None:
                            return fit

    resid, _ = kkt_certificate(c, x, y, q, theta, lam, cap=cap)
    raise SolverError(
        f"proximal solver did not reach tolerance {tol:g} in {config.max_iter} iterations "
        f"(last KKT residual {resid:.3e})",
        kkt_residual=resid,
    )


def fit_grid_family(config: PathConfig, data: Dataset, grid) -> list:
    """Certified fits at every grid penalty, warm-started downward."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(~np.isfinite(grid)) or np.any(grid <= 0):
        raise DomainError("grid must be a 1-D array of positive finite penalties")
    if np.any(np.diff(grid) > 0):
        raise DomainError("grid must be nonincreasing")
    fits = []
    warm = None
    for lam in grid:
        warm = solve_fixed_lambda(config, data, float(lam), init=warm)
        fits.append(warm)
    return fits


# ---------------------------------------------------------------------------
# CSV dump
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _event_tag(tags) -> str:
    return ";".join(f"{kind}:{i}" if i >= 0 else kind for kind, i in tags)


def write_path_csv(path: SolutionPath, file, sparse: bool = False):
    """Dump a path to CSV.

    Dense layout: one row per knot with columns
    ``knot_index,lambda,event,zero_norm,q,theta_0..theta_{d-1}``.
    Sparse layout (``sparse=True``): triplet rows ``knot_index,j,theta_j``
    for the nonzero coefficients, plus a companion ``<name>.knots.csv``
    carrying the per-knot metadata columns.
    """
    import csv as _csv
    import os

    if sparse:
        with open(file, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["knot_index", "j", "theta_j"])
            for m in range(path.num_knots):
                row_theta = path.thetas[m]
                for j in np.flatnonzero(row_theta != 0.0):
                    w.writerow([m + 1, int(j), _fmt(row_theta[j])])
        base, ext = os.path.splitext(file)
        with open(base + ".knots" + (ext or ".csv"), "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["knot_index", "lambda", "event", "zero_norm", "q"])
            for m in range(path.num_knots):
                w.writerow(
                    [m + 1, _fmt(path.lambdas[m]), _event_tag(path.events[m]), int(path.zero_norms[m]), _fmt(path.qs[m])]
                )
        return

    with open(file, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(
            ["knot_index", "lambda", "event", "zero_norm", "q"]
            + [f"theta_{j}" for j in range(path.d)]
        )
        for m in range(path.num_knots):
            w.writerow(
                [m + 1, _fmt(path.lambdas[m]), _event_tag(path.events[m]), int(path.zero_norms[m]), _fmt(path.qs[m])]
                + [_fmt(v) for v in path.thetas[m]]
            )
