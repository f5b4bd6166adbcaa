"""Benchmark harness: excess-risk experiments over methods, splits and seeds.

``run_experiment`` reproduces the simulation protocol at configurable scale:
draw a training set and a fresh test set per repetition, train both family
parametrizations (penalty grid and sparsity level) off one homotopy path per
training subset, run every requested method at every (tau, V), and score
each predictor by its mean test Huber loss in excess of the Bayes predictor.

Determinism contract: every random draw is keyed by ``(base_seed, stream,
repetition[, tau index])`` through seed-sequence spawning, repetitions are
aggregated by index, and CSV serialization uses exact shortest-roundtrip
floats — so two runs of the same plan produce byte-identical report.csv and
gstats.csv at any parallelism width.  (meta.json carries wall-clock runtime
and is exempt.)

The V sweep is coupled: for a given (repetition, tau) the split scheme for a
smaller V is a prefix of the scheme for a larger one, which is what makes
"risk at V=5 vs risk at V=1" a paired comparison.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np

from .errors import DomainError, PathError, SolverError
from .losses import Dataset, huber_loss
from .path import PathConfig, build_grid, lambda_max
from .select import (
    GridTrainer,
    PathCache,
    ZeroNormTrainer,
    agcv,
    agghoo,
    cv_select,
    monte_carlo_splits,
    predict,
)
from .simulate import SETUP_GENERATORS, derive_seed

__all__ = [
    "ExperimentPlan",
    "ExperimentReport",
    "excess_risk_hat",
    "oracle_risk",
    "g_statistic",
    "run_experiment",
]

_METHODS = ("agghoo", "cv", "agcv")
_PARAMS = ("grid", "zeronorm")

# Stream ids for derived seeds (stable across versions).
_STREAM_DATA = 0
_STREAM_SPLITS = 1
_STREAM_GRID_CAL = 2


# ---------------------------------------------------------------------------
# Scores
# ---------------------------------------------------------------------------

def excess_risk_hat(c: float, predictor, test: Dataset, truth) -> float:
    """Mean test Huber loss of the predictor minus that of the Bayes predictor.

    Computed on the same test points, so it may legitimately be negative on
    finite samples.
    """
    resid = test.y - predict(predictor, test.x)
    bayes = test.y - truth.predict(test.x)
    return float(np.mean(huber_loss(resid, c)) - np.mean(huber_loss(bayes, c)))


def oracle_risk(c: float, fits, test: Dataset, truth):
    """Best test excess risk over a trained family: ``(k_star, risk)``.

    ``k_star`` is 1-based; ties go to the smallest index.
    """
    fits = list(fits)
    if not fits:
        raise DomainError("oracle needs a nonempty family")
    risks = np.array([excess_risk_hat(c, f, test, truth) for f in fits])
    k = int(np.argmin(risks))
    return k + 1, float(risks[k])


def g_statistic(diffs) -> float:
    """Mean over sample standard deviation of paired risk differences.

    Zero-variance input returns 0 when the mean is also 0, and a signed
    infinity otherwise.
    """
    diffs = np.asarray(diffs, dtype=float).ravel()
    if diffs.size < 2:
        raise DomainError("g statistic needs at least two repetitions")
    m = float(np.mean(diffs))
    s = float(np.std(diffs, ddof=1))
    if s == 0.0:
        if m == 0.0:
            return 0.0
        return math.copysign(math.inf, m)
    return m / s


# ---------------------------------------------------------------------------
# Plan
# ---------------------------------------------------------------------------

@dataclass
class ExperimentPlan:
    """Everything a benchmark run depends on, in plain picklable fields.

    ``setup_kwargs`` feeds the chosen setup's config (all fields except
    ``n`` and ``seed``, which the harness controls).  ``zeronorm_K`` caps
    the sparsity-level family; by default it is ``min(smallest training
    subset size, d)``.
    """

    setup: int
    n: int = 100
    test_size: int = 500
    setup_kwargs: dict = field(default_factory=dict)
    methods: tuple = _METHODS
    parametrizations: tuple = _PARAMS
    taus: tuple = (0.8,)
    vs: tuple = (1,)
    repetitions: int = 100
    base_seed: int = 0
    workers: int = 1
    alpha: float = 0.75
    grid_calibration_reps: int = 10
    zeronorm_K: int | None = None

    def __post_init__(self):
        if int(self.setup) not in SETUP_GENERATORS:
            raise DomainError(f"unknown setup {self.setup!r}")
        self.setup = int(self.setup)
        if self.n < 2:
            raise DomainError("training size must be at least 2")
        if self.test_size < 1:
            raise DomainError("test size must be at least 1")
        if self.repetitions < 1:
            raise DomainError("need at least one repetition")
        if self.workers < 1:
            raise DomainError("parallelism width must be at least 1")
        methods = tuple(self.methods)
        for m in methods:
            if m not in _METHODS:
                raise DomainError(f"unknown method {m!r}; choose from {_METHODS}")
        self.methods = methods
        params = tuple(self.parametrizations)
        for p in params:
            if p not in _PARAMS:
                raise DomainError(f"unknown parametrization {p!r}; choose from {_PARAMS}")
        self.parametrizations = params
        taus = tuple(sorted(float(t) for t in self.taus))
        if not taus:
            raise DomainError("need at least one tau")
        for t in taus:
            if not (0.0 < t < 1.0):
                raise DomainError(f"tau must lie in (0, 1), got {t}")
        self.taus = taus
        vs = tuple(sorted(int(v) for v in self.vs))
        if not vs or vs[0] < 1:
            raise DomainError("V values must be positive integers")
        self.vs = vs
        self.setup_kwargs = dict(self.setup_kwargs)

    @staticmethod
    def from_dict(obj: dict) -> "ExperimentPlan":
        if not isinstance(obj, dict):
            raise DomainError("experiment plan must be a JSON object")
        known = {f for f in ExperimentPlan.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise DomainError(f"unknown plan fields: {sorted(unknown)}")
        if "setup" not in obj:
            raise DomainError("plan must name a setup (1, 2 or 3)")
        return ExperimentPlan(**obj)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("methods", "parametrizations", "taus", "vs"):
            out[key] = list(out[key])
        return out


def _make_dataset(plan: ExperimentPlan, seed: int, n_rows: int):
    cfg_cls, gen = SETUP_GENERATORS[plan.setup]
    cfg = cfg_cls(n=n_rows, seed=seed, **plan.setup_kwargs)
    data, truth = gen(cfg)
    return data, truth, cfg


def _zeronorm_K(plan: ExperimentPlan, d: int) -> int:
    if plan.zeronorm_K is not None:
        return int(plan.zeronorm_K)
    n_t_min = min(int(math.floor(t * plan.n + 1e-9)) for t in plan.taus)
    return max(1, min(n_t_min, d))


# ---------------------------------------------------------------------------
# One repetition (top-level so process pools can pickle it)
# ---------------------------------------------------------------------------

def _run_rep(plan: ExperimentPlan, grid: np.ndarray, j: int) -> dict:
    try:
        full, truth, cfg = _make_dataset(
            plan, derive_seed(plan.base_seed, _STREAM_DATA, j), plan.n + plan.test_size
        )
        train = Dataset(full.x[: plan.n], full.y[: plan.n])
        test = Dataset(full.x[plan.n :], full.y[plan.n :])
        c = float(cfg.c)

        pconf = PathConfig(c=c, alpha=plan.alpha)
        cache = PathCache(pconf)
        trainers = {}
        if "grid" in plan.parametrizations:
            trainers["grid"] = GridTrainer(pconf, grid, cache)
        if "zeronorm" in plan.parametrizations:
            trainers["zeronorm"] = ZeroNormTrainer(pconf, _zeronorm_K(plan, train.d), cache)

        oracle = {}
        for param in plan.parametrizations:
            fits = trainers[param].train(train)
            k_star, risk_star = oracle_risk(c, fits, test, truth)
            oracle[param] = {"k": k_star, "risk": risk_star}

        rows = []
        jensen_violation = 0.0
        for ti, tau in enumerate(plan.taus):
            scheme = monte_carlo_splits(
                plan.n, tau, max(plan.vs),
                derive_seed(plan.base_seed, _STREAM_SPLITS, j, ti),
            )
            for V in plan.vs:
                sub = scheme.prefix(V)
                for param in plan.parametrizations:
                    trainer = trainers[param]
                    for method in plan.methods:
                        if method == "agghoo":
                            pred = agghoo(trainer, train, sub, c)
                            risk = excess_risk_hat(c, pred, test, truth)
                            comp = float(np.mean(
                                [excess_risk_hat(c, rec.fit, test, truth) for rec in pred.per_split]
                            ))
                            jensen_violation = max(jensen_violation, risk - comp)
                        elif method == "agcv":
                            pred = agcv(trainer, train, sub, c)
                            risk = excess_risk_hat(c, pred, test, truth)
                        else:  # cv
                            _k, fit = cv_select(trainer, train, sub, c)
                            risk = excess_risk_hat(c, fit, test, truth)
                        rows.append((method, param, tau, V, risk))
        return {"rep": j, "rows": rows, "oracle": oracle, "jensen": jensen_violation}
    except (SolverError, PathError) as exc:
        return {"rep": j, "failed": f"{type(exc).__name__}: {exc}"}


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass
class ExperimentReport:
    """Everything a run produced, with deterministic CSV serialization."""

    plan: ExperimentPlan
    grid: np.ndarray
    calibration_lambda_max: list
    rows: list            # (method, param, tau, V, rep, risk), canonical order
    summaries: list       # (method, param, tau, V, mean, sd, n)
    gstats: list          # (method, param, V, tau, tau_star, mean, sd, g)
    oracle: dict          # param -> {"per_rep": [(rep, k, risk)], "mean", "sd"}
    failures: list        # (rep, message)
    jensen: list          # (rep, max violation) over successful reps
    runtime: float

    def risk_table(self, method: str, param: str, tau: float, V: int):
        """(reps, risks) arrays for one cell, in repetition order."""
        reps, risks = [], []
        for m, p, t, v, rep, risk in self.rows:
            if m == method and p == param and t == tau and v == V:
                reps.append(rep)
                risks.append(risk)
        return np.array(reps), np.array(risks)

    def mean_risk(self, method: str, param: str, tau: float, V: int) -> float:
        for m, p, t, v, mean, _sd, _n in self.summaries:
            if m == method and p == param and t == tau and v == V:
                return mean
        raise DomainError(f"no summary for {(method, param, tau, V)}")

    def write(self, outdir) -> None:
        """Emit report.csv, gstats.csv and meta.json into ``outdir``."""
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "report.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "param", "tau", "V", "rep", "excess_risk"])
            for m, p, t, v, rep, risk in self.rows:
                w.writerow([m, p, repr(float(t)), v, rep, repr(float(risk))])
        with open(os.path.join(outdir, "gstats.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "param", "V", "tau", "tau_star",
                        "mean_risk", "sd_risk", "g_stat"])
            for m, p, v, t, ts, mean, sd, g in self.gstats:
                w.writerow([m, p, v, repr(float(t)), repr(float(ts)),
                            repr(float(mean)), repr(float(sd)), repr(float(g))])
        meta = {
            "plan": self.plan.to_dict(),
            "grid": {
                "lambda_max": float(self.grid[0]),
                "lambda_min": float(self.grid[-1]),
                "size": int(self.grid.size),
                "calibration_lambda_max": [float(v) for v in self.calibration_lambda_max],
            },
            "oracle": {
                param: {
                    "mean": rec["mean"],
                    "sd": rec["sd"],
                    "per_rep": [
                        {"rep": r, "k": k, "risk": risk} for r, k, risk in rec["per_rep"]
                    ],
                }
                for param, rec in self.oracle.items()
            },
            "failures": [{"rep": r, "error": msg} for r, msg in self.failures],
            "jensen_max_violation": max((v for _r, v in self.jensen), default=0.0),
            "n_success": len(self.jensen),
            "runtime_seconds": self.runtime,
            "error_bars": "mean +/- 1.645 * sd / sqrt(J) (a labeled convention)",
        }
        with open(os.path.join(outdir, "meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# The harness
# ---------------------------------------------------------------------------

def run_experiment(plan: ExperimentPlan) -> ExperimentReport:
    """Run the full plan; deterministic given ``plan`` at any worker count.

    Per-repetition solver or path failures are recorded and their rows
    excluded; the run aborts if more than 1% of repetitions fail.
    """
    t0 = time.time()

    # Fixed penalty grid: the data-dependent top value averaged over
    # dedicated calibration datasets, then a geometric grid down to 5%.
    cal = []
    for i in range(plan.grid_calibration_reps):
        ds, _truth, cfg = _make_dataset(
            plan, derive_seed(plan.base_seed, _STREAM_GRID_CAL, i), plan.n
        )
        cal.append(lambda_max(cfg.c, ds.x, ds.y))
    grid = build_grid(float(np.mean(cal)))

    reps = list(range(plan.repetitions))
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as ex:
            results = list(ex.map(partial(_run_rep, plan, grid), reps, chunksize=1))
    else:
        results = [_run_rep(plan, grid, j) for j in reps]
    results.sort(key=lambda r: r["rep"])

    failures = [(r["rep"], r["failed"]) for r in results if "failed" in r]
    if len(failures) > 0.01 * plan.repetitions:
        raise SolverError(
            f"{len(failures)} of {plan.repetitions} repetitions failed "
            f"(first: rep {failures[0][0]}: {failures[0][1]})"
        )
    good = [r for r in results if "failed" not in r]
    if not good:
        raise SolverError("no repetition succeeded")

    rows = []
    for r in good:
        for m, p, t, v, risk in r["rows"]:
            rows.append((m, p, t, v, r["rep"], risk))
    rows.sort(key=lambda row: (row[0], row[1], row[2], row[3], row[4]))

    cells: dict = {}
    for m, p, t, v, rep, risk in rows:
        cells.setdefault((m, p, t, v), []).append(risk)

    summaries = []
    for key in sorted(cells):
        risks = np.array(cells[key])
        sd = float(np.std(risks, ddof=1)) if risks.size > 1 else 0.0
        summaries.append(key + (float(np.mean(risks)), sd, int(risks.size)))

    # tau_star per (method, param, V): smallest tau attaining the minimal
    # mean risk; then the normalized paired contrast against it per tau.
    mean_of = {(m, p, t, v): mean for m, p, t, v, mean, _sd, _n in summaries}
    gstats = []
    for m in plan.methods:
        for p in plan.parametrizations:
            for v in plan.vs:
                tau_star = min(
                    plan.taus, key=lambda t: (mean_of[(m, p, t, v)], t)
                )
                base = np.array(cells[(m, p, tau_star, v)])
                for t in plan.taus:
                    risks = np.array(cells[(m, p, t, v)])
                    mean = mean_of[(m, p, t, v)]
                    sd = float(np.std(risks, ddof=1)) if risks.size > 1 else 0.0
                    if risks.size >= 2:
                        g = g_statistic(risks - base)
                    else:
                        g = 0.0
                    gstats.append((m, p, v, t, tau_star, mean, sd, g))

    oracle: dict = {}
    for param in plan.parametrizations:
        per_rep = [(r["rep"], r["oracle"][param]["k"], r["oracle"][param]["risk"]) for r in good]
        risks = np.array([risk for _rep, _k, risk in per_rep])
        oracle[param] = {
            "per_rep": per_rep,
            "mean": float(np.mean(risks)),
            "sd": float(np.std(risks, ddof=1)) if risks.size > 1 else 0.0,
        }

    jensen = [(r["rep"], float(r["jensen"])) for r in good]

    return ExperimentReport(
        plan=plan,
        grid=grid,
        calibration_lambda_max=cal,
        rows=rows,
        summaries=summaries,
        gstats=gstats,
        oracle=oracle,
        failures=failures,
        jensen=jensen,
        runtime=time.time() - t0,
    )
