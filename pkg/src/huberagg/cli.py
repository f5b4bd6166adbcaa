"""Command-line entry points.

Subcommands::

    path      trace the full penalty path of one dataset to CSV
    fit       train an aggregated (or selected) predictor, save model JSON
    simulate  draw a synthetic dataset from one of the built-in setups
    bench     run a full benchmark plan, emit report.csv/gstats.csv/meta.json
    audit     evaluate the theory constants and checks for a finite design

Exit codes: 0 on success, 2 on validation/input errors, 3 on solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import audit as audit_mod
from .bench import ExperimentPlan, run_experiment
from .errors import DomainError, PathError, SolverError
from .path import PathConfig, build_grid, homotopy_path, lambda_max, write_path_csv
from .select import (
    GridTrainer,
    ZeroNormTrainer,
    agcv,
    agghoo,
    cv_select,
    monte_carlo_splits,
)
from .simulate import SETUP_GENERATORS, generate, read_dataset_csv, write_dataset_csv

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _load_json(path, what: str) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise DomainError(f"cannot read {what} file {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DomainError(f"{what} file {path!r} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise DomainError(f"{what} file {path!r} must hold a JSON object")
    return obj


# ---------------------------------------------------------------------------
# path
# ---------------------------------------------------------------------------

def _cmd_path(args) -> int:
    data, _meta = read_dataset_csv(args.input)
    config = PathConfig(c=args.c, alpha=args.alpha)
    path = homotopy_path(config, data)
    if args.grid:
        import csv as _csv

        grid = build_grid(lambda_max(args.c, data.x, data.y))
        with open(args.out, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["grid_index", "lambda", "zero_norm", "q"]
                       + [f"theta_{j}" for j in range(data.d)])
            for i, lam in enumerate(grid):
                fit = path.fit_at(float(lam))
                w.writerow([i + 1, repr(float(lam)), fit.zero_norm, repr(float(fit.q))]
                           + [repr(float(v)) for v in fit.theta])
    else:
        write_path_csv(path, args.out, sparse=args.sparse)
    print(f"wrote {args.out} ({path.num_knots} knots, lambda_max={path.lambdas[0]:.6g})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _cmd_fit(args) -> int:
    data, _meta = read_dataset_csv(args.input)
    config = PathConfig(c=args.c, alpha=args.alpha)
    if args.param == "grid":
        trainer = GridTrainer(config, build_grid(lambda_max(args.c, data.x, data.y)))
    else:
        K = max(1, min(int(math.floor(args.tau * data.n + 1e-9)), data.d))
        trainer = ZeroNormTrainer(config, K)
    scheme = monte_carlo_splits(data.n, args.tau, args.V, args.seed)

    model = {
        "method": args.method,
        "param": args.param,
        "tau": args.tau,
        "V": args.V,
        "seed": args.seed,
        "c": args.c,
        "alpha": args.alpha,
        "n": data.n,
        "d": data.d,
        "family_size": trainer.K,
    }
    if args.method == "cv":
        k_hat, fit = cv_select(trainer, data, scheme, args.c)
        model["selected_k"] = k_hat
        q, theta, zero = fit.q, fit.theta, fit.zero_norm
    else:
        fn = agghoo if args.method == "agghoo" else agcv
        pred = fn(trainer, data, scheme, args.c)
        model["per_split"] = [
            {"train_size": int(rec.subset.size), "selected_k": rec.k_hat}
            for rec in pred.per_split
        ]
        q, theta, zero = pred.q, pred.theta, pred.zero_norm
    model["q"] = float(q)
    model["theta"] = [float(v) for v in theta]
    model["zero_norm"] = int(zero)
    with open(args.out, "w") as fh:
        json.dump(model, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.out} (method={args.method}, zero_norm={zero})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    kwargs = _load_json(args.config, "config") if args.config else {}
    if args.seed is not None:
        kwargs["seed"] = args.seed
    try:
        data, truth, cfg = generate(args.setup, **kwargs)
    except TypeError as exc:
        raise DomainError(f"bad config for setup {args.setup}: {exc}") from None
    write_dataset_csv(args.out, data, truth, cfg)
    print(f"wrote {args.out} (n={data.n}, d={data.d}) and sidecar metadata")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _cmd_bench(args) -> int:
    plan = ExperimentPlan.from_dict(_load_json(args.plan, "plan"))
    report = run_experiment(plan)
    report.write(args.out)
    print(
        f"wrote {args.out}/report.csv, gstats.csv, meta.json "
        f"({len(report.rows)} rows, {len(report.failures)} failed reps, "
        f"{report.runtime:.1f}s)"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

def _build_design(spec: dict):
    kind = spec.get("type")
    if kind == "bernoulli":
        if "p" not in spec:
            raise DomainError("bernoulli design needs a 'p' list")
        return audit_mod.bernoulli_design(spec["p"]), spec["p"]
    if kind == "gaussian_quantized":
        if "d" not in spec:
            raise DomainError("gaussian_quantized design needs 'd'")
        return audit_mod.quantized_gaussian_design(
            int(spec["d"]), int(spec.get("points", 8))
        ), None
    if kind == "explicit":
        if "atoms" not in spec or "probs" not in spec:
            raise DomainError("explicit design needs 'atoms' and 'probs'")
        return audit_mod.DiscreteDesign(
            np.asarray(spec["atoms"], dtype=float),
            np.asarray(spec["probs"], dtype=float),
        ), None
    raise DomainError(
        "design 'type' must be one of: bernoulli, gaussian_quantized, explicit"
    )


def _cmd_audit(args) -> int:
    spec = _load_json(args.design, "design")
    checks_spec = spec.pop("checks", {})
    if not isinstance(checks_spec, dict):
        raise DomainError("'checks' must be a JSON object")
    design, bern_p = _build_design(spec)

    report: dict = {"K": args.K, "design": {
        "type": spec.get("type"),
        "d": design.d,
        "atoms": design.atoms.shape[0],
        "centered": design.centered,
    }}
    kappa_report = audit_mod.kappa_bruteforce(design, args.K)
    report["kappa"] = kappa_report
    if bern_p is not None:
        bound = audit_mod.cor1_bound(bern_p, args.K)
        report["kappa_vs_bernoulli_bound"] = audit_mod.AuditCheck(
            name="kappa_le_bernoulli_bound",
            ok=bool(kappa_report.kappa <= bound * (1 + 1e-12)),
            value=kappa_report.kappa,
            bound=bound,
            inputs={"p": list(map(float, bern_p)), "K": args.K},
        )

    checks = []
    eta_value = None
    if "eta" in checks_spec:
        e = checks_spec["eta"]
        eta_value = audit_mod.eta_cauchy(float(e["c"]), float(e["scale"]))
        checks.append(audit_mod.AuditCheck(
            name="eta_cauchy",
            ok=True,
            value=eta_value,
            bound=float("nan"),
            inputs={"c": float(e["c"]), "scale": float(e["scale"])},
        ))
    if "hw" in checks_spec:
        h = dict(checks_spec["hw"])
        kappa = float(h.pop("kappa", kappa_report.kappa))
        eta = float(h.pop("eta", eta_value if eta_value is not None else float("nan")))
        if not math.isfinite(eta):
            raise DomainError("hw check needs 'eta' (directly or via an eta block)")
        checks.append(audit_mod.check_hw_condition(
            kappa=kappa, eta=eta,
            n_t=int(h["n_t"]), n_v=int(h["n_v"]), b0=float(h["b0"]),
        ))
    if "partition" in checks_spec:
        pchk = dict(checks_spec["partition"])
        eta = float(pchk.pop("eta", eta_value if eta_value is not None else float("nan")))
        if not math.isfinite(eta):
            raise DomainError("partition check needs 'eta' (directly or via an eta block)")
        checks.append(audit_mod.check_partition_mass(
            masses=pchk["masses"], eta=eta,
            n_t=int(pchk["n_t"]), n_v=int(pchk["n_v"]),
        ))
    if "delta" in checks_spec:
        dchk = checks_spec["delta"]
        value = audit_mod.delta_op(float(dchk["r"]), float(dchk["s"]), float(dchk["xi"]))
        checks.append(audit_mod.AuditCheck(
            name="delta_op",
            ok=math.isfinite(value),
            value=value,
            bound=float("nan"),
            inputs={k: float(dchk[k]) for k in ("r", "s", "xi")},
        ))
    if "fixed_point" in checks_spec:
        f = checks_spec["fixed_point"]
        checks.append(audit_mod.fp_bound_check(
            float(f["r"]), float(f["s"]), float(f["x"]), float(f["y"])
        ))
    if checks:
        report["checks"] = checks

    audit_mod.write_audit_json(report, args.out)
    kappa_txt = "inf" if math.isinf(kappa_report.kappa) else f"{kappa_report.kappa:.6g}"
    print(f"wrote {args.out} (kappa({args.K})={kappa_txt}, {len(checks)} extra checks)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="huberagg",
        description="Robust sparse regression: penalty paths, aggregated "
                    "hold-out selection, simulation and theory audits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("path", help="trace a penalty path to CSV")
    p.add_argument("--input", required=True, help="dataset CSV (y, x_0..)")
    p.add_argument("--c", type=float, default=2.0, help="loss threshold")
    p.add_argument("--alpha", type=float, default=0.75, help="l1-cap exponent")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--grid", action="store_true",
                      help="write fits on the standard 100-point penalty grid")
    mode.add_argument("--knots", action="store_true",
                      help="write exact path knots (default)")
    p.add_argument("--sparse", action="store_true",
                   help="triplet layout for knot output")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_path)

    p = sub.add_parser("fit", help="train one predictor and save model JSON")
    p.add_argument("--method", required=True, choices=("agghoo", "cv", "agcv"))
    p.add_argument("--param", required=True, choices=("grid", "zeronorm"))
    p.add_argument("--tau", type=float, default=0.8, help="training fraction")
    p.add_argument("--V", type=int, default=10, help="number of splits")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c", type=float, default=2.0, help="loss threshold")
    p.add_argument("--alpha", type=float, default=0.75, help="l1-cap exponent")
    p.add_argument("--input", required=True, help="dataset CSV (y, x_0..)")
    p.add_argument("--out", required=True, help="output model JSON")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("simulate", help="draw a synthetic dataset")
    p.add_argument("--setup", type=int, required=True,
                   choices=sorted(SETUP_GENERATORS))
    p.add_argument("--config", help="JSON file of setup parameters (n, d, ...)")
    p.add_argument("--seed", type=int, default=None,
                   help="overrides the seed in --config")
    p.add_argument("--out", required=True, help="output dataset CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bench", help="run a benchmark plan")
    p.add_argument("--plan", required=True, help="JSON experiment plan")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("audit", help="theory constants for a finite design")
    p.add_argument("--design", required=True, help="JSON design description")
    p.add_argument("--K", type=int, default=1, help="sparsity level")
    p.add_argument("--out", required=True, help="output JSON report")
    p.set_defaults(func=_cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, PathError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
