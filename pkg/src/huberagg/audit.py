"""Numerical checks on the conditions behind the selection guarantees.

The guarantees consume a handful of computable quantities: the worst-case
sup-norm-to-L2 ratio of sparse linear forms of a discrete design (``kappa``),
a lower bound on the noise mass near the center (``eta``), a sample-size
condition linking the two, a partition-mass condition for step-function
families, and two closed-form envelope lemmas.  This module evaluates each
one exactly on tractable inputs so the hypotheses can be falsified — or
certified — numerically, and serializes the results as a JSON report.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "DiscreteDesign",
    "KappaReport",
    "AuditCheck",
    "bernoulli_design",
    "quantized_gaussian_design",
    "kappa_bruteforce",
    "cor1_bound",
    "eta_cauchy",
    "check_hw_condition",
    "check_partition_mass",
    "delta_op",
    "fp_bound_check",
    "write_audit_json",
]


# ---------------------------------------------------------------------------
# Designs
# ---------------------------------------------------------------------------

@dataclass
class DiscreteDesign:
    """A finitely supported covariate distribution: atoms with probabilities."""

    atoms: np.ndarray
    probs: np.ndarray
    centered: bool = field(init=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        probs = np.asarray(self.probs, dtype=float).ravel()
        if atoms.ndim != 2:
            raise DomainError("atoms must be a 2-D array (one row per atom)")
        if probs.size != atoms.shape[0]:
            raise DomainError("need one probability per atom")
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(probs)):
            raise DomainError("design contains non-finite values")
        if np.any(probs <= 0):
            raise DomainError("atom probabilities must be positive")
        if abs(float(probs.sum()) - 1.0) > 1e-9:
            raise DomainError(f"probabilities sum to {probs.sum()!r}, expected 1")
        self.atoms = atoms
        self.probs = probs
        mean = probs @ atoms
        self.centered = bool(np.max(np.abs(mean), initial=0.0) <= 1e-12)

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    def second_moment(self) -> np.ndarray:
        return (self.atoms * self.probs[:, None]).T @ self.atoms


def bernoulli_design(p) -> DiscreteDesign:
    """Centered product of independent Bernoulli coordinates.

    Coordinate ``i`` takes value ``1 - p_i`` with probability ``p_i`` and
    ``-p_i`` otherwise.  The joint support has ``2^d`` atoms, so this is for
    small ``d`` only.
    """
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0:
        raise DomainError("need at least one Bernoulli parameter")
    if np.any(p <= 0) or np.any(p >= 1):
        raise DomainError("Bernoulli parameters must lie strictly inside (0, 1)")
    d = p.size
    if d > 16:
        raise DomainError(f"joint Bernoulli design with d={d} is too large (max 16)")
    atoms = np.empty((2 ** d, d))
    probs = np.empty(2 ** d)
    for idx, bits in enumerate(itertools.product((0, 1), repeat=d)):
        bits = np.array(bits, dtype=float)
        atoms[idx] = bits - p
        probs[idx] = float(np.prod(np.where(bits == 1.0, p, 1.0 - p)))
    return DiscreteDesign(atoms=atoms, probs=probs)


def quantized_gaussian_design(d: int, points: int = 8) -> DiscreteDesign:
    """Equal-mass quantization of independent standard normals.

    Each coordinate is replaced by the conditional means of ``points``
    equal-probability slices; the joint design is their product.  This is an
    indicative stand-in for a continuous design, not a rigorous bound on it.
    """
    from scipy.special import ndtri

    d = int(d)
    points = int(points)
    if d < 1 or points < 2:
        raise DomainError("need d >= 1 and at least 2 quantization points")
    if points ** d > 300_000:
        raise DomainError(
            f"quantized product design with {points}^{d} atoms is too large"
        )
    edges = ndtri(np.arange(1, points) / points)
    pdf = lambda t: np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)  # noqa: E731
    dens = np.concatenate([[0.0], pdf(edges), [0.0]])
    vals = (dens[:-1] - dens[1:]) * points
    vals = 0.5 * (vals - vals[::-1])  # enforce exact symmetry
    atoms1 = vals
    atoms = np.array(list(itertools.product(atoms1, repeat=d)))
    probs = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
    return DiscreteDesign(atoms=atoms, probs=probs)


# ---------------------------------------------------------------------------
# kappa: worst sup/L2 ratio of sparse linear forms
# ---------------------------------------------------------------------------

@dataclass
class KappaReport:
    """Exact sparse-form norm-ratio maximization result."""

    K: int
    kappa: float
    support: tuple
    witness: np.ndarray
    singular: bool = False
    bound_cor1: float | None = None


def kappa_bruteforce(design: DiscreteDesign, K: int) -> KappaReport:
    """Exact ``max over supports S, |S| = min(2K, d)`` of the norm ratio.

    For a fixed support the squared ratio is ``max_a a_S' G_S^{-1} a_S``
    with ``G_S`` the second-moment block (the optimal direction for atom
    ``a`` is ``G_S^{-1} a_S``).  A singular block means some sparse
    direction has zero variance; that degenerate case is reported as an
    infinite ratio with the null direction as witness.
    """
    K = int(K)
    if K < 1:
        raise DomainError("K must be at least 1")
    d = design.d
    if d > 12:
        raise DomainError(f"brute-force sweep limited to d <= 12, got {d}")
    if not design.centered:
        raise DomainError("design must be centered")

    G = design.second_moment()
    atoms = design.atoms
    s_max = min(2 * K, d)

    best_val = -np.inf
    best_support: tuple = ()
    best_witness = np.zeros(d)
    for S in itertools.combinations(range(d), s_max):
        S_arr = np.array(S)
        G_S = G[np.ix_(S_arr, S_arr)]
        evals, evecs = np.linalg.eigh(G_S)
        if evals[-1] <= 0 or evals[0] <= evals[-1] * 1e-12:
            witness = np.zeros(d)
            witness[S_arr] = evecs[:, 0]
            return KappaReport(
                K=K, kappa=math.inf, support=S, witness=witness, singular=True
            )
        A_S = atoms[:, S_arr]
        # ratio^2 per atom: a' G^{-1} a via the eigendecomposition
        proj = A_S @ evecs
        r2 = np.sum(proj * proj / evals[None, :], axis=1)
        a_idx = int(np.argmax(r2))
        if r2[a_idx] > best_val:
            best_val = float(r2[a_idx])
            best_support = S
            w = np.zeros(d)
            w[S_arr] = evecs @ (proj[a_idx] / evals)
            best_witness = w
    return KappaReport(
        K=K,
        kappa=float(np.sqrt(best_val)),
        support=best_support,
        witness=best_witness,
    )


def cor1_bound(p, K: int) -> float:
    """Closed-form ratio bound for independent Bernoulli designs:
    ``sqrt(2K / min_i p_i (1 - p_i))``."""
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0:
        raise DomainError("need at least one Bernoulli parameter")
    if np.any(p <= 0) or np.any(p >= 1):
        raise DomainError("Bernoulli parameters must lie strictly inside (0, 1)")
    K = int(K)
    if K < 1:
        raise DomainError("K must be at least 1")
    return float(np.sqrt(2.0 * K / np.min(p * (1.0 - p))))


# ---------------------------------------------------------------------------
# Noise-mass constant and the sample-size conditions
# ---------------------------------------------------------------------------

def eta_cauchy(c: float, scale: float) -> float:
    """Mass of a centered Cauchy within ``[-c/2, c/2]``: ``(2/pi) atan(c/(2 scale))``."""
    c = float(c)
    scale = float(scale)
    if not (c > 0 and np.isfinite(c)):
        raise DomainError("c must be positive")
    if not (scale > 0 and np.isfinite(scale)):
        raise DomainError("scale must be positive")
    return float((2.0 / math.pi) * math.atan(c / (2.0 * scale)))


@dataclass
class AuditCheck:
    """One verified inequality: the tested value, its threshold, the verdict."""

    name: str
    ok: bool
    value: float
    bound: float
    inputs: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        """value / bound — below 1 means comfortably inside for <= checks."""
        if self.bound == 0.0:
            return math.inf if self.value != 0.0 else 1.0
        return self.value / self.bound

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "pass": bool(self.ok),
            "value": _json_safe(self.value),
            "bound": _json_safe(self.bound),
            "margin": _json_safe(self.margin),
            "inputs": {k: _json_safe(v) for k, v in self.inputs.items()},
        }


def check_hw_condition(kappa: float, eta: float, n_t: int, n_v: int, b0: float) -> AuditCheck:
    """Design-vs-sample-size condition:
    ``kappa <= (eta/8) * sqrt(n_v / (8 b0 log n_t))``."""
    n_t = int(n_t)
    n_v = int(n_v)
    b0 = float(b0)
    eta = float(eta)
    kappa = float(kappa)
    if b0 <= 1:
        raise DomainError("b0 must exceed 1")
    if n_t < 3:
        raise DomainError("n_t must be at least 3")
    if n_v < 1:
        raise DomainError("n_v must be at least 1")
    if not (0 < eta <= 1):
        raise DomainError("eta must lie in (0, 1]")
    rhs = (eta / 8.0) * math.sqrt(n_v / (8.0 * b0 * math.log(n_t)))
    return AuditCheck(
        name="design_sample_size",
        ok=bool(kappa <= rhs),
        value=kappa,
        bound=rhs,
        inputs={"kappa": kappa, "eta": eta, "n_t": n_t, "n_v": n_v, "b0": b0},
    )


def check_partition_mass(masses, eta: float, n_t: int, n_v: int) -> AuditCheck:
    """Minimum-interval-mass condition:
    ``min_j P(I_j) >= 1536 log^2(n_t) / (eta^2 n_v)``."""
    masses = np.asarray(masses, dtype=float).ravel()
    if masses.size == 0:
        raise DomainError("need at least one interval mass")
    if np.any(masses < 0) or float(masses.sum()) > 1.0 + 1e-9:
        raise DomainError("masses must be nonnegative and sum to at most 1")
    eta = float(eta)
    if not (0 < eta <= 1):
        raise DomainError("eta must lie in (0, 1]")
    n_t = int(n_t)
    n_v = int(n_v)
    if n_t < 1 or n_v < 1:
        raise DomainError("sample sizes must be positive")
    threshold = 1536.0 * math.log(n_t) ** 2 / (eta ** 2 * n_v)
    m = float(np.min(masses))
    return AuditCheck(
        name="partition_mass",
        ok=bool(m >= threshold),
        value=m,
        bound=threshold,
        inputs={"eta": eta, "n_t": n_t, "n_v": n_v, "intervals": int(masses.size)},
    )


# ---------------------------------------------------------------------------
# Envelope lemmas
# ---------------------------------------------------------------------------

def delta_op(r: float, s: float, xi: float) -> float:
    """Smallest ``x`` with ``max(sqrt(r) u, s u^2) <= xi u^2`` for all u >= x.

    Finite exactly when ``xi >= s`` (the quadratic branch caps the slope),
    and then equal to ``sqrt(r)/xi``; otherwise infinity, a legitimate
    tagged outcome rather than an error.
    """
    r = float(r)
    s = float(s)
    xi = float(xi)
    if not (r > 0 and s > 0 and xi > 0):
        raise DomainError("r, s and xi must be positive")
    if xi < s:
        return math.inf
    return math.sqrt(r) / xi


def fp_bound_check(r: float, s: float, x: float, y: float) -> AuditCheck:
    """Subadditivity-style envelope inequality.

    The largest ``v`` with ``v <= max(r, s sqrt(v)) * t`` is
    ``max(r t, s^2 t^2)``; the check confirms that at ``t = x + y`` this
    never exceeds ``(h(sqrt(x)) + h(sqrt(y)))^2`` with
    ``h(u) = max(sqrt(r) u, s u^2)``.
    """
    r = float(r)
    s = float(s)
    x = float(x)
    y = float(y)
    if not (r > 0 and s > 0 and x > 0 and y >= 0):
        raise DomainError("r, s, x must be positive and y nonnegative")
    t = x + y
    lhs = max(r * t, s ** 2 * t ** 2)

    def h(u):
        return max(math.sqrt(r) * u, s * u * u)

    rhs = (h(math.sqrt(x)) + h(math.sqrt(y))) ** 2
    ok = lhs <= rhs * (1.0 + 1e-12)
    return AuditCheck(
        name="fixed_point_bound",
        ok=bool(ok),
        value=lhs,
        bound=rhs,
        inputs={"r": r, "s": s, "x": x, "y": y},
    )


# ---------------------------------------------------------------------------
# JSON report
# ---------------------------------------------------------------------------

def _json_safe(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
    if isinstance(v, dict):
        return {k: _json_safe(t) for k, t in v.items()}
    if isinstance(v, np.ndarray):
        return [_json_safe(t) for t in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_json_safe(t) for t in v]
    return v


def write_audit_json(report: dict, file) -> None:
    """Serialize an audit report (checks, kappa results, notes) to JSON."""

    def expand(obj):
        if isinstance(obj, AuditCheck):
            return _json_safe(obj.to_json())
        if isinstance(obj, KappaReport):
            return {
                "K": obj.K,
                "kappa": _json_safe(obj.kappa),
                "support": list(obj.support),
                "witness": _json_safe(obj.witness),
                "singular": obj.singular,
                "bound_cor1": _json_safe(obj.bound_cor1),
            }
        if isinstance(obj, dict):
            return {k: expand(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [expand(v) for v in obj]
        return _json_safe(obj)

    with open(file, "w") as fh:
        # Pre-expanded so non-finite floats become strings; json.dump would
        # otherwise emit the non-standard Infinity/NaN literals.
        json.dump(expand(report), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
