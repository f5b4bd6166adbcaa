"""Design constants and hypothesis checks: brute force vs closed forms."""

import json
import math

import numpy as np
import pytest

from oracles import delta_scan, fp_sup_scan

from huberagg import (
    AuditCheck,
    DiscreteDesign,
    DomainError,
    bernoulli_design,
    check_hw_condition,
    check_partition_mass,
    cor1_bound,
    delta_op,
    eta_cauchy,
    fp_bound_check,
    kappa_bruteforce,
    quantized_gaussian_design,
    write_audit_json,
)


class TestDiscreteDesign:
    def test_centered_flag(self):
        d = DiscreteDesign(np.array([[1.0], [-1.0]]), np.array([0.5, 0.5]))
        assert d.centered
        d2 = DiscreteDesign(np.array([[1.0], [0.0]]), np.array([0.5, 0.5]))
        assert not d2.centered

    def test_rejects_bad_probs(self):
        with pytest.raises(DomainError):
            DiscreteDesign(np.array([[1.0], [-1.0]]), np.array([0.7, 0.7]))
        with pytest.raises(DomainError):
            DiscreteDesign(np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]))

    def test_bernoulli_atoms(self):
        d = bernoulli_design([0.5])
        assert d.atoms.shape == (2, 1)
        assert sorted(d.atoms.ravel()) == [-0.5, 0.5]
        assert d.centered

    def test_bernoulli_rejects_boundary(self):
        with pytest.raises(DomainError):
            bernoulli_design([0.0, 0.5])

    def test_quantized_gaussian_shape(self):
        d = quantized_gaussian_design(2, points=4)
        assert d.atoms.shape == (16, 2)
        assert d.centered
        # second moment near 1 per coordinate (quantization is indicative)
        g = d.second_moment()
        assert g[0, 0] == pytest.approx(1.0, abs=0.2)


class TestKappaBruteforce:
    def test_single_bernoulli_half(self):
        for K in (1, 2, 3):
            rep = kappa_bruteforce(bernoulli_design([0.5]), K)
            assert rep.kappa == pytest.approx(1.0, rel=1e-12)

    def test_two_bernoulli_half_k1(self):
        rep = kappa_bruteforce(bernoulli_design([0.5, 0.5]), 1)
        assert rep.kappa == pytest.approx(math.sqrt(2), rel=1e-12)
        # witness attains the ratio: |<a, w>| = kappa * sqrt(E<X,w>^2)
        des = bernoulli_design([0.5, 0.5])
        w = rep.witness
        vals = des.atoms @ w
        linf = np.max(np.abs(vals))
        l2 = math.sqrt(float(vals**2 @ des.probs))
        assert linf / l2 == pytest.approx(rep.kappa, rel=1e-9)

    def test_saturation_in_k(self):
        des = bernoulli_design([0.3, 0.6, 0.5])
        base = kappa_bruteforce(des, 2).kappa  # 2K = 4 > d already saturated
        for K in (3, 5):
            assert kappa_bruteforce(des, K).kappa == pytest.approx(base, rel=1e-12)

    def test_monotone_in_k(self):
        des = bernoulli_design([0.2, 0.5, 0.7, 0.4])
        ks = [kappa_bruteforce(des, K).kappa for K in (1, 2)]
        assert ks[1] >= ks[0] - 1e-12

    def test_kappa_at_least_one(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            p = rng.uniform(0.15, 0.85, int(rng.integers(1, 5)))
            rep = kappa_bruteforce(bernoulli_design(p), 2)
            assert rep.kappa >= 1.0 - 1e-12

    def test_singular_support_reports_infinity(self):
        # duplicated coordinate -> degenerate direction
        atoms = np.array([[0.5, 0.5], [-0.5, -0.5]])
        des = DiscreteDesign(atoms, np.array([0.5, 0.5]))
        rep = kappa_bruteforce(des, 1)
        assert math.isinf(rep.kappa)
        assert rep.singular
        w = rep.witness
        assert np.max(np.abs(atoms @ w)) <= 1e-10  # genuine null direction

    def test_requires_centered(self):
        des = DiscreteDesign(np.array([[1.0], [0.5]]), np.array([0.5, 0.5]))
        with pytest.raises(DomainError):
            kappa_bruteforce(des, 1)

    def test_dimension_guard(self):
        with pytest.raises(DomainError):
            kappa_bruteforce(bernoulli_design([0.5] * 13), 1)


class TestCor1Bound:
    def test_values(self):
        assert cor1_bound([0.5], 1) == pytest.approx(math.sqrt(8), rel=1e-12)
        assert cor1_bound([0.5, 0.5], 2) == pytest.approx(4.0, rel=1e-12)

    def test_worst_coordinate_drives(self):
        assert cor1_bound([0.5, 0.1], 1) == pytest.approx(
            math.sqrt(2 / (0.1 * 0.9)), rel=1e-12
        )

    def test_rejects_boundary(self):
        with pytest.raises(DomainError):
            cor1_bound([0.5, 1.0], 1)

    def test_dominates_bruteforce(self, rng):
        for _ in range(10):
            d = int(rng.integers(1, 6))
            p = np.round(rng.uniform(0.1, 0.9, d), 1)
            K = int(rng.integers(1, 4))
            rep = kappa_bruteforce(bernoulli_design(p), K)
            assert rep.kappa <= cor1_bound(p, K) * (1 + 1e-12)


class TestEtaCauchy:
    def test_reference_value(self):
        assert eta_cauchy(2.0, 0.3) == pytest.approx(
            (2 / math.pi) * math.atan(10 / 3), rel=1e-15
        )
        assert eta_cauchy(2.0, 0.3) == pytest.approx(0.8144, abs=5e-4)

    def test_half_at_c_equals_two_scale(self):
        assert eta_cauchy(0.6, 0.3) == pytest.approx(0.5, rel=1e-12)

    def test_limit_to_one(self):
        assert eta_cauchy(1e9, 0.3) == pytest.approx(1.0, abs=1e-8)

    def test_monotonicity(self):
        assert eta_cauchy(2.0, 0.3) < eta_cauchy(3.0, 0.3)
        assert eta_cauchy(2.0, 0.3) > eta_cauchy(2.0, 0.4)

    def test_rejects_bad_scale(self):
        with pytest.raises(DomainError):
            eta_cauchy(1.0, 0.0)


class TestHwCondition:
    def test_reference_instance(self):
        chk = check_hw_condition(kappa=1.0, eta=0.8, n_t=10**6, n_v=10**6, b0=2.0)
        assert chk.ok
        # (eta/8) * sqrt(n_v / (8 b0 log n_t)) evaluated independently
        rhs = (0.8 / 8) * math.sqrt(10**6 / (16 * math.log(10**6)))
        assert chk.bound == pytest.approx(rhs, rel=1e-12)
        assert chk.bound == pytest.approx(6.7264, abs=5e-4)

    def test_infinite_kappa_violates(self):
        chk = check_hw_condition(kappa=math.inf, eta=0.8, n_t=100, n_v=100, b0=2.0)
        assert not chk.ok

    def test_boundary_equality_satisfied(self):
        rhs = (0.5 / 8) * math.sqrt(1000 / (8 * 1.5 * math.log(50)))
        chk = check_hw_condition(kappa=rhs, eta=0.5, n_t=50, n_v=1000, b0=1.5)
        assert chk.ok

    def test_preconditions(self):
        with pytest.raises(DomainError):
            check_hw_condition(1.0, 0.8, n_t=2, n_v=10, b0=2.0)
        with pytest.raises(DomainError):
            check_hw_condition(1.0, 0.8, n_t=10, n_v=10, b0=1.0)
        with pytest.raises(DomainError):
            check_hw_condition(1.0, 1.5, n_t=10, n_v=10, b0=2.0)


class TestPartitionMass:
    def test_satisfied_when_masses_large(self):
        chk = check_partition_mass([0.25] * 4, eta=0.8, n_t=1000, n_v=10**7)
        assert chk.ok
        thr = 1536 * math.log(1000) ** 2 / (0.8**2 * 10**7)
        assert chk.bound == pytest.approx(thr, rel=1e-12)

    def test_zero_mass_violates(self):
        chk = check_partition_mass([0.5, 0.5, 0.0], eta=0.8, n_t=1000, n_v=10**7)
        assert not chk.ok

    def test_boundary_equality_satisfied(self):
        thr = 1536 * math.log(100) ** 2 / (0.5**2 * 10**6)
        chk = check_partition_mass([thr, 1 - thr], eta=0.5, n_t=100, n_v=10**6)
        assert chk.ok

    def test_rejects_overweight(self):
        with pytest.raises(DomainError):
            check_partition_mass([0.8, 0.8], eta=0.5, n_t=100, n_v=100)


class TestDeltaOp:
    def test_closed_form(self):
        assert delta_op(4.0, 1.0, 2.0) == pytest.approx(1.0, rel=1e-12)

    def test_infinite_branch(self):
        assert math.isinf(delta_op(1.0, 3.0, 2.0))

    def test_matches_scan(self, rng):
        for _ in range(40):
            r = float(rng.uniform(0.1, 10))
            s = float(rng.uniform(0.1, 5))
            xi = float(rng.uniform(0.1, 5))
            closed = delta_op(r, s, xi)
            scanned = delta_scan(r, s, xi)
            if math.isinf(closed):
                assert math.isinf(scanned)
            else:
                u_max = 10.0 * (math.sqrt(r) / xi + 1.0)
                assert scanned == pytest.approx(closed, abs=2 * u_max / 200_000)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            delta_op(0.0, 1.0, 1.0)


class TestFpBound:
    def test_boundary_equality(self):
        chk = fp_bound_check(1.0, 1.0, 1.0, 0.0)
        assert chk.ok
        assert chk.value == pytest.approx(1.0, rel=1e-12)
        assert chk.bound == pytest.approx(1.0, rel=1e-12)

    def test_sup_matches_scan(self, rng):
        for _ in range(15):
            r = float(rng.uniform(0.1, 5))
            s = float(rng.uniform(0.1, 5))
            t = float(rng.uniform(0.05, 4))
            closed = max(r * t, s * s * t * t)
            scanned = fp_sup_scan(r, s, t)
            v_hi = 4.0 * max(r * t, s * s * t * t) + 1.0
            assert scanned == pytest.approx(closed, abs=2 * v_hi / 400_000)

    def test_random_sweep_always_satisfied(self, rng):
        for _ in range(1000):
            r, s = rng.uniform(0.05, 10, 2)
            x, y = rng.uniform(0.0, 10, 2)
            if x + y <= 0:
                continue
            assert fp_bound_check(float(r), float(s), float(x), float(y)).ok


class TestAuditJson:
    def test_serialization(self, tmp_path):
        rep = {
            "kappa": kappa_bruteforce(bernoulli_design([0.5, 0.5]), 1),
            "checks": [check_hw_condition(1.0, 0.8, 10**6, 10**6, 2.0)],
            "inf_value": math.inf,
        }
        out = tmp_path / "audit.json"
        write_audit_json(rep, out)
        back = json.loads(out.read_text())
        assert back["kappa"]["kappa"] == pytest.approx(math.sqrt(2))
        assert back["checks"][0]["pass"] is True
        assert back["inf_value"] == "inf"
