"""Synthetic designs: calibration identities, correlations, determinism."""

import json
import math

import numpy as np
import pytest

from huberagg import (
    DomainError,
    cauchy_sample,
    derive_seed,
    gen_setup1,
    gen_setup2,
    gen_setup3,
    generate,
    huber_loss,
    moving_average_weights,
    read_dataset_csv,
    setup1_covariance,
    write_dataset_csv,
)
from huberagg.simulate import Setup1Config, Setup2Config, Setup3Config


class TestCauchy:
    def test_median_and_half_mass(self):
        rng = np.random.default_rng(5)
        draws = cauchy_sample(2.0, 0.5, rng, size=100_000)
        assert np.median(draws) == pytest.approx(2.0, abs=0.02 * 0.5)
        assert np.mean(np.abs(draws - 2.0) <= 0.5) == pytest.approx(0.5, abs=0.01)

    def test_scale_doubles_iqr(self):
        rng = np.random.default_rng(6)
        a = cauchy_sample(0.0, 1.0, rng, size=200_000)
        rng = np.random.default_rng(6)
        b = cauchy_sample(0.0, 2.0, rng, size=200_000)
        iqr = lambda v: np.quantile(v, 0.75) - np.quantile(v, 0.25)
        assert iqr(b) == pytest.approx(2 * iqr(a), rel=1e-9)

    def test_rejects_bad_scale(self):
        with pytest.raises(DomainError):
            cauchy_sample(0.0, 0.0, np.random.default_rng(0))

    def test_bayes_predictor_is_huber_optimal(self):
        # the regression function minimizes Huber risk under symmetric noise:
        # scan offsets around 0 and check the risk minimum sits at the center
        rng = np.random.default_rng(17)
        eps = cauchy_sample(0.0, 0.3, rng, size=100_000)
        deltas = np.arange(-0.5, 0.5001, 0.01)
        risks = [float(np.mean(huber_loss(eps + d, 2.0))) for d in deltas]
        assert abs(deltas[int(np.argmin(risks))]) <= 0.01 + 1e-12


class TestSetup1:
    def test_raw_weight_value(self):
        w = moving_average_weights(1)
        assert w.size == 3
        assert w[1] == 1.0
        assert w[0] == pytest.approx(math.exp(-2.33**2 / 2), rel=1e-12)
        assert w[0] == pytest.approx(0.0662414, abs=5e-7)

    def test_covariance_is_normalized_autocorrelation(self):
        cor = 3
        sigma = setup1_covariance(cor, 10)
        assert np.allclose(np.diag(sigma), 1.0)
        assert np.allclose(sigma, sigma.T)
        # bandwidth: entries beyond lag 2*cor vanish
        assert sigma[0, 2 * cor + 1] == 0.0
        assert sigma[0, 1] > 0

    def test_calibration_identity(self):
        for seed in (0, 1, 2):
            cfg = Setup1Config(n=8, d=40, cor=4, k_blocks=3, seed=seed)
            _data, truth = gen_setup1(cfg)
            sigma = setup1_covariance(4, 40)
            val = float(truth.w_star @ sigma @ truth.w_star)
            assert val == pytest.approx(1.0, abs=1e-12)
            assert truth.l2_norm == 1.0

    def test_support_blocks(self):
        cfg = Setup1Config(n=5, d=30, cor=2, k_blocks=4, seed=3)
        _data, truth = gen_setup1(cfg)
        nz = np.flatnonzero(truth.w_star)
        assert nz.size == 12  # 3 * k_blocks
        vals = np.sort(np.unique(np.round(truth.w_star[nz], 12)))
        b = truth.meta["b"]
        # magnitudes b, b/2 (interpolated middle block), b/4
        np.testing.assert_allclose(vals, np.sort([b, b / 2, b / 4]), rtol=1e-9)

    def test_marginals_standard(self):
        cfg = Setup1Config(n=100_000, d=6, cor=2, k_blocks=2, seed=11)
        data, _truth = gen_setup1(cfg)
        assert np.all(np.abs(data.x.mean(axis=0)) <= 0.02)
        assert np.all(np.abs(data.x.var(axis=0) - 1.0) <= 0.03)

    def test_empirical_matches_analytic_covariance(self):
        cfg = Setup1Config(n=100_000, d=5, cor=2, k_blocks=1, seed=13)
        data, _ = gen_setup1(cfg)
        emp = np.cov(data.x, rowvar=False)
        np.testing.assert_allclose(emp, setup1_covariance(2, 5), atol=0.02)

    def test_determinism(self):
        cfg = Setup1Config(n=50, d=20, cor=3, k_blocks=2, seed=21)
        d1, t1 = gen_setup1(cfg)
        d2, t2 = gen_setup1(Setup1Config(n=50, d=20, cor=3, k_blocks=2, seed=21))
        np.testing.assert_array_equal(d1.x, d2.x)
        np.testing.assert_array_equal(d1.y, d2.y)
        np.testing.assert_array_equal(t1.w_star, t2.w_star)

    def test_rejects_support_overflow(self):
        with pytest.raises(DomainError):
            Setup1Config(n=10, d=8, cor=2, k_blocks=3)


class TestSetup2:
    def test_group_correlations(self):
        cfg = Setup2Config(n=100_000, d=9, r=2, s=2, seed=31)
        data, truth = gen_setup2(cfg)
        x = data.x
        cc = np.corrcoef(x, rowvar=False)
        # group 0: predictive column 0, noise columns 1, 2
        assert cc[0, 1] == pytest.approx(math.sqrt(0.8), abs=0.02)
        assert cc[0, 2] == pytest.approx(math.sqrt(0.8), abs=0.02)
        assert cc[1, 2] == pytest.approx(0.8, abs=0.02)
        # across groups: independent
        assert abs(cc[0, 3]) <= 0.02
        assert abs(cc[1, 4]) <= 0.02
        # trailing background column independent of everything
        assert abs(cc[0, 8]) <= 0.02

    def test_weight_scale(self):
        cfg = Setup2Config(n=10, d=12, r=4, s=1, seed=1)
        _data, truth = gen_setup2(cfg)
        nz = np.flatnonzero(truth.w_star)
        assert nz.size == 4
        np.testing.assert_allclose(truth.w_star[nz], 3 / math.sqrt(4))
        assert truth.l2_norm == 3.0

    def test_marginals_standard(self):
        cfg = Setup2Config(n=100_000, d=8, r=2, s=1, seed=3)
        data, _ = gen_setup2(cfg)
        assert np.all(np.abs(data.x.mean(axis=0)) <= 0.02)
        assert np.all(np.abs(data.x.var(axis=0) - 1.0) <= 0.03)

    def test_rejects_layout_overflow(self):
        with pytest.raises(DomainError):
            Setup2Config(n=10, d=5, r=2, s=2)


class TestSetup3:
    def test_equicorrelation(self):
        cfg = Setup3Config(n=100_000, d=6, r=3, rho=0.5, seed=41)
        data, _ = gen_setup3(cfg)
        cc = np.corrcoef(data.x, rowvar=False)
        for i in range(3):
            for j in range(i + 1, 3):
                assert cc[i, j] == pytest.approx(0.5, abs=0.02)
        assert abs(cc[0, 4]) <= 0.02

    def test_weight_scale_closed_form(self):
        cfg = Setup3Config(n=5, d=10, r=2, rho=0.5, seed=1)
        _data, truth = gen_setup3(cfg)
        # u'Sigma u = r + r(r-1)rho = 2 + 2*0.5 = 3
        np.testing.assert_allclose(
            truth.w_star[:2], 3 / math.sqrt(3.0), rtol=1e-12
        )
        assert truth.l2_norm == 3.0

    def test_rho_zero_reduces_to_independent(self):
        cfg = Setup3Config(n=5, d=6, r=3, rho=0.0, seed=2)
        _data, truth = gen_setup3(cfg)
        np.testing.assert_allclose(truth.w_star[:3], 3 / math.sqrt(3), rtol=1e-12)

    def test_rejects_bad_rho(self):
        with pytest.raises(DomainError):
            Setup3Config(n=5, d=6, r=2, rho=1.0)


class TestGenerate:
    def test_dispatch(self):
        data, truth, cfg = generate(3, n=20, d=8, r=2, seed=5)
        assert data.n == 20 and data.d == 8
        assert isinstance(cfg, Setup3Config)

    def test_unknown_setup(self):
        with pytest.raises(DomainError):
            generate(7, n=5, d=2)


class TestDeriveSeed:
    def test_deterministic_and_distinct(self):
        a = derive_seed(123, 0, 5)
        assert a == derive_seed(123, 0, 5)
        assert a != derive_seed(123, 0, 6)
        assert a != derive_seed(123, 1, 5)
        assert a != derive_seed(124, 0, 5)

    def test_range(self):
        assert 0 <= derive_seed(0, 0, 0) < 2**64


class TestDatasetCsv:
    def test_round_trip_with_sidecar(self, tmp_path):
        data, truth, cfg = generate(2, n=12, d=6, r=2, s=1, seed=9)
        f = tmp_path / "ds.csv"
        write_dataset_csv(f, data, truth, cfg)
        back, meta = read_dataset_csv(f)
        np.testing.assert_array_equal(back.x, data.x)
        np.testing.assert_array_equal(back.y, data.y)
        assert meta["config"]["r"] == 2
        np.testing.assert_allclose(meta["w_star"], truth.w_star)

    def test_rejects_missing_header(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("a,b\n1,2\n")
        with pytest.raises(DomainError):
            read_dataset_csv(f)
