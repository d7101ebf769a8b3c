"""
Reference Gaussian mixtures and their reduction identities with the subspace models.
"""
import numpy as np
import pytest
from scipy.stats import multivariate_normal

from src.engine.baselines import baseline_e_step, baseline_m_step, fit_baseline, to_mixture_params
from src.engine.em import e_step
from src.engine.m_step import m_step
from src.state.shared_state import BaselineKind, DimPolicy, EmConfig
from src.tools.metrics import recognition_rate
from src.tools.model_family import parse_model


def _complete_loglik(resp, X, params):
    total = 0.0
    for i in range(params.proportions.shape[0]):
        logs = np.log(params.proportions[i]) + multivariate_normal(params.means[i], params.covariance(i)).logpdf(X)
        total += float(resp[:, i] @ logs)
    return total


def _anisotropic_blobs(rng, n=80):
    labels = np.repeat([0, 1], n // 2)
    centers = np.array([[0.0, 0.0, 0.0], [30.0, 0.0, 0.0]])
    values = centers[labels] + rng.normal(size=(n, 3)) * np.array([4.0, 1.0, 0.3])
    return values, labels


class TestBaselineFits:

    def test_sphe_on_blobs(self, two_blobs):
        values, labels = two_blobs
        report = fit_baseline(values, 2, BaselineKind.SPHE, EmConfig(n_restarts=2))
        assert recognition_rate(labels, report.assignments).rate == 1.0
        assert report.nu == 2 * 5 + 1 + 2
        assert report.model.name == "Sphe-GMM"

    def test_nesting_on_shared_responsibilities(self, rng):
        values, labels = _anisotropic_blobs(rng)
        resp = np.eye(2)[labels]
        cfg = EmConfig(ridge_scale=0.0)
        full = _complete_loglik(resp, values, baseline_m_step(resp, values, BaselineKind.FULL, cfg))
        diag = _complete_loglik(resp, values, baseline_m_step(resp, values, BaselineKind.DIAG, cfg))
        sphe = _complete_loglik(resp, values, baseline_m_step(resp, values, BaselineKind.SPHE, cfg))
        assert full >= diag - 1e-8
        assert diag >= sphe - 1e-8

    def test_full_survives_fewer_points_than_dimensions(self, rng):
        report = fit_baseline(rng.normal(size=(10, 20)), 1, BaselineKind.FULL, EmConfig(n_restarts=1))
        assert np.isfinite(report.loglik)

    def test_com_shares_one_matrix(self, rng):
        values, labels = _anisotropic_blobs(rng)
        params = baseline_m_step(np.eye(2)[labels], values, BaselineKind.COM, EmConfig())
        np.testing.assert_array_equal(params.covariance(0), params.covariance(1))

    @pytest.mark.parametrize("kind", list(BaselineKind))
    def test_subspace_form_has_the_same_density(self, rng, kind):
        values, labels = _anisotropic_blobs(rng)
        params = baseline_m_step(np.eye(2)[labels], values, kind, EmConfig())
        resp, loglik = baseline_e_step(params, values)
        converted = to_mixture_params(params)
        assert converted.dims == [2, 2]
        resp_sub, loglik_sub = e_step(converted, values)
        assert loglik_sub == pytest.approx(loglik, rel=1e-10)
        np.testing.assert_allclose(resp_sub, resp, atol=1e-10)


class TestReductionIdentities:

    @pytest.mark.parametrize("seed", range(20))
    def test_free_model_at_full_dimension_is_full_gmm(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(3, 7))
        X = rng.normal(size=(60, p)) @ rng.normal(size=(p, p))
        resp = rng.dirichlet(np.ones(2), size=60)
        cfg = EmConfig(ridge_scale=0.0)
        sub = m_step(resp, X, parse_model("[a_ij b_i Q_i d]"), DimPolicy.fixed_common(p - 1), cfg)
        _, ll_sub = e_step(sub, X)
        _, ll_full = baseline_e_step(baseline_m_step(resp, X, BaselineKind.FULL, cfg), X)
        assert abs(ll_sub - ll_full) <= 1e-8 * (1.0 + abs(ll_full))

    @pytest.mark.parametrize("seed", range(20))
    def test_common_covariance_at_full_dimension_is_com_gmm(self, seed):
        rng = np.random.default_rng(100 + seed)
        p = int(rng.integers(3, 7))
        X = rng.normal(size=(60, p)) @ rng.normal(size=(p, p))
        resp = rng.dirichlet(np.ones(3), size=60)
        cfg = EmConfig(ridge_scale=0.0)
        sub = m_step(resp, X, parse_model("[a_j b Q d]"), DimPolicy.fixed_common(p - 1), cfg)
        _, ll_sub = e_step(sub, X)
        _, ll_com = baseline_e_step(baseline_m_step(resp, X, BaselineKind.COM, cfg), X)
        assert abs(ll_sub - ll_com) <= 1e-8 * (1.0 + abs(ll_com))
