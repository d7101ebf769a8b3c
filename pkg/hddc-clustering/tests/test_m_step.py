"""
Closed-form M step estimators.

Ground truth: hand-built scatters with known spectra, and a dense grid search
on the expected complete-data log-likelihood around the returned estimate.
"""
import numpy as np
import pytest

from oracles import expected_complete_loglik
from src.engine.m_step import dimension_cap, m_step
from src.errors import DegenerateClusterError, InvalidInputError
from src.state.shared_state import DimPolicy, EmConfig, MixtureParams
from src.tools.model_family import parse_model, validate_params

OPTIMALITY_MODELS = [
    "[a_ij b_i Q_i d_i]",
    "[a_i b_i Q_i d_i]",
    "[a b Q_i d_i]",
    "[a_i b_i Q d]",
    "[a b Q d]",
]


def _axis_points(spectrum, offset=None):
    """Points whose scatter around their mean is exactly diag(spectrum)."""
    p = len(spectrum)
    rows = []
    for j, value in enumerate(spectrum):
        e = np.zeros(p)
        e[j] = np.sqrt(p * value)
        rows.extend([e, -e])
    X = np.array(rows)
    return X if offset is None else X + offset


def _rotate(Q: np.ndarray, angle: float) -> np.ndarray:
    R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    return R @ Q


class TestClosedForms:

    def test_per_class_noise_and_variance(self):
        X = _axis_points([4.0, 2.0, 1.0])
        params = m_step(np.ones((6, 1)), X, parse_model("[a_i b_i Q_i d_i]"), DimPolicy.fixed_per_class([1]), EmConfig())
        np.testing.assert_allclose(params.a[0], [4.0], rtol=1e-12)
        np.testing.assert_allclose(params.b, [1.5], rtol=1e-12)
        np.testing.assert_allclose(np.abs(params.orientations[0][:, 0]), [1.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(params.means[0], np.zeros(3), atol=1e-14)

    def test_global_a_is_weighted_mean(self):
        far = np.array([100.0, 0.0, 0.0])
        X = np.vstack([_axis_points([4.0, 2.0, 1.0]), _axis_points([6.0, 2.0, 1.0], far)])
        resp = np.zeros((12, 2))
        resp[:6, 0] = 1.0
        resp[6:, 1] = 1.0
        params = m_step(resp, X, parse_model("[a b_i Q_i d_i]"), DimPolicy.fixed_per_class([1, 1]), EmConfig())
        np.testing.assert_allclose(params.a[0], [5.0], rtol=1e-12)
        np.testing.assert_allclose(params.a[1], [5.0], rtol=1e-12)
        np.testing.assert_allclose(params.proportions, [0.5, 0.5])
        np.testing.assert_allclose(params.b, [1.5, 1.5], rtol=1e-12)

    def test_global_b_uses_mean_dimension(self):
        far = np.array([100.0, 0.0, 0.0, 0.0])
        X = np.vstack([_axis_points([8.0, 3.0, 1.0, 1.0]), _axis_points([9.0, 5.0, 2.0, 2.0], far)])
        resp = np.zeros((16, 2))
        resp[:8, 0] = 1.0
        resp[8:, 1] = 1.0
        params = m_step(resp, X, parse_model("[a_ij b Q_i d_i]"), DimPolicy.fixed_per_class([1, 2]), EmConfig())
        # xi = 1.5, residual trace = 0.5 * 5 + 0.5 * 4
        np.testing.assert_allclose(params.b, [4.5 / 2.5, 4.5 / 2.5], rtol=1e-12)
        np.testing.assert_allclose(params.a[1], [9.0, 5.0], rtol=1e-12)

    def test_shared_a_j(self):
        far = np.array([100.0, 0.0, 0.0, 0.0])
        X = np.vstack([_axis_points([8.0, 4.0, 1.0, 1.0]), _axis_points([6.0, 2.0, 1.0, 1.0], far)])
        resp = np.zeros((16, 2))
        resp[:8, 0] = 1.0
        resp[8:, 1] = 1.0
        params = m_step(resp, X, parse_model("[a_j b_i Q_i d]"), DimPolicy.fixed_common(2), EmConfig())
        np.testing.assert_allclose(params.a[0], [7.0, 3.0], rtol=1e-12)
        np.testing.assert_array_equal(params.a[0], params.a[1])

    def test_scree_dimension_per_class(self):
        X = _axis_points([150.0, 148.0, 5.0, 4.5, 4.0])
        params = m_step(np.ones((10, 1)), X, parse_model("[a_ij b_i Q_i d_i]"), DimPolicy.scree(0.2), EmConfig())
        assert params.dims == [2]

    def test_common_covariance_from_pooled_scatter(self):
        far = np.array([100.0, 0.0, 0.0])
        X = np.vstack([_axis_points([4.0, 2.0, 1.0]), _axis_points([6.0, 2.0, 1.0], far)])
        resp = np.zeros((12, 2))
        resp[:6, 0] = 1.0
        resp[6:, 1] = 1.0
        params = m_step(resp, X, parse_model("[a b Q d]"), DimPolicy.fixed_common(1), EmConfig())
        np.testing.assert_allclose(params.a[0], [5.0], rtol=1e-12)
        np.testing.assert_allclose(params.b, [1.5, 1.5], rtol=1e-12)
        assert validate_params(params, parse_model("[a b Q d]")).ok

    def test_common_orientation_diagnostics(self, rng):
        X = rng.normal(size=(60, 4)) * np.array([5.0, 2.0, 1.0, 0.5])
        resp = rng.dirichlet(np.ones(2), size=60)
        params = m_step(resp, X, parse_model("[a_i b_i Q d]"), DimPolicy.fixed_common(1), EmConfig())
        assert "inner_converged" in params.diagnostics
        assert params.diagnostics["inner_iterations"] >= 1
        assert validate_params(params, parse_model("[a_i b_i Q d]")).ok

    def test_empty_component(self, rng):
        resp = np.zeros((20, 2))
        resp[:, 0] = 1.0
        with pytest.raises(DegenerateClusterError) as info:
            m_step(resp, rng.normal(size=(20, 3)), parse_model("[a b Q_i d_i]"), DimPolicy.scree(0.2), EmConfig())
        assert info.value.component == 1

    def test_dimension_too_large(self, rng):
        with pytest.raises(InvalidInputError):
            m_step(np.ones((20, 1)), rng.normal(size=(20, 3)), parse_model("[a b Q_i d_i]"),
                   DimPolicy.fixed_per_class([3]), EmConfig())

    def test_baseline_rejected(self, rng):
        with pytest.raises(InvalidInputError):
            m_step(np.ones((10, 1)), rng.normal(size=(10, 3)), parse_model("Full-GMM"), DimPolicy.scree(0.2), EmConfig())

    def test_dimension_cap(self):
        policy = DimPolicy.scree(0.2)
        assert dimension_cap(policy, 100, 6.0) == 5
        assert dimension_cap(policy, 10, 500.0) == 9
        assert dimension_cap(policy, 10, 1.0) == 1
        assert dimension_cap(DimPolicy.scree(0.2, d_max=3), 10, 500.0) == 3


class TestGramPathInMStep:

    @pytest.mark.parametrize("seed", range(5))
    def test_small_classes_match_direct_path(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(24, 60)) * np.linspace(4.0, 0.5, 60)
        resp = np.zeros((24, 2))
        resp[:12, 0] = 1.0
        resp[12:, 1] = 1.0
        model = parse_model("[a_ij b_i Q_i d_i]")
        policy = DimPolicy.fixed_per_class([3, 4])
        gram = m_step(resp, X, model, policy, EmConfig(gram_threshold=10**6))
        direct = m_step(resp, X, model, policy, EmConfig(gram_threshold=1))
        assert gram.diagnostics["gram"] == [True, True]
        assert direct.diagnostics["gram"] == [False, False]
        for i in range(2):
            np.testing.assert_allclose(gram.a[i], direct.a[i], rtol=1e-8)
            overlap = np.abs(np.sum(gram.orientations[i] * direct.orientations[i], axis=0))
            np.testing.assert_allclose(overlap, 1.0, atol=1e-6)
        np.testing.assert_allclose(gram.b, direct.b, rtol=1e-8)

    def test_scree_under_gram_path_stays_within_rank(self, rng):
        X = rng.normal(size=(8, 40))
        params = m_step(np.ones((8, 1)), X, parse_model("[a_ij b_i Q_i d_i]"), DimPolicy.scree(0.01), EmConfig())
        assert 1 <= params.dims[0] <= 7


def _perturbed(params: MixtureParams, fa: float, fb: float, angle: float) -> MixtureParams:
    return params.model_copy(update={
        "a": [a * fa for a in params.a],
        "b": params.b * fb,
        "orientations": [_rotate(Q, angle) for Q in params.orientations],
    })


@pytest.mark.parametrize("name", OPTIMALITY_MODELS)
def test_estimates_beat_neighbouring_grid(name):
    rng = np.random.default_rng(99)
    model = parse_model(name)
    cfg = EmConfig(inner_max_iters=500, inner_tol=1e-13)
    factors = np.exp(np.linspace(-0.3, 0.3, 21))
    angles = np.linspace(-0.3, 0.3, 21)
    for _ in range(2):
        cov = np.array([[6.0, 2.0], [2.0, 2.0]])
        X = rng.multivariate_normal(np.zeros(2), cov, size=80) + rng.integers(0, 2, size=(80, 1)) * np.array([4.0, 0.0])
        resp = rng.dirichlet(np.ones(2), size=80)
        params = m_step(resp, X, model, DimPolicy.fixed_common(1), cfg)
        best = expected_complete_loglik(resp, X, params)
        tol = 1e-9 * (1.0 + abs(best))
        for fa in factors:
            for fb in factors:
                for angle in angles:
                    candidate = _perturbed(params, fa, fb, angle)
                    if np.any([np.any(a < b) for a, b in zip(candidate.a, candidate.b)]):
                        continue
                    assert expected_complete_loglik(resp, X, candidate) <= best + tol
