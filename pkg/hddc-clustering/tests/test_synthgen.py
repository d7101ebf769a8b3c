"""
Synthetic data generators and the INI spec format.
"""
import numpy as np
import pytest

from src.errors import DataParseError, DataReadError, InvalidInputError
from src.state.shared_state import ClassSpec, FullRankSpec, SimSpec
from src.tools.model_family import enumerate_models, parse_model
from src.tools.synthgen import (
    generate,
    hyper_param_spec,
    model_spec,
    parse_sim_spec,
    random_orientation,
    read_sim_spec,
    simulate,
    simulate_full_rank,
)

SPEC_TEXT = """
[global]
k = 2
p = 6
n = 400
seed = 3

[class 1]
proportion = 0.25
dim = 1
a = 50
b = 2

[class 2]
proportion = 0.75
dim = 2
a = 40, 20
b = 1
"""


class TestOrientation:

    def test_square_is_orthogonal(self):
        Q = random_orientation(5, 5, 1)
        assert abs(abs(np.linalg.det(Q)) - 1.0) < 1e-8

    def test_deterministic(self):
        np.testing.assert_array_equal(random_orientation(10, 3, 8), random_orientation(10, 3, 8))

    def test_columns_orthonormal(self, rng):
        for _ in range(20):
            p = int(rng.integers(2, 30))
            d = int(rng.integers(1, p + 1))
            Q = random_orientation(p, d, rng)
            np.testing.assert_allclose(Q.T @ Q, np.eye(d), atol=1e-10)

    def test_bad_shape(self):
        with pytest.raises(InvalidInputError):
            random_orientation(3, 4, 0)


class TestSimulate:

    def test_sample_spectrum(self):
        spec = SimSpec(k=1, p=3, n=10000, seed=5, classes=[ClassSpec(proportion=1.0, dim=1, a=[4.0], b=1.0)])
        data = simulate(spec)
        values = np.sort(np.linalg.eigvalsh(np.cov(data.values.T, bias=True)))[::-1]
        np.testing.assert_allclose(values, [4.0, 1.0, 1.0], rtol=0.05)

    def test_zero_proportion_classes_stay_empty(self):
        spec = SimSpec(k=2, p=4, n=50, classes=[
            ClassSpec(proportion=1.0, dim=1, a=[5.0], b=1.0),
            ClassSpec(proportion=0.0, dim=1, a=[5.0], b=1.0),
        ])
        assert np.all(simulate(spec).labels == 0)

    def test_class_counts(self):
        data = simulate(hyper_param_spec(p=20, n=1000, seed=11))
        counts = np.bincount(data.labels, minlength=3)
        for count, pi in zip(counts, (0.4, 0.3, 0.3)):
            assert abs(count - 1000 * pi) <= 4 * np.sqrt(1000 * pi * (1 - pi))

    def test_truth_matches_spec(self):
        data = simulate(hyper_param_spec(p=30, n=100, seed=2))
        assert data.truth.dims == [2, 5, 10]
        np.testing.assert_allclose(data.truth.b, [15.0, 15.0, 15.0])
        np.testing.assert_allclose(np.linalg.norm(data.truth.means, axis=1), np.sqrt(15.0))

    def test_class_covariance_converges(self):
        spec = SimSpec(k=1, p=4, n=100000, seed=17, classes=[ClassSpec(proportion=1.0, dim=2, a=[9.0, 4.0], b=1.0)])
        data = simulate(spec)
        Q = data.truth.orientations[0]
        expected = (Q * np.array([9.0, 4.0])) @ Q.T + (np.eye(4) - Q @ Q.T)
        empirical = np.cov(data.values.T, bias=True)
        assert np.max(np.abs(empirical - expected)) <= 0.05 * np.max(np.abs(expected))

    def test_shared_orientation(self):
        spec = SimSpec(k=2, p=5, n=20, shared_orientation=True, classes=[
            ClassSpec(proportion=0.5, dim=2, a=[5.0], b=1.0),
            ClassSpec(proportion=0.5, dim=2, a=[8.0], b=1.0),
        ])
        truth = simulate(spec).truth
        np.testing.assert_array_equal(truth.orientations[0], truth.orientations[1])

    @pytest.mark.parametrize("model", [m for m in enumerate_models() if m.name.endswith("d_i]") and "Q_i" in m.name])
    def test_model_designs(self, model):
        spec = model_spec(model, p=20, n=60, seed=1)
        assert [c.dim for c in spec.classes] == [2, 5, 10]
        assert simulate(spec).values.shape == (60, 20)

    def test_model_design_needs_free_per_class_model(self):
        with pytest.raises(InvalidInputError):
            model_spec(parse_model("[a b Q_i d]"))


class TestFullRank:

    def test_unit_condition_is_spherical(self):
        data = simulate_full_rank(FullRankSpec(k=2, p=4, n=10, condition_number=1.0, seed=0))
        for cov in data.covariances:
            np.testing.assert_allclose(cov, np.eye(4), atol=1e-12)

    def test_condition_number_exact(self):
        data = simulate_full_rank(FullRankSpec(k=3, p=12, n=30, condition_number=100.0, seed=4))
        for cov in data.covariances:
            values = np.linalg.eigvalsh(cov)
            assert values[-1] / values[0] == pytest.approx(100.0, rel=1e-8)

    def test_distinct_seeds(self):
        first = simulate_full_rank(FullRankSpec(k=1, p=5, n=10, condition_number=10.0, seed=1))
        second = simulate_full_rank(FullRankSpec(k=1, p=5, n=10, condition_number=10.0, seed=2))
        assert not np.allclose(first.covariances[0], second.covariances[0])


class TestSpecFiles:

    def test_parse(self):
        spec = parse_sim_spec(SPEC_TEXT)
        assert isinstance(spec, SimSpec)
        assert spec.k == 2 and spec.p == 6 and spec.seed == 3
        assert spec.classes[1].a == [40.0, 20.0]

    def test_full_rank_kind(self):
        spec = parse_sim_spec("[global]\nkind = full-rank\nk = 2\np = 5\nn = 50\ncondition_number = 30\n")
        assert isinstance(spec, FullRankSpec)
        assert spec.condition_number == 30.0

    def test_missing_global(self):
        with pytest.raises(DataParseError):
            parse_sim_spec("[class 1]\nproportion = 1\n")

    def test_non_numeric_value(self):
        with pytest.raises(DataParseError):
            parse_sim_spec(SPEC_TEXT.replace("n = 400", "n = many"))

    def test_inconsistent_spec(self):
        with pytest.raises(InvalidInputError):
            parse_sim_spec(SPEC_TEXT.replace("proportion = 0.75", "proportion = 0.5"))

    def test_read_and_generate(self, tmp_path):
        path = tmp_path / "spec.ini"
        path.write_text(SPEC_TEXT, encoding="utf-8")
        data = generate(read_sim_spec(path))
        assert data.values.shape == (400, 6)
        reseeded = generate(read_sim_spec(path), seed=99)
        assert not np.array_equal(data.values, reseeded.values)
        np.testing.assert_array_equal(data.values, generate(read_sim_spec(path)).values)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataReadError):
            read_sim_spec(tmp_path / "absent.ini")
