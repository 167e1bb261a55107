import math

import numpy as np
import pytest

from auxgraph import (
    COSINE,
    TRAINED,
    DataError,
    EdgeScorerParams,
    edge_matrix,
    edge_score,
    init_params,
    load_params,
    save_params,
    vertex_score,
)
from auxgraph.scorer import cosine_matrix, sigmoid


class TestVertexScore:
    def test_identical_direction(self):
        assert vertex_score(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 1.0

    def test_orthogonal(self):
        assert vertex_score(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_hand_value(self):
        got = vertex_score(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
        assert got == pytest.approx(0.7071067811865475, abs=1e-15)

    def test_zero_vector_rejected(self):
        with pytest.raises(DataError, match="zero"):
            vertex_score(np.zeros(2), np.ones(2))

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = rng.normal(size=5)
            b = rng.normal(size=5)
            s1 = vertex_score(a, b)
            s2 = vertex_score(3.7 * a, b)
            s3 = vertex_score(a, 0.002 * b)
            assert abs(s1 - s2) < 1e-12
            assert abs(s1 - s3) < 1e-12


def identity_params(dim, fc_weight=None, fc_bias=0.0, alpha=1.0):
    return EdgeScorerParams(
        bn_gamma=np.ones(dim),
        bn_beta=np.zeros(dim),
        bn_mean=np.zeros(dim),
        bn_var=np.ones(dim),
        fc_weight=np.zeros(dim) if fc_weight is None else np.asarray(fc_weight, float),
        bn_eps=1e-5,
        fc_bias=fc_bias,
        alpha=alpha,
    )


class TestEdgeScore:
    def test_zero_fc_gives_half(self):
        params = identity_params(3)
        rng = np.random.default_rng(1)
        for _ in range(10):
            s = edge_score(rng.normal(size=3), rng.normal(size=3), params)
            assert s == 0.5

    def test_equal_inputs_give_sigmoid_bias(self):
        params = identity_params(4, fc_weight=np.ones(4), fc_bias=-1.25)
        f = np.array([0.3, -2.0, 1.0, 0.0])
        got = edge_score(f, f, params)
        # squared difference is zero, so x_hat = -mean/sqrt(var+eps) = 0 here
        assert got == pytest.approx(float(sigmoid(-1.25)), abs=1e-15)

    def test_hand_pipeline_value(self):
        # d=2, f_i=(1,0), f_j=(0,0): feature (1,0); identity normalization
        params = identity_params(2, fc_weight=[2.0, 0.0])
        got = edge_score(np.array([1.0, 0.0]), np.array([0.0, 0.0]), params)
        z = 2.0 * (1.0 - 0.0) / math.sqrt(1.0 + 1e-5)
        want = 1.0 / (1.0 + math.exp(-z))
        assert got == pytest.approx(want, abs=1e-15)
        assert got == pytest.approx(1.0 / (1.0 + math.exp(-2.0)), abs=1e-4)

    def test_symmetry_bit_exact(self):
        params = init_params(6, seed=3)
        rng = np.random.default_rng(2)
        for _ in range(25):
            a = rng.normal(size=6)
            b = rng.normal(size=6)
            assert edge_score(a, b, params) == edge_score(b, a, params)

    def test_open_unit_interval(self):
        params = init_params(4, seed=1)
        rng = np.random.default_rng(5)
        for _ in range(50):
            s = edge_score(rng.normal(size=4), rng.normal(size=4), params)
            assert 0.0 < s < 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DataError, match="mismatch"):
            edge_score(np.ones(3), np.ones(4), identity_params(3))

    def test_batch_stats_override(self):
        params = init_params(3, seed=6)
        a = np.array([0.5, -1.0, 2.0])
        b = np.array([0.0, 1.0, -0.5])
        with_running = edge_score(a, b, params)
        same = edge_score(a, b, params, batch_stats=(params.bn_mean, params.bn_var))
        assert same == with_running
        shifted = edge_score(a, b, params, batch_stats=(params.bn_mean + 1.0, params.bn_var))
        assert shifted != with_running


class TestEdgeMatrix:
    def test_two_identical_vectors_cosine(self):
        s = edge_matrix(np.array([[1.0, 2.0], [1.0, 2.0]]), COSINE)
        np.testing.assert_allclose(s, [[0.0, 1.0], [1.0, 0.0]])

    def test_orthogonal_cosine(self):
        s = edge_matrix(np.eye(3), COSINE)
        np.testing.assert_allclose(s, np.zeros((3, 3)), atol=1e-15)

    def test_trained_zero_fc(self):
        s = edge_matrix(np.random.default_rng(0).normal(size=(4, 3)), TRAINED, identity_params(3))
        off = ~np.eye(4, dtype=bool)
        assert np.all(s[off] == 0.5)
        assert np.all(np.diag(s) == 0.0)

    def test_transpose_bit_exact(self):
        rng = np.random.default_rng(7)
        vectors = rng.normal(size=(9, 5))
        for mode, params in ((COSINE, None), (TRAINED, init_params(5, seed=2))):
            s = edge_matrix(vectors, mode, params)
            assert np.array_equal(s, s.T)

    def test_needs_two_vectors(self):
        with pytest.raises(DataError):
            edge_matrix(np.ones((1, 3)), COSINE)


def test_cosine_matrix_range():
    rng = np.random.default_rng(11)
    c = cosine_matrix(rng.normal(size=(6, 4)), rng.normal(size=(3, 4)))
    assert np.all(c <= 1.0) and np.all(c >= -1.0)


def test_params_round_trip(tmp_path):
    params = init_params(5, seed=9, alpha=2.5)
    params.fc_bias = -0.75
    save_params(params, tmp_path / "p")
    loaded = load_params(tmp_path / "p")
    assert loaded.bn_eps == params.bn_eps
    assert loaded.fc_bias == params.fc_bias
    assert loaded.alpha == params.alpha
    # vectors go through float32 storage
    np.testing.assert_allclose(loaded.fc_weight, params.fc_weight, atol=1e-7)
    save_params(loaded, tmp_path / "q")
    reloaded = load_params(tmp_path / "q")
    assert np.array_equal(loaded.fc_weight, reloaded.fc_weight)


def test_load_params_rejects_bad_manifest(tmp_path):
    save_params(init_params(3, seed=0), tmp_path / "p")
    manifest = tmp_path / "p.manifest"
    manifest.write_text(manifest.read_text().replace("dtype=f32le", "dtype=f64"))
    with pytest.raises(DataError, match="dtype"):
        load_params(tmp_path / "p")


def test_params_validation():
    with pytest.raises(DataError, match="bn_var"):
        EdgeScorerParams(
            bn_gamma=np.ones(2), bn_beta=np.zeros(2), bn_mean=np.zeros(2),
            bn_var=np.array([1.0, -0.1]), fc_weight=np.zeros(2),
        )
    with pytest.raises(DataError, match="bn_eps"):
        EdgeScorerParams(
            bn_gamma=np.ones(2), bn_beta=np.zeros(2), bn_mean=np.zeros(2),
            bn_var=np.ones(2), fc_weight=np.zeros(2), bn_eps=0.0,
        )
