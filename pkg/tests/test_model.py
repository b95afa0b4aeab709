import math

import numpy as np
import pytest

from src.application.common.errors import ClusteringError, CheckpointFormatError, ShapeError
from src.application.services.kernels.kernel_spec import KernelSpec, kernel_matrix
from src.application.services.model.embedding import EmbeddingShape, embed, init_embedding_params
from src.application.services.model.kmeans import kmeans
from src.application.services.model.network import (
    ModelConfig,
    NeuralNystromModel,
    init_model,
    output_kernel,
)
from src.application.services.model.nystrom import (
    NystromBaseline,
    kernel_layer,
    neustrom_feature,
    nystrom_feature,
    place_cell_activation,
)
from src.application.services.numerics.autodiff import Tensor, tensor_sum
from src.application.services.numerics.gradcheck import gradcheck


def _const(params):
    return {k: Tensor(v) for k, v in params.items()}


def test_zero_weights_give_zero_embedding():
    shape = EmbeddingShape(input_dim=3, hidden_width=5, output_dim=4)
    params = {k: np.zeros_like(v) for k, v in init_embedding_params(shape, np.random.default_rng(0)).items()}
    x = Tensor(np.random.default_rng(1).normal(size=(7, 3)))
    np.testing.assert_array_equal(embed(_const(params), x).values, np.zeros((7, 4)))


def test_unit_slope_makes_embedding_affine():
    shape = EmbeddingShape(input_dim=3, hidden_width=5, output_dim=4)
    params = init_embedding_params(shape, np.random.default_rng(0))
    params["prelu_slope"] = np.ones((1, 1))
    x = np.random.default_rng(1).normal(size=(6, 3))
    expected = (x @ params["A1"] + params["b1"]) @ params["A2"] + params["b2"]
    np.testing.assert_allclose(embed(_const(params), Tensor(x)).values, expected, atol=1e-12)


def test_embedding_init_bounds_follow_fan_in():
    shape = EmbeddingShape(input_dim=4, hidden_width=9, output_dim=3)
    params = init_embedding_params(shape, np.random.default_rng(2))
    assert np.abs(params["A1"]).max() <= 0.5
    assert np.abs(params["A2"]).max() <= 1.0 / 3.0
    assert params["prelu_slope"].item() == 0.25


def test_embedding_rejects_wrong_input_width():
    shape = EmbeddingShape(input_dim=3, hidden_width=5, output_dim=4)
    params = init_embedding_params(shape, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        embed(_const(params), Tensor(np.zeros((2, 2))))


def test_embedding_gradients_match_finite_differences():
    shape = EmbeddingShape(input_dim=2, hidden_width=6, output_dim=3)
    params = init_embedding_params(shape, np.random.default_rng(4))
    x = Tensor(np.random.default_rng(5).normal(size=(5, 2)))
    assert gradcheck(lambda p: tensor_sum(embed(p, x)), params) < 1e-4


def test_rbf_kernel_layer():
    k = kernel_layer(Tensor([[0.0, 0.0], [1.0, 1.0]]), Tensor([[1.0, 0.0]]), KernelSpec("rbf", 1.0))
    np.testing.assert_allclose(k.values, [[math.exp(-1.0), math.exp(-1.0)]])


def test_exp_dot_kernel_layer():
    k = kernel_layer(Tensor([[0.0, 1.0], [2.0, 0.0]]), Tensor([[1.0, 0.0]]), KernelSpec("exp-dot"))
    np.testing.assert_allclose(k.values, [[1.0, math.exp(2.0)]])


def test_place_cell_activation_rectifies_and_normalizes():
    out = place_cell_activation(Tensor([[-1.0, 3.0, 4.0]]))
    np.testing.assert_allclose(out.values, [[0.0, 0.6, 0.8]], atol=1e-12)


def test_place_cell_activation_of_non_positive_row_is_zero():
    out = place_cell_activation(Tensor([[-1.0, 0.0]]), 2.0)
    np.testing.assert_array_equal(out.values, [[0.0, 0.0]])


def test_rbf_features_have_unit_norm():
    rng = np.random.default_rng(0)
    W, V = Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(6, 3)))
    g = neustrom_feature(W, Tensor(np.eye(4)), V, KernelSpec("rbf", 0.1)).values
    np.testing.assert_allclose(np.linalg.norm(g, axis=1), 1.0, atol=1e-9)
    assert np.all(g >= 0)


def test_exp_dot_feature_norm_is_root_self_kernel():
    rng = np.random.default_rng(0)
    W, V = rng.normal(scale=0.3, size=(4, 3)), rng.normal(scale=0.3, size=(6, 3))
    g = neustrom_feature(Tensor(W), Tensor(np.eye(4)), Tensor(V), KernelSpec("exp-dot")).values
    np.testing.assert_allclose(np.linalg.norm(g, axis=1), np.exp(0.5 * (V * V).sum(axis=1)), rtol=1e-9)


def test_readout_must_be_square_in_landmarks():
    with pytest.raises(ShapeError):
        neustrom_feature(Tensor(np.zeros((3, 2))), Tensor(np.eye(2)), Tensor(np.zeros((1, 2))), KernelSpec())


def test_nystrom_is_exact_when_landmarks_are_the_data():
    X = np.random.default_rng(3).normal(scale=2.0, size=(20, 3))
    spec = KernelSpec("rbf", 0.5)
    F = NystromBaseline(X, spec, eps=0.0).features(X)
    np.testing.assert_allclose(F @ F.T, kernel_matrix(spec, X, X), atol=1e-8)


def test_nystrom_with_single_landmark():
    w = np.array([[0.0, 0.0]])
    baseline = NystromBaseline(w, KernelSpec("rbf", 1.0), eps=0.0)
    f = nystrom_feature(baseline, np.array([1.0, 0.0]))
    np.testing.assert_allclose(f, [math.exp(-1.0)])
    assert nystrom_feature(baseline, np.array([0.0, 0.0]))[0] == pytest.approx(1.0)


def test_kmeans_separates_distant_clusters():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 0.1, (20, 2)), rng.normal(10, 0.1, (20, 2))])
    result = kmeans(X, 2, seed=1)
    assert len(set(result.labels[:20])) == 1
    assert len(set(result.labels[20:])) == 1
    assert result.labels[0] != result.labels[20]


def test_kmeans_with_one_cluster_per_point():
    X = np.arange(12.0).reshape(6, 2)
    result = kmeans(X, 6, seed=0)
    np.testing.assert_allclose(np.sort(result.centroids, axis=0), X)


def test_kmeans_on_identical_points_returns_that_point():
    X = np.ones((5, 2))
    result = kmeans(X, 2, seed=0)
    np.testing.assert_array_equal(result.centroids, np.ones((2, 2)))


def test_kmeans_rejects_more_clusters_than_points():
    with pytest.raises(ClusteringError):
        kmeans(np.zeros((3, 2)), 4, seed=0)


def test_kmeans_is_seeded():
    X = np.random.default_rng(8).normal(size=(50, 3))
    np.testing.assert_array_equal(kmeans(X, 5, seed=3).centroids, kmeans(X, 5, seed=3).centroids)


@pytest.fixture
def blob_data():
    return np.random.default_rng(0).normal(size=(200, 2))


def test_init_model_uses_identity_readout_and_kmeans_landmarks(blob_data):
    model = init_model(blob_data, ModelConfig(landmarks=40), seed=7)
    np.testing.assert_array_equal(model.readout, np.eye(40))
    assert model.landmarks.shape == (40, 100)
    assert model.landmark_count == 40


def test_init_model_is_deterministic(blob_data):
    a = init_model(blob_data, ModelConfig(landmarks=10, hidden_width=20, embedding_dim=8), seed=7)
    b = init_model(blob_data, ModelConfig(landmarks=10, hidden_width=20, embedding_dim=8), seed=7)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])


def test_features_are_non_negative_unit_rows(blob_data):
    model = init_model(blob_data, ModelConfig(landmarks=10, hidden_width=20, embedding_dim=8), seed=1)
    G = model.features(blob_data)
    assert G.shape == (200, 10)
    assert np.all(G >= 0)
    np.testing.assert_allclose(np.diag(output_kernel(G)), 1.0, atol=1e-9)


def test_full_forward_gradients_match_finite_differences():
    X = np.random.default_rng(2).normal(size=(10, 2))
    model = init_model(X, ModelConfig(landmarks=3, hidden_width=6, embedding_dim=4, rff_half_count=5), seed=3)
    x = Tensor(X)
    assert gradcheck(lambda p: tensor_sum(model.forward(p, x)), model.parameters()) < 1e-3


def test_rff_gamma_is_clamped_positive():
    X = np.random.default_rng(2).normal(size=(10, 2))
    model = init_model(X, ModelConfig(landmarks=3, hidden_width=6, embedding_dim=4, rff_half_count=5), seed=3)
    params = model.parameters()
    params["rff_gamma"] = np.full((1, 1), -1.0)
    assert model.with_parameters(params).params["rff_gamma"].item() == 1e-8


def test_tensor_round_trip_preserves_features():
    X = np.random.default_rng(2).normal(size=(30, 2))
    model = init_model(X, ModelConfig(landmarks=4, hidden_width=6, embedding_dim=5, rff_half_count=3,
                                      output_kernel=KernelSpec("rbf", 0.3)), seed=5)
    restored = NeuralNystromModel.from_tensors(model.to_tensors())
    assert restored.output_kernel == model.output_kernel
    np.testing.assert_array_equal(restored.features(X), model.features(X))


def test_from_tensors_reports_missing_weights():
    X = np.random.default_rng(2).normal(size=(30, 2))
    tensors = init_model(X, ModelConfig(landmarks=4, hidden_width=6, embedding_dim=5), seed=5).to_tensors()
    del tensors["A2"]
    with pytest.raises(CheckpointFormatError):
        NeuralNystromModel.from_tensors(tensors)
