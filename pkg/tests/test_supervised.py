import numpy as np
import pytest

from src.application.common.errors import LabelError
from src.application.services.data.synthetic import SyntheticSpec, gen_synthetic
from src.application.services.model.network import ModelConfig, init_model
from src.application.services.supervised.task_head import (
    TaskHead,
    check_labels,
    task_feature,
    task_heads_from_tensors,
    train_task,
)
from src.application.services.training.finite import TrainConfig
from src.infrastructure.checkpoint import checkpoint_digest, save_checkpoint


@pytest.fixture
def two_circles():
    dataset = gen_synthetic(SyntheticSpec("two-circles", n=20))
    model = init_model(dataset.points, ModelConfig(landmarks=6, hidden_width=10, embedding_dim=6), seed=0)
    return dataset, model


def test_identity_head_reproduces_base_features(two_circles):
    dataset, model = two_circles
    G = model.features(dataset.points)
    np.testing.assert_allclose(TaskHead("id", np.eye(6)).features(G), G, atol=1e-9)


def test_task_feature_for_single_point(two_circles):
    dataset, model = two_circles
    h = task_feature(TaskHead("id", np.eye(6)), model, dataset.points[3])
    assert h.shape == (6,)
    np.testing.assert_allclose(h, model.features(dataset.points[3:4])[0], atol=1e-9)


def test_trained_head_features_are_non_negative(two_circles):
    dataset, model = two_circles
    labeled = np.arange(0, 40, 2)
    result = train_task(labeled, dataset.labels["circle"][labeled], model, dataset.points,
                        TrainConfig(epochs=3, learning_rate=1e-2), task_id="circle")
    H = result.head.features(model.features(dataset.points))
    assert H.shape == (40, 6)
    assert np.all(H >= 0)
    assert len(result.history) == 3


def test_single_class_is_rejected():
    with pytest.raises(LabelError):
        check_labels(np.array([1, 1, 1]))


def test_missing_expected_class_is_rejected():
    with pytest.raises(LabelError) as info:
        check_labels(np.array([0, 0, 1]), expected_classes=[0, 1, 2])
    assert "[2]" in str(info.value)


def test_task_training_leaves_base_checkpoint_untouched(two_circles, tmp_path):
    dataset, model = two_circles
    path = save_checkpoint(tmp_path / "base.neus", model.to_tensors())
    before = checkpoint_digest(path)
    labeled = np.arange(40)
    train_task(labeled, dataset.labels["half"], model, dataset.points, TrainConfig(epochs=2, learning_rate=1e-2))
    after = checkpoint_digest(save_checkpoint(tmp_path / "after.neus", model.to_tensors()))
    assert before == after


def test_tasks_are_trained_independently(two_circles):
    dataset, model = two_circles
    labeled = np.arange(40)
    config = TrainConfig(epochs=2, learning_rate=1e-2, seed=5)
    alone = train_task(labeled, dataset.labels["circle"], model, dataset.points, config, "circle")
    train_task(labeled, dataset.labels["half"], model, dataset.points, config, "half")
    again = train_task(labeled, dataset.labels["circle"], model, dataset.points, config, "circle")
    np.testing.assert_array_equal(alone.head.M, again.head.M)


def test_heads_round_trip_through_tensor_names():
    heads = [TaskHead("circle_20_0", np.eye(2)), TaskHead("half_20_1", 2.0 * np.eye(2))]
    tensors = {}
    for head in heads:
        tensors.update(head.to_tensors())
    tensors["W"] = np.zeros((2, 3))
    restored = task_heads_from_tensors(tensors)
    assert [h.task_id for h in restored] == ["circle_20_0", "half_20_1"]
    np.testing.assert_array_equal(restored[1].M, 2.0 * np.eye(2))
