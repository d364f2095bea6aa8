import numpy as np
import pytest

from core.boxes import BoxConfig
from core.cluster import ClusterConfig
from core.errors import ConfigError
from core.evaluation import EvalConfig, match_and_score
from core.graphbuild import FeatureConfig, build_graph
from core.mpn import MpnConfig, MpnModel
from core.training import TrainConfig, evaluate_graphs, focal_loss, lr_at_epoch, train
from pipelines.labeler import label_frame
from tests.factories import TINY_FEATURES, TINY_MPN, TINY_TRAIN, two_car_frame


def tiny_dataset(count: int = 4):
    return [build_graph(two_car_frame(seed), TINY_FEATURES) for seed in range(count)]


def fresh_model() -> MpnModel:
    return MpnModel(TINY_FEATURES.node_dim, TINY_FEATURES.edge_dim, TINY_MPN, TINY_FEATURES.echo())


def test_step_schedule():
    cfg = TrainConfig(lr=0.003, step_size=15, gamma=0.7)
    assert lr_at_epoch(cfg, 1) == pytest.approx(0.003)
    assert lr_at_epoch(cfg, 15) == pytest.approx(0.003)
    assert lr_at_epoch(cfg, 16) == pytest.approx(0.0021)
    assert lr_at_epoch(cfg, 31) == pytest.approx(0.003 * 0.49)


def test_focal_loss_value():
    loss, _ = focal_loss(np.array([0.0]), np.array([True]), alpha=0.5, gamma=0.0)
    assert loss == pytest.approx(-0.5 * np.log(0.5))
    empty, grad = focal_loss(np.zeros(0), np.zeros(0, dtype=bool))
    assert empty == 0.0 and grad.shape == (0,)


def test_focal_loss_gradient():
    logits = np.array([-2.0, -0.5, 0.3, 1.7])
    labels = np.array([True, False, True, False])
    _, grad = focal_loss(logits, labels)
    h = 1e-6
    numeric = np.zeros_like(logits)
    for i in range(len(logits)):
        up, down = logits.copy(), logits.copy()
        up[i] += h
        down[i] -= h
        numeric[i] = (focal_loss(up, labels)[0] - focal_loss(down, labels)[0]) / (2 * h)
    np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-9)


def test_train_reduces_loss():
    cfg = TrainConfig(epochs=15, batch_graphs=2, lr=0.01)
    result = train(fresh_model(), tiny_dataset(), cfg)
    assert len(result.history) == 15
    assert result.steps == 15 * 2
    assert result.history[-1].loss < result.history[0].loss


def test_train_is_deterministic():
    a = train(fresh_model(), tiny_dataset(3), TINY_TRAIN).model
    b = train(fresh_model(), tiny_dataset(3), TINY_TRAIN).model
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_validation_is_logged():
    data = tiny_dataset(3)
    result = train(fresh_model(), data[:2], TINY_TRAIN, val=data[2:])
    assert all(log.val_loss is not None for log in result.history)
    assert "val_acc=" in result.history[-1].line()


def test_empty_dataset_rejected():
    with pytest.raises(ConfigError):
        train(fresh_model(), [], TINY_TRAIN)


def test_train_config_rejects():
    with pytest.raises(ConfigError):
        TrainConfig(gamma=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(focal_alpha=1.0)


def test_overfits_one_separable_frame():
    frame = two_car_frame(0)
    features = FeatureConfig()
    graph = build_graph(frame, features)
    model = MpnModel(features.node_dim, features.edge_dim, MpnConfig(dropout=0.0), features.echo())
    cfg = TrainConfig(epochs=200, batch_graphs=1)
    result = train(model, [graph], cfg)
    assert result.steps == 200

    losses = [log.loss for log in result.history]
    assert all(b <= a + 1e-12 for a, b in zip(losses[2:], losses[3:]))
    _, accuracy = evaluate_graphs(model, [graph], cfg)
    assert accuracy == 1.0

    labels = label_frame(model, frame, features, ClusterConfig(), BoxConfig())
    metrics = match_and_score([lab.box for lab in labels], frame, EvalConfig(iou_kind="seg"))
    assert metrics.counts[0.4] == [2, 0, 0]
