from __future__ import annotations

import math

import numpy as np
import pytest

from errors import NonFiniteLossError
from numeric.rng import RngStream
from numeric.tensor import Tape, Tensor, forward_backward
from objectives.heads import AuxHead, ClassifierHead, ProjectionHead, classify_logits, contrastive_project, predict
from objectives.losses import (
    LossBreakdown,
    LossWeights,
    aux_modality_loss,
    focal_loss,
    inverse_frequency_alpha,
    supcon_loss,
    total_loss,
)
from tests.conftest import tiny_config


def _scalar(value: float) -> Tensor:
    return Tensor(np.array(value))


# ── Heads ───────────────────────────────────────────────────────────


def test_zero_weights_give_bias_logits(rng):
    head = ClassifierHead.init(rng, 4, 6, 3)
    head.w3 = Tensor(np.zeros((4, 6)))
    head.w4 = Tensor(np.zeros((6, 3)))
    head.b4 = Tensor(np.array([0.1, 0.2, 0.3]))
    logits = classify_logits(Tensor(rng.normal(4)), head)
    np.testing.assert_allclose(logits.data, [0.1, 0.2, 0.3])
    assert predict(logits.data) == 2


def test_predict_breaks_ties_towards_lower_index():
    assert predict(np.array([0.5, 0.9, 0.9])) == 1
    np.testing.assert_array_equal(predict(np.array([[1.0, 1.0], [0.0, 2.0]])), [0, 1])


def test_projection_head_identity_gives_unit_vector():
    h = np.array([3.0, 0.0, 4.0, 0.0])
    head = ProjectionHead(
        w1=Tensor(np.eye(4)),
        b1=Tensor(np.zeros(4)),
        w2=Tensor(np.eye(4)),
        b2=Tensor(np.zeros(4)),
    )
    out = contrastive_project(Tensor(h), head, activation="identity")
    np.testing.assert_allclose(out.data, h / 5.0)


def test_projection_head_leaves_zero_vector(caplog):
    head = ProjectionHead(Tensor(np.eye(2)), Tensor(np.zeros(2)), Tensor(np.eye(2)), Tensor(np.zeros(2)))
    out = contrastive_project(Tensor(np.zeros((1, 2))), head, activation="identity")
    np.testing.assert_array_equal(out.data, [[0.0, 0.0]])
    assert "exactly zero" in caplog.text


def test_unknown_activation(rng):
    head = ClassifierHead.init(rng, 4, 6, 3)
    with pytest.raises(ValueError):
        classify_logits(Tensor(np.ones(4)), head, activation="relu")


# ── Focal loss ──────────────────────────────────────────────────────


def test_focal_reduces_to_cross_entropy():
    loss = focal_loss(Tensor(np.zeros(2)), 0, alpha=1.0, gamma=0.0)
    assert loss.item() == pytest.approx(math.log(2.0))


def test_focal_matches_cross_entropy_on_random_cases():
    rng = RngStream(8)
    for _ in range(1000):
        n_classes = int(rng.integers(2, 7))
        x = rng.normal(n_classes, scale=3.0)
        y = int(rng.integers(0, n_classes))
        expected = np.logaddexp.reduce(x) - x[y]
        assert focal_loss(Tensor(x), y, alpha=1.0, gamma=0.0).item() == pytest.approx(expected, abs=1e-12)


def test_focal_down_weights_easy_examples():
    # p_y = 0.9 for class 0 of two
    logits = Tensor(np.array([math.log(9.0), 0.0]))
    loss = focal_loss(logits, 0, alpha=0.25, gamma=2.0)
    assert loss.item() == pytest.approx(0.25 * 0.01 * -math.log(0.9), rel=1e-6)
    assert loss.item() == pytest.approx(2.634e-4, rel=1e-3)


def test_focal_decreases_as_confidence_grows():
    values = [focal_loss(Tensor(np.array([s, 0.0])), 0).item() for s in (0.0, 1.0, 3.0, 8.0, 40.0)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] >= 0.0


def test_focal_gradient_stays_finite_when_certain():
    logits = Tensor(np.array([[60.0, 0.0]]), requires_grad=True)
    with Tape() as tape:
        loss = focal_loss(logits, np.array([0]))
    grads = forward_backward(loss, tape)
    assert np.isfinite(grads[logits]).all()


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_focal_gradient_is_finite_in_float32_with_a_large_margin(gamma):
    logits = Tensor(np.array([[40.0, 0.0]], dtype=np.float32), requires_grad=True)
    with Tape() as tape:
        loss = focal_loss(logits, np.array([0]), gamma=gamma)
    grads = forward_backward(loss, tape)
    assert loss.item() >= 0.0
    assert np.isfinite(loss.item())
    assert np.isfinite(grads[logits]).all()


def test_focal_never_exceeds_cross_entropy():
    rng = RngStream(9)
    for _ in range(300):
        n_classes = int(rng.integers(2, 6))
        x = rng.normal(n_classes, scale=4.0)
        y = int(rng.integers(0, n_classes))
        gamma = float(rng.uniform((), 0.0, 5.0))
        ce = focal_loss(Tensor(x), y, alpha=1.0, gamma=0.0).item()
        assert focal_loss(Tensor(x), y, alpha=1.0, gamma=gamma).item() <= ce + 1e-12


def test_focal_per_class_alpha_and_batch_mean():
    logits = Tensor(np.zeros((2, 2)))
    loss = focal_loss(logits, np.array([0, 1]), alpha=[1.0, 3.0], gamma=0.0)
    assert loss.item() == pytest.approx(2.0 * math.log(2.0))


@pytest.mark.parametrize("kwargs", [{"gamma": -1.0}, {"alpha": -0.5}])
def test_focal_rejects_negative_parameters(kwargs):
    with pytest.raises(ValueError):
        focal_loss(Tensor(np.zeros(2)), 0, **kwargs)


def test_focal_rejects_label_out_of_range():
    with pytest.raises(ValueError):
        focal_loss(Tensor(np.zeros(2)), 2)


def test_inverse_frequency_alpha():
    alpha = inverse_frequency_alpha([0, 0, 0, 1], 3)
    assert alpha[2] == 1.0
    assert alpha[0:2].mean() == pytest.approx(1.0)
    assert alpha[1] == pytest.approx(3.0 * alpha[0])


# ── Supervised contrastive ──────────────────────────────────────────


def test_supcon_identical_positive_pair():
    z = Tensor(np.array([[1.0, 0.0], [1.0, 0.0]]))
    assert supcon_loss(z, [4, 4], temperature=1.0).item() == pytest.approx(0.0, abs=1e-12)


def test_supcon_three_anchors():
    z = Tensor(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    loss = supcon_loss(z, [0, 0, 1], temperature=1.0).item()
    per_anchor = -math.log(math.e / (math.e + 1.0))
    assert per_anchor == pytest.approx(0.3133, abs=1e-4)
    # anchors 1 and 2 both have the same term; anchor 3 has no positive
    assert loss == pytest.approx(per_anchor)


def test_supcon_distinct_labels_is_zero():
    z = Tensor(np.eye(3))
    assert supcon_loss(z, [0, 1, 2], temperature=0.5).item() == 0.0


def test_supcon_hard_negative_mining_drops_easy_negatives():
    z = np.array([[1.0, 0.0], [1.0, 0.0], [0.6, 0.8], [-1.0, 0.0]])
    labels = [0, 0, 1, 2]
    plain = supcon_loss(Tensor(z), labels, temperature=1.0).item()
    mined = supcon_loss(Tensor(z), labels, temperature=1.0, hard_negative_mining=True).item()
    assert mined < plain
    expected = -math.log(math.e / (math.e + math.exp(0.6)))
    assert mined == pytest.approx(expected)


@pytest.mark.parametrize("n, temperature", [(1, 1.0), (2, 0.0)])
def test_supcon_rejects_bad_input(n, temperature):
    with pytest.raises(ValueError):
        supcon_loss(Tensor(np.ones((n, 2))), [0] * n, temperature=temperature)


def _unit_rows(rng: RngStream, n: int, d: int) -> np.ndarray:
    z = rng.normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def test_supcon_is_non_negative_and_rotation_invariant():
    rng = RngStream(10)
    for _ in range(50):
        n, d = int(rng.integers(2, 9)), int(rng.integers(2, 6))
        z = _unit_rows(rng, n, d)
        labels = rng.integers(0, 3, size=n)
        rotation, _ = np.linalg.qr(rng.normal((d, d)))
        loss = supcon_loss(Tensor(z), labels, temperature=0.2).item()
        rotated = supcon_loss(Tensor(z @ rotation), labels, temperature=0.2).item()
        assert loss >= 0.0
        assert rotated == pytest.approx(loss, rel=1e-9, abs=1e-12)


def test_supcon_gradient_matches_tape(rng):
    from checks import grad_check

    raw = Tensor(rng.normal((5, 3)), requires_grad=True, name="raw")
    labels = [0, 0, 1, 1, 2]

    def f():
        norm = (raw * raw).sum(axis=1, keepdims=True) ** 0.5
        return supcon_loss(raw / norm, labels, temperature=0.5)

    assert grad_check(f, [raw]).passed


# ── Auxiliary modality loss ─────────────────────────────────────────


def _aux(weight: np.ndarray, bias: np.ndarray) -> AuxHead:
    return AuxHead(Tensor(weight), Tensor(bias))


def test_aux_reduces_to_cross_entropy():
    features = Tensor(np.zeros((1, 3, 2)))
    head = _aux(np.zeros((2, 3)), np.array([2.0, 0.0, 0.0]))
    loss = aux_modality_loss([features], [0], [head]).item()
    expected = -math.log(math.exp(2.0) / (math.exp(2.0) + 2.0))
    assert loss == pytest.approx(expected)


def test_aux_mean_of_identical_modalities(rng):
    features = Tensor(rng.normal((2, 3, 4)))
    head = _aux(rng.normal((4, 3)), np.zeros(3))
    one = aux_modality_loss([features], [0, 2], [head]).item()
    two = aux_modality_loss([features, features], [0, 2], [head, head]).item()
    assert two == pytest.approx(one)


def test_aux_uniform_logits():
    features = Tensor(np.ones((2, 3, 5)))
    head = _aux(np.zeros((5, 4)), np.zeros(4))
    loss = aux_modality_loss([features, None, features], [0, 3], [head, None, head])
    assert loss.item() == pytest.approx(math.log(4.0))


def test_aux_skips_absent_samples():
    features = Tensor(np.zeros((2, 1, 2)))
    head = _aux(np.zeros((2, 2)), np.array([1.0, 0.0]))
    presence = np.array([[True], [False]])
    loss = aux_modality_loss([features], [0, 1], [head], presence=presence).item()
    assert loss == pytest.approx(-math.log(math.e / (math.e + 1.0)))


# ── Total loss ──────────────────────────────────────────────────────


def test_total_with_zero_lambdas_is_focal():
    parts = LossBreakdown(_scalar(1.5), _scalar(2.0), _scalar(3.0), _scalar(0.5))
    total = total_loss(parts, LossWeights(lambda_aux=0.0, lambda_contrast=0.0, lambda_div=0.0))
    assert total.item() == 1.5


def test_total_weighted_sum():
    parts = LossBreakdown(_scalar(1.0), _scalar(2.0), _scalar(3.0), _scalar(0.5))
    total = total_loss(parts, LossWeights(lambda_aux=1.0, lambda_contrast=1.0, lambda_div=1.0))
    assert total.item() == pytest.approx(6.5)
    assert parts.total is total


def test_total_is_linear_in_each_weight():
    parts = LossBreakdown(_scalar(1.0), _scalar(2.0), _scalar(3.0), _scalar(0.5))
    base = total_loss(parts, LossWeights(lambda_aux=0.0, lambda_contrast=0.0, lambda_div=0.0)).item()
    bumped = total_loss(parts, LossWeights(lambda_aux=0.5, lambda_contrast=0.0, lambda_div=0.0)).item()
    assert bumped - base == pytest.approx(0.5 * 2.0)


def test_total_names_the_non_finite_component():
    parts = LossBreakdown(_scalar(1.0), _scalar(2.0), _scalar(float("nan")), _scalar(0.5))
    with pytest.raises(NonFiniteLossError, match="contrast"):
        total_loss(parts, LossWeights(), epoch=3)


def test_loss_weights_validation_and_config():
    with pytest.raises(ValueError):
        LossWeights(temperature=0.0)
    with pytest.raises(ValueError):
        LossWeights(lambda_div=-1.0)
    weights = LossWeights.from_config(tiny_config(lambda_aux=0.7, temperature=0.2))
    assert weights.lambda_aux == 0.7
    assert weights.temperature == 0.2
