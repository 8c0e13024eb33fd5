from __future__ import annotations

import numpy as np
import pytest

from checks import grad_check, run_gradcheck_suite
from errors import GradCheckFailure
from numeric import functional as F
from numeric.optim import AdamState, adam_step
from numeric.rng import RngStream
from numeric.tensor import Tape, Tensor, forward_backward, masked_fill, matmul, stack


def test_ops_outside_a_tape_do_not_record():
    a = Tensor(np.ones(3), requires_grad=True)
    out = a * 2.0 + 1.0
    assert not out.requires_grad


def test_backward_accumulates_into_leaves():
    a = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    with Tape() as tape:
        out = (a * a).sum()
    grads = forward_backward(out, tape)
    np.testing.assert_allclose(grads[a], [2.0, 4.0, 6.0])
    np.testing.assert_allclose(a.grad, [2.0, 4.0, 6.0])


def test_gradients_of_a_sum_accumulate_on_a_shared_leaf(rng):
    a = Tensor(rng.normal((3, 4)), requires_grad=True)
    w = rng.normal((3, 4))

    def grad_of(build):
        with Tape() as tape:
            out = build()
        return forward_backward(out, tape)[a]

    def f():
        return (F.gelu(a) * Tensor(w)).sum()

    def g():
        return (a * a).sum()

    combined = grad_of(lambda: f() + g())
    np.testing.assert_allclose(combined, grad_of(f) + grad_of(g), rtol=1e-12, atol=1e-12)


def test_broadcast_gradients_are_reduced_to_operand_shape():
    a = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        out = (a + b).sum()
    grads = forward_backward(out, tape)
    assert grads[b].shape == (3,)
    np.testing.assert_allclose(grads[b], [2.0, 2.0, 2.0])


def test_backward_rejects_non_scalar_root():
    a = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        out = a * 2.0
    with pytest.raises(ValueError):
        forward_backward(out, tape)


def test_matmul_requires_rank_two():
    with pytest.raises(ValueError):
        matmul(Tensor(np.ones(3)), Tensor(np.ones((3, 2))))


def test_masked_fill_blocks_gradient():
    a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with Tape() as tape:
        out = masked_fill(a, np.array([True, False]), 0.0).sum()
    grads = forward_backward(out, tape)
    np.testing.assert_array_equal(grads[a], [0.0, 1.0])


def test_stack_and_getitem_route_gradients():
    a = Tensor(np.arange(3.0), requires_grad=True)
    b = Tensor(np.arange(3.0), requires_grad=True)
    with Tape() as tape:
        out = stack([a, b])[np.array([0, 0, 1])].sum()
    grads = forward_backward(out, tape)
    np.testing.assert_array_equal(grads[a], [2.0, 2.0, 2.0])
    np.testing.assert_array_equal(grads[b], [1.0, 1.0, 1.0])


def test_softmax_sums_to_one_and_ignores_shifts(rng):
    for _ in range(100):
        x = rng.normal((3, 6), scale=5.0)
        shift = rng.normal((3, 1), scale=50.0)
        p = F.softmax(Tensor(x), axis=-1).data
        np.testing.assert_allclose(p.sum(axis=-1), 1.0, rtol=1e-12)
        np.testing.assert_allclose(F.softmax(Tensor(x + shift), axis=-1).data, p, rtol=1e-9, atol=1e-15)


def test_layer_norm_standardizes_rows(rng):
    gain, bias = Tensor(np.ones(8)), Tensor(np.zeros(8))
    for _ in range(100):
        x = rng.normal((4, 8), scale=3.0) + rng.normal((4, 1), scale=10.0)
        out = F.layer_norm(Tensor(x), gain, bias).data
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=-1), 1.0, rtol=1e-3)


def test_softmax_of_one_element_is_one():
    np.testing.assert_array_equal(F.softmax(Tensor(np.array([[3.7]]))).data, [[1.0]])


def test_layer_norm_rejects_mismatched_affine():
    x = Tensor(np.ones((2, 4)))
    with pytest.raises(ValueError):
        F.layer_norm(x, Tensor(np.ones(3)), Tensor(np.zeros(3)))


def test_gelu_at_zero_and_large_inputs():
    out = F.gelu(Tensor(np.array([0.0, 10.0, -10.0]))).data
    assert out[0] == 0.0
    assert out[1] == pytest.approx(10.0)
    assert abs(out[2]) < 1e-12


def test_dropout_is_identity_in_inference_mode(rng):
    x = Tensor(rng.normal((4, 5)))
    assert F.dropout(x, 0.5, None, training=False) is x


def test_dropout_keeps_expectation(rng):
    x = Tensor(np.ones((400, 250)))
    out = F.dropout(x, 0.25, rng, training=True).data
    assert set(np.unique(out)) <= {0.0, 1.0 / 0.75}
    assert out.mean() == pytest.approx(1.0, abs=0.01)
    assert (out == 0.0).mean() == pytest.approx(0.25, abs=0.01)


@pytest.mark.parametrize("p", [-0.1, 1.0])
def test_dropout_rejects_bad_rate(rng, p):
    with pytest.raises(ValueError):
        F.dropout(Tensor(np.ones(3)), p, rng, training=True)


def test_rng_same_seed_same_stream():
    a, b = RngStream(5), RngStream(5)
    np.testing.assert_array_equal(a.normal((3, 3)), b.normal((3, 3)))


def test_rng_forks_differ_and_are_reproducible():
    a, b = RngStream(5), RngStream(5)
    first, second = a.fork("x"), a.fork("x")
    assert not np.array_equal(first.normal(4), second.normal(4))
    np.testing.assert_array_equal(b.fork("x").normal(4), RngStream(5).fork("x").normal(4))


def test_rng_state_round_trip():
    stream = RngStream(11)
    stream.normal(7)
    saved = stream.state()
    expected = stream.normal(5)
    restored = RngStream.from_state(saved)
    np.testing.assert_array_equal(restored.normal(5), expected)


def test_adam_first_step_moves_by_lr():
    p = Tensor(np.array([1.0, -1.0]), requires_grad=True)
    state = AdamState(lr=0.1)
    before = p.data
    adam_step({"p": p}, {"p": np.array([0.5, -2.0])}, state)
    np.testing.assert_allclose(p.data, [0.9, -0.9], atol=1e-6)
    np.testing.assert_array_equal(before, [1.0, -1.0])
    assert state.t == 1


def test_adam_skips_parameters_without_gradient():
    p = Tensor(np.array([1.0]), requires_grad=True)
    adam_step({"p": p}, {}, AdamState(lr=0.1))
    np.testing.assert_array_equal(p.data, [1.0])


def test_adam_rejects_shape_mismatch():
    p = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(ValueError):
        adam_step({"p": p}, {"p": np.ones(3)}, AdamState())


def test_grad_check_passes_for_correct_gradient(rng):
    w = Tensor(rng.normal((3, 2)), requires_grad=True, name="w")
    x = Tensor(rng.normal((4, 3)))
    report = grad_check(lambda: (F.gelu(x @ w) ** 2).sum(), [w])
    assert report.passed
    assert report.checked == 6


def test_grad_check_detects_a_wrong_gradient(rng):
    from numeric.tensor import record_op

    a = Tensor(rng.normal(3), requires_grad=True, name="a")

    def wrong_square() -> Tensor:
        return record_op("square", a.data**2, (a,), lambda g: (g * a.data,)).sum()

    report = grad_check(wrong_square, [a])
    assert not report.passed
    with pytest.raises(GradCheckFailure):
        report.raise_for_failure()


def test_grad_check_requires_float64():
    a = Tensor(np.ones(2, dtype=np.float32), requires_grad=True)
    with pytest.raises(ValueError):
        grad_check(lambda: a.sum(), [a])


def test_grad_check_samples_coordinates(rng):
    w = Tensor(rng.normal((10, 10)), requires_grad=True, name="w")
    report = grad_check(lambda: (w * w).sum(), [w], max_coords=5, rng=rng)
    assert report.passed
    assert report.checked == 5


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (3.0, 2.9964), (-3.0, -0.0036)])
def test_gelu_values(x, expected):
    assert F.gelu(Tensor(np.array([x]))).data[0] == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize(
    "logits, expected",
    [
        ([0.0] * 5, [0.2] * 5),
        ([np.log(2.0), 0.0], [2 / 3, 1 / 3]),
        ([1000.0, 1000.0], [0.5, 0.5]),
    ],
)
def test_softmax_values(logits, expected):
    np.testing.assert_allclose(F.softmax(Tensor(np.array(logits))).data, expected)


@pytest.mark.parametrize(
    "row, expected",
    [
        ([1.0, -1.0], [1.0, -1.0]),
        ([2.0, 2.0], [0.0, 0.0]),
        ([1.0, 2.0, 3.0], [-1.2247, 0.0, 1.2247]),
    ],
)
def test_layer_norm_values(row, expected):
    n = len(row)
    out = F.layer_norm(Tensor(np.array([row])), Tensor(np.ones(n)), Tensor(np.zeros(n))).data[0]
    np.testing.assert_allclose(out, expected, atol=1e-4)


def test_cross_entropy_value_and_gradient():
    logits = Tensor(np.zeros((1, 2)), requires_grad=True)
    with Tape() as tape:
        loss = F.cross_entropy(logits, np.array([0]))
    grads = forward_backward(loss, tape)
    assert loss.item() == pytest.approx(np.log(2.0))
    np.testing.assert_allclose(grads[logits], [[-0.5, 0.5]])


def test_sum_gradient_is_all_ones():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    with Tape() as tape:
        out = x.sum()
    np.testing.assert_array_equal(forward_backward(out, tape)[x], np.ones((2, 3)))


def test_adam_zero_gradient_leaves_parameter():
    p = Tensor(np.array([0.3]), requires_grad=True)
    adam_step({"p": p}, {"p": np.zeros(1)}, AdamState(lr=0.001))
    np.testing.assert_array_equal(p.data, [0.3])


def test_adam_moves_against_constant_gradient():
    p = Tensor(np.array([0.0]), requires_grad=True)
    state = AdamState(lr=0.001)
    adam_step({"p": p}, {"p": np.ones(1)}, state)
    first = p.data[0]
    adam_step({"p": p}, {"p": np.ones(1)}, state)
    assert first == pytest.approx(-0.001, rel=1e-4)
    assert p.data[0] < first


def test_grad_check_square():
    x = Tensor(np.array([3.0]), requires_grad=True, name="x")
    report = grad_check(lambda: (x * x).sum(), [x])
    assert report.passed
    assert report.worst.analytic == pytest.approx(6.0)


def test_grad_check_focal_loss():
    from objectives.losses import focal_loss

    logits = Tensor(np.array([[0.3, -1.2, 0.8]]), requires_grad=True, name="logits")
    report = grad_check(lambda: focal_loss(logits, np.array([2]), gamma=2.0), [logits])
    assert report.passed


def test_gradient_suite_covers_log1m_exp():
    reports = run_gradcheck_suite(seed=4, trials=1)
    assert all(r.passed for r in reports)
    assert "log1m_exp#0" in {r.name for r in reports}


def test_log1m_exp_floors_at_the_smallest_normal():
    for dtype in (np.float32, np.float64):
        out = F.log1m_exp(Tensor(np.array([0.0, -1e-30, -2.0], dtype=dtype))).data
        assert out.dtype == dtype
        assert out[0] == pytest.approx(np.log(np.finfo(dtype).tiny))
        assert out[1] == pytest.approx(np.log(1e-30), rel=1e-5)
        assert out[2] == pytest.approx(np.log1p(-np.exp(-2.0)), rel=1e-6)


@pytest.mark.slow
def test_gradient_suite_over_one_hundred_draws():
    reports = run_gradcheck_suite(seed=0, trials=100)
    failed = [r.name for r in reports if not r.passed]
    assert failed == []
    assert sum(r.name.endswith("#99") for r in reports) > 20
