import numpy as np
import pytest

from vidembed import tensor as tn
from vidembed.errors import NonScalarLoss, ShapeMismatch
from vidembed.optim import AdamState, adam_step, grad_check
from vidembed.tensor import Tensor


def test_adam_zero_gradient_is_identity():
    p = Tensor(np.array([1.0, -2.0, 3.0], dtype=np.float32))
    state = AdamState(p.shape)
    before = p.data.copy()
    adam_step(p, np.zeros(3, dtype=np.float32), state)
    assert np.array_equal(p.data, before)
    assert state.t == 1


def test_adam_first_step_scalar():
    p = Tensor(np.array([0.0]))
    state = AdamState(p.shape, dtype=np.float64, lr=1e-3)
    adam_step(p, np.array([1.0]), state)
    assert p.data[0] == pytest.approx(-1e-3 / (1 + 1e-8), rel=1e-12)


def test_adam_bias_correction_at_t1():
    g = np.array([0.7, -0.3])
    state = AdamState((2,), dtype=np.float64)
    adam_step(Tensor(np.zeros(2)), g, state)
    m_hat = state.m / (1 - state.beta1)
    assert np.allclose(m_hat, g)


def test_adam_shape_mismatch():
    p = Tensor(np.zeros(3))
    state = AdamState((3,), dtype=np.float64)
    with pytest.raises(ShapeMismatch):
        adam_step(p, np.zeros(4), state)


def test_adam_step_counter_increments():
    p = Tensor(np.zeros(2))
    state = AdamState((2,), dtype=np.float64)
    for expected in range(1, 6):
        adam_step(p, np.ones(2), state)
        assert state.t == expected


def test_grad_check_quadratic():
    theta = Tensor(np.array([3.0]), requires_grad=True)

    def f(params):
        return tn.sum_all(tn.mul(params["theta"], params["theta"]))

    report = grad_check(f, {"theta": theta})
    assert report.passed
    assert report.entries[0].max_rel_err < 1e-6
    assert theta.grad[0] == pytest.approx(6.0)


def test_grad_check_detects_wrong_gradient():
    theta = Tensor(np.array([2.0]), requires_grad=True)
    calls = {"n": 0}

    def f(params):
        # deliberately corrupt: taped value differs from probed value
        calls["n"] += 1
        t = params["theta"]
        if calls["n"] == 1:
            return tn.sum_all(tn.mul(tn.mul(t, t), t))  # cubic on the tape
        return tn.sum_all(tn.mul(t, t))  # quadratic for finite differences

    report = grad_check(f, {"theta": theta})
    assert not report.passed


def test_grad_check_nonscalar_loss():
    theta = Tensor(np.ones((2, 2)), requires_grad=True)

    def f(params):
        return tn.mul(params["theta"], params["theta"])

    with pytest.raises(NonScalarLoss):
        grad_check(f, {"theta": theta})


def test_grad_check_rejects_float32():
    theta = Tensor(np.ones(2, dtype=np.float32), requires_grad=True)
    with pytest.raises(ValueError):
        grad_check(lambda p: tn.sum_all(p["theta"]), {"theta": theta})
