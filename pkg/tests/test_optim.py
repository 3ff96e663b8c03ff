"""Tests for the hardformer.optim module."""

import numpy as np
import pytest

from hardformer.optim import Adam


def test_first_step_follows_gradient_sign():
    """Tests that the first bias-corrected step has size lr."""
    params = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([3.0, -0.01, 250.0])}
    Adam(lr=0.1).step(params, grads)
    np.testing.assert_allclose(params["w"], [0.9, -1.9, 0.4], atol=1e-6)


def test_zero_learning_rate_keeps_parameters():
    """Tests that lr = 0 leaves every array unchanged."""
    rng = np.random.default_rng(0)
    params = {"a": rng.normal(size=(4, 3)), "b": rng.normal(size=1)}
    before = {k: v.copy() for k, v in params.items()}
    optimizer = Adam(lr=0.0)
    for _ in range(5):
        optimizer.step(params, {k: rng.normal(size=v.shape)
                                for k, v in params.items()})
    for name, value in params.items():
        np.testing.assert_array_equal(value, before[name])
    assert optimizer.t == 5


def test_updates_in_place():
    """Tests that the caller's arrays are modified."""
    w = np.zeros(2)
    Adam(lr=1.0).step({"w": w}, {"w": np.array([1.0, -1.0])})
    assert w[0] == pytest.approx(-1.0, abs=1e-6)
    assert w[1] == pytest.approx(1.0, abs=1e-6)


def test_minimizes_quadratic():
    """Tests convergence on a convex bowl."""
    x = np.array([3.0, -4.0])
    optimizer = Adam(lr=0.1)
    for _ in range(2000):
        optimizer.step({"x": x}, {"x": 2 * x})
    np.testing.assert_allclose(x, [0.0, 0.0], atol=1e-2)
