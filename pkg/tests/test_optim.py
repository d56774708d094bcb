"""Optimizer, initializer, and seed-resolution tests."""

import numpy as np
import pytest

from gean.errors import ConfigError
from gean.optim import AdamState, init_orthogonal, init_xavier, resolve_seed
from gean.tensor import Parameter


def test_zero_gradient_leaves_parameter():
    p = Parameter("p", np.array([1.0, 2.0]))
    p.grad = np.zeros(2)
    AdamState(lr=0.1).step([p])
    np.testing.assert_array_equal(p.data, [1.0, 2.0])


def test_adam_single_step_hand_value():
    # m_hat = v_hat = 1 after one unit-gradient step, so the update is
    # lr / (1 + eps) ~ lr
    p = Parameter("p", np.array(0.0))
    p.grad = np.array(1.0)
    AdamState(lr=0.1).step([p])
    assert float(p.data) == pytest.approx(-0.1, abs=1e-8)


def test_adam_negative_lr_rejected():
    with pytest.raises(ConfigError):
        AdamState(lr=-1e-4)


def test_adam_zero_lr_is_noop():
    p = Parameter("p", np.array([3.0]))
    p.grad = np.array([1.5])
    AdamState(lr=0.0).step([p])
    np.testing.assert_array_equal(p.data, [3.0])


def test_orthogonal_init():
    q = init_orthogonal((4, 4), np.random.default_rng(0))
    np.testing.assert_allclose(q.T @ q, np.eye(4), atol=1e-10)


def test_orthogonal_rectangular():
    q = init_orthogonal((6, 3), np.random.default_rng(1))
    np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-10)


def test_xavier_bound():
    w = init_xavier((30, 20), np.random.default_rng(2))
    bound = np.sqrt(6.0 / 50.0)
    assert np.all(np.abs(w) <= bound)


def test_resolve_seed_env_override(monkeypatch):
    monkeypatch.setenv("GEAN_SEED", "17")
    assert resolve_seed(3) == 17
    monkeypatch.delenv("GEAN_SEED")
    assert resolve_seed(3) == 3
    assert resolve_seed(None) == 0
