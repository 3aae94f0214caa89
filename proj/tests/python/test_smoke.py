"""Smoke tests for the Python bindings: each exposed operation is driven once
with values whose results are known in closed form."""

import math

import numpy as np
import pytest

import otcotrain as otc


def test_version():
    assert otc.__version__ == "0.1.0"


def test_sq_euclid():
    assert otc.sq_euclid([0.0, 0.0], [0.0, 0.0]) == 0.0
    assert otc.sq_euclid([1.0, 2.0], [4.0, 6.0]) == pytest.approx(25.0, abs=1e-12)


def test_joint_cost_matrix():
    z = np.zeros((1, 1))
    zt = np.ones((1, 1))
    x = np.zeros((1, 1))
    xt = np.full((1, 1), 2.0)
    c = otc.joint_cost_matrix(z, x, zt, xt, alpha1=1.0, alpha2=0.5)
    assert c.shape == (1, 1)
    assert c[0, 0] == pytest.approx(3.0, abs=1e-12)


def test_balanced_sinkhorn_antidiagonal():
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    plan = otc.sinkhorn_balanced(cost, [0.5, 0.5], [0.5, 0.5], epsilon=0.01)
    assert plan.converged
    p = plan.plan
    assert p[0, 0] == pytest.approx(0.5, abs=1e-6)
    assert p[1, 1] == pytest.approx(0.5, abs=1e-6)
    assert abs(plan.objective) < 1e-4
    assert np.allclose(p.sum(axis=1), [0.5, 0.5], atol=1e-9)


def test_unbalanced_tau_zero_closed_form():
    rng = np.random.default_rng(3)
    cost = rng.uniform(0.0, 1.0, size=(3, 4))
    plan = otc.sinkhorn_unbalanced(cost, [1 / 3] * 3, [0.25] * 4, epsilon=0.5, tau=0.0)
    assert plan.converged
    assert np.allclose(plan.plan, np.exp(-cost / 0.5), atol=1e-12)


def test_uot_objective_zero_plan():
    cost = np.zeros((2, 2))
    val = otc.uot_objective(np.zeros((2, 2)), cost, [0.5, 0.5], [0.5, 0.5],
                            epsilon=0.3, tau=0.7)
    assert val == pytest.approx(0.7 * 2.0, abs=1e-12)


def test_transport_cost():
    plan = np.eye(2) / 2
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert otc.transport_cost(plan, cost) == 0.0


def test_exact_oracle():
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    plan, value = otc.exact_ot_oracle(cost)
    assert value == 0.0
    assert np.allclose(plan, np.eye(2) / 2)


def test_dtw():
    x = np.array([[0.0], [1.0], [2.0]])
    y = np.array([[0.0], [2.0]])
    dist, path = otc.dtw(x, y)
    assert dist == pytest.approx(1.0, abs=1e-12)
    assert path == [(0, 0), (1, 0), (2, 1)]


def test_weight_transform():
    assert otc.weight_transform(0.01) == 0.5
    assert otc.weight_transform(10.0) < 1e-40
    assert otc.weight_transform(0.0) == pytest.approx(1 / (1 + math.exp(-0.1)), abs=1e-12)


def test_error_mapping():
    with pytest.raises(ValueError):
        otc.sinkhorn_balanced(np.array([[0.0, 1.0], [1.0, 0.0]]),
                              [0.5, 0.5], [1.0, 1.0], epsilon=0.1)  # mass mismatch
    with pytest.raises(ValueError):
        otc.dtw(np.zeros((0, 1)), np.zeros((1, 1)))  # empty sequence
