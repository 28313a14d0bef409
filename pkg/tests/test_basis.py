import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from asind.basis import (assemble_a_design, assemble_w_design, default_library, load_library,
                         make_library)
from asind.dynamics import (Trajectory, default_initial_state, default_spec, integrate_rk4)
from asind.identify import IdentifiedModel
from asind.netgen import gen_er

LIB = default_library()


def test_default_library_contents():
    assert LIB.m1 == 3 and LIB.m2 == 6
    assert LIB.names == ["1", "x_i", "x_i^2", "x_j", "x_i*x_j", "x_j^2", "sin(x_j-x_i)",
                         "x_j^2/(1+x_j^2)", "(1-x_i)*x_j"]


def true_coefficients(spec):
    """Ground-truth w for each model, written against the default dictionary."""
    n = spec.n
    w = np.zeros((n, LIB.size))
    names = LIB.names
    col = names.index
    if spec.model == "kuramoto":
        w[:, col("1")] = spec.omega
        w[:, col("sin(x_j-x_i)")] = spec.c / n
    elif spec.model == "sis":
        w[:, col("x_i")] = -spec.delta
        w[:, col("(1-x_i)*x_j")] = spec.gamma
    elif spec.model == "lotka-volterra":
        w[:, col("x_i")] = spec.alpha
        w[:, col("x_i^2")] = -spec.theta
        w[:, col("x_i*x_j")] = -spec.gamma
    else:
        w[:, col("x_i")] = -1.0
        w[:, col("x_j^2/(1+x_j^2)")] = 1.0
    return w


@pytest.mark.parametrize("model", ["kuramoto", "sis", "lv", "mm"])
def test_every_model_is_representable(model):
    rng = np.random.default_rng(5)
    spec = default_spec(model, 8, rng)
    a = gen_er(8, 0.3, 5)
    traj = integrate_rk4(spec, a, default_initial_state(model, 8, rng), 0.01, 60)
    w = true_coefficients(spec)
    for i in range(8):
        d = assemble_w_design(LIB, traj, i, a.weights[i])
        np.testing.assert_allclose(d.entries @ w[i], d.target, atol=1e-12)


def test_w_design_structure(sis_pair):
    traj = sis_pair[2]
    d = assemble_w_design(LIB, traj, 0, np.zeros(2))
    assert np.all(d.entries[:, LIB.m1:] == 0)
    assert np.all(d.entries[:, 0] == 1)
    assert d.rows == traj.steps


def test_w_design_by_hand():
    x = np.array([[0.2, 0.6], [0.3, 0.5], [0.4, 0.45]])
    traj = Trajectory(x, 0.1, derivatives=np.ones_like(x) * 0.7)
    d = assemble_w_design(LIB, traj, 1, [2.0, 0.0])
    for t in range(3):
        xi, xj = x[t, 1], x[t, 0]
        expect = [1, xi, xi ** 2, 2 * xj, 2 * xi * xj, 2 * xj ** 2, 2 * np.sin(xj - xi),
                  2 * xj ** 2 / (1 + xj ** 2), 2 * (1 - xi) * xj]
        np.testing.assert_allclose(d.entries[t], expect, rtol=1e-15)
    np.testing.assert_array_equal(d.target, 0.7)


def test_a_design_by_hand():
    lib = make_library(["x"], ["sin_diff"])
    x = np.array([[0.0, 1.0, 2.0], [0.5, 0.25, -1.0]])
    dx = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    d = assemble_a_design(lib, Trajectory(x, 0.1, dx), 0, [3.0, 0.5])
    np.testing.assert_allclose(d.entries[:, 0], 0.0)
    np.testing.assert_allclose(d.entries[:, 1], 0.5 * np.sin(x[:, 1] - x[:, 0]))
    np.testing.assert_allclose(d.entries[:, 2], 0.5 * np.sin(x[:, 2] - x[:, 0]))
    np.testing.assert_allclose(d.target, dx[:, 0] - 3.0 * x[:, 0])


def test_a_design_zero_pair_coefficients(sis_pair):
    w = np.zeros(LIB.size)
    w[:3] = [0.1, 0.2, 0.3]
    assert np.all(assemble_a_design(LIB, sis_pair[2], 0, w).entries == 0)


def test_a_design_truth_residual(sis_pair):
    spec, a, traj = sis_pair
    w = true_coefficients(spec)
    for i in range(2):
        d = assemble_a_design(LIB, traj, i, w[i])
        assert np.abs(d.target - d.entries @ a.weights[i]).max() < 1e-12


@given(seed=st.integers(0, 2**31))
def test_two_parameterizations_agree(seed):
    rng = np.random.default_rng(seed)
    n, T = 5, 30
    x = rng.uniform(0.1, 2.0, (T, n))
    traj = Trajectory(x, 0.05, rng.normal(size=(T, n)))
    i = int(rng.integers(n))
    w = rng.normal(size=LIB.size)
    a_row = rng.uniform(0, 1, n) * (rng.random(n) < 0.6)
    a_row[i] = 0.0
    dw = assemble_w_design(LIB, traj, i, a_row)
    da = assemble_a_design(LIB, traj, i, w)
    np.testing.assert_allclose(dw.target - dw.entries @ w, da.target - da.entries @ a_row,
                               rtol=1e-12, atol=1e-12)


@given(seed=st.integers(0, 2**31))
def test_basis_order_is_irrelevant(seed):
    rng = np.random.default_rng(seed)
    n = 4
    w = rng.normal(size=(n, LIB.size))
    a = rng.uniform(0, 1, (n, n))
    np.fill_diagonal(a, 0)
    p_self, p_pair = rng.permutation(LIB.m1), rng.permutation(LIB.m2)
    shuffled = LIB.reordered(p_self, p_pair)
    w2 = np.hstack([w[:, :LIB.m1][:, p_self], w[:, LIB.m1:][:, p_pair]])
    x = rng.uniform(0.1, 2, n)
    np.testing.assert_allclose(IdentifiedModel(w2, a, shuffled).rhs(x),
                               IdentifiedModel(w, a, LIB).rhs(x), rtol=1e-12, atol=1e-14)


def test_preconditions():
    traj = Trajectory(np.ones((5, 2)), 0.1)
    with pytest.raises(ValueError, match="derivatives"):
        assemble_w_design(LIB, traj, 0, [0, 1])
    with pytest.raises(ValueError, match="derivatives"):
        assemble_a_design(LIB, traj, 0, np.zeros(LIB.size))
    traj = Trajectory(np.ones((5, 2)), 0.1, np.ones((5, 2)))
    with pytest.raises(ValueError):
        assemble_w_design(LIB, traj, 0, [0, -1])


def test_library_from_config(tmp_path):
    spec = {"self": ["const", "poly:2"], "pair": ["sin_diff", "hill2"]}
    with pytest.raises(ValueError, match="duplicate"):
        load_library(spec)
    spec = {"self": ["poly:2"], "pair": ["sin_diff", "hill2", "poly:1"]}
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(spec))
    lib = load_library(path)
    assert lib.names == ["1", "x_i", "x_i^2", "sin(x_j-x_i)", "x_j^2/(1+x_j^2)", "x_j"]
    assert load_library(lib.keys).names == lib.names
    with pytest.raises(ValueError, match="unknown"):
        load_library({"self": ["const"], "pair": ["tanh"]})
    with pytest.raises(ValueError, match="unknown"):
        load_library({"self": ["const"], "pair": ["xj"], "extra": []})


def test_equation_listing():
    w = np.zeros((4, LIB.size))
    w[3, 1] = -0.498
    w[3, 8] = 0.199
    a = np.zeros((4, 4))
    a[3, 0] = 1.0
    eq = IdentifiedModel(w, a, LIB).equations()
    assert eq[3] == "dx_3/dt = -0.498*x_3 + Σ_j A_3j * 0.199*(1-x_3)*x_j"
    assert eq[0] == "dx_0/dt = 0"
