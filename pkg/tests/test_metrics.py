import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from test_basis import true_coefficients

from asind.basis import default_library
from asind.dynamics import default_initial_state, default_spec, integrate_rk4
from asind.identify import IdentifiedModel, fit
from asind.metrics import MetricsReport, evaluate_run, jaccard, mape, rmse
from asind.netgen import gen_er


def test_rmse_examples():
    x = np.random.default_rng(0).normal(size=(5, 3))
    assert rmse(x, x) == 0
    assert rmse(x + 0.1, x) == pytest.approx(0.1)
    assert rmse([[1.0, 2.0]], [[0.0, 0.0]]) == pytest.approx(math.sqrt(5 / 2))
    with pytest.raises(ValueError):
        rmse(np.zeros((2, 2)), np.zeros((2, 3)))


def test_mape_examples():
    assert mape([[1.0]], [[1.0]]) == 0
    assert mape([[1.0]], [[2.0]]) == pytest.approx(50.0)
    v = mape([[1e-3]], [[0.0]], eps=1e-8)
    assert math.isfinite(v) and v == pytest.approx(1e7)
    # the reference is the second argument
    assert mape([[2.0]], [[1.0]]) != mape([[1.0]], [[2.0]])
    with pytest.raises(ValueError):
        mape([[1.0]], [[1.0]], eps=0)


@given(seed=st.integers(0, 2**31))
def test_rmse_symmetric_and_order_free(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 6, 4))
    perm = rng.permutation(24)
    assert rmse(a, b) == pytest.approx(rmse(b, a), rel=1e-15)
    assert rmse(a.ravel()[perm][None], b.ravel()[perm][None]) == pytest.approx(rmse(a, b), rel=1e-12)


def test_jaccard_examples():
    a = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0.0]])
    assert jaccard(a, a) == 100
    assert jaccard(a, a.T * 0 + np.array([[0, 0, 1], [0, 0, 1], [0, 0, 0.0]])) == 0
    assert jaccard(np.zeros((3, 3)), np.zeros((3, 3))) == 100
    half = np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0.0]])
    assert jaccard(a, half) == 50
    # diagonal entries never count
    assert jaccard(a, a + np.eye(3)) == 100


@given(seed=st.integers(0, 2**31))
def test_jaccard_bounds_and_nested_monotone(seed):
    rng = np.random.default_rng(seed)
    n = 6
    a = (rng.random((n, n)) < 0.4).astype(float)
    np.fill_diagonal(a, 0)
    assert jaccard(a, a) == 100
    est = (rng.random((n, n)) < 0.3).astype(float)
    assert 0 <= jaccard(a, est) <= 100
    # grow the estimate one true edge at a time
    prev = jaccard(a, est)
    for i, j in zip(*np.nonzero(a)):
        est[i, j] = 1
        cur = jaccard(a, est)
        assert cur >= prev
        prev = cur


@pytest.fixture(scope="module")
def sis_run():
    rng = np.random.default_rng(1)
    spec = default_spec("sis", 10, rng)
    a = gen_er(10, 0.3, 1)
    full = integrate_rk4(spec, a, default_initial_state("sis", 10, rng), 0.01, 599)
    return spec, a, full


def test_truth_model_scores_perfectly(sis_run):
    spec, a, full = sis_run
    lib = default_library()
    model = IdentifiedModel(true_coefficients(spec), a.weights, lib)
    rep = evaluate_run(model, spec, a, full.states[499], 0.01)
    assert rep.rmse < 1e-13 and rep.jaccard == 100 and not rep.diverged
    assert rep.per_step_errors.shape == (100,)
    # precomputed truth gives the same report
    rep2 = evaluate_run(model, spec, a, full.states[499], 0.01, truth=full.states[499:])
    assert rep2.rmse == rep.rmse


def test_corrupted_model_is_worse(sis_run):
    spec, a, full = sis_run
    lib = default_library()
    model, _ = fit(full.slice(0, 500), lib)
    good = evaluate_run(model, spec, a, full.states[499], 0.01)
    bad = IdentifiedModel(-model.w, model.a_hat, lib)
    assert evaluate_run(bad, spec, a, full.states[499], 0.01).rmse > good.rmse


def test_divergent_model_is_flagged(sis_run):
    spec, a, full = sis_run
    lib = default_library()
    w = np.zeros((10, lib.size))
    w[:, 2] = 50.0  # x' = 50 x^2 blows up quickly
    rep = evaluate_run(IdentifiedModel(w, np.zeros((10, 10)), lib), spec, a, full.states[499], 0.01)
    assert rep.diverged and math.isinf(rep.rmse)
    assert rep.row()["rmse"] == "inf" and rep.row()["diverged"] == 1


def test_report_dict():
    rep = MetricsReport(0.5, 2.0, 40.0, 100)
    d = rep.to_dict()
    assert d["horizon"] == 100 and d["per_step_errors"] is None and d["diverged"] == 0
