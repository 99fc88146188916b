
import numpy as np
import pytest
from conftest import Parabola, small_quadratic
from hypothesis import given, settings
from hypothesis import strategies as st

from bundle_accel.objectives import make_random_psd_quadratic, make_worst_case
from bundle_accel.prox_descent import (
    InnerBudgetExhausted,
    default_max_inner,
    descent_test,
    inner_bound,
    inner_bound_ceiling,
    prox_descent,
)


@pytest.mark.parametrize(
    "args, expected",
    [((1.0, 0.5, 0.4, 0.5), True), ((1.0, 0.9, 0.0, 0.5), False), ((1.0, 0.4, 0.4, 1.0), True)],
)
def test_descent_test_examples(args, expected):
    assert descent_test(*args) is expected


@pytest.mark.parametrize("beta", [0.0, -0.1, 1.5])
def test_descent_test_rejects_beta(beta):
    with pytest.raises(ValueError):
        descent_test(1.0, 0.5, 0.4, beta)


def test_inner_bound_values():
    assert inner_bound(1.0, 1.0, 0.5) == 512.0
    assert inner_bound_ceiling(1.0, 1.0, 0.5) == 512
    assert inner_bound_ceiling(1.0, 1.0, 0.9) == 12800
    assert default_max_inner(1.0, 1.0, 0.5) == 2048
    assert default_max_inner(None, 1.0, 0.5) == 100_000


@pytest.mark.parametrize("rho, expected", [(1.0, 0.0), (2.0, 0.5)])
def test_parabola_single_gradient_step(parabola, rho, expected):
    # accepted = y_k - grad f(y_k) / rho after one inner iteration
    rep = prox_descent(parabola, np.array([1.0]), 0.5, rho)
    assert rep.inner_iterations == 1
    np.testing.assert_array_equal(rep.accepted, [expected])
    np.testing.assert_array_equal(rep.v, [rho * (1.0 - expected)])


def test_stationary_center(parabola):
    rep = prox_descent(parabola, np.array([0.0]), 0.5, 1.0)
    np.testing.assert_array_equal(rep.accepted, [0.0])
    np.testing.assert_array_equal(rep.v, [0.0])
    assert rep.epsilon == 0.0
    assert rep.inner_iterations == 1


def test_worst_case_high_beta():
    obj = make_worst_case(500)
    y = np.zeros(500)
    bound = inner_bound_ceiling(1.0, 1.0, 0.9)
    rng = np.random.default_rng(0)
    for trial in range(20):
        rep = prox_descent(obj, y, 0.9, 1.0)
        d = rep.accepted - y
        dn2 = float(d @ d)
        assert rep.inner_iterations <= bound
        assert rep.inner_iterations <= 512
        assert 2 * rep.epsilon <= dn2 + 1e-9 * (1 + dn2)
        y = y + rng.standard_normal(500) if trial % 2 else rep.accepted


def _check_report(oracle, y_k, beta, rho, rep, rng):
    f_center = oracle.eval(y_k)
    f_acc = oracle.eval(rep.accepted)
    np.testing.assert_array_equal(rep.v, rho * (y_k - rep.accepted))
    assert rep.epsilon >= -1e-12 * (1 + abs(f_acc))
    model_at = f_acc - rep.epsilon
    assert f_center - f_acc >= beta * (f_center - model_at) - 1e-9 * (1 + abs(f_center))
    assert f_acc <= f_center
    # v is an epsilon-subgradient at the accepted point
    for w in rep.accepted + 3 * rng.standard_normal((100, y_k.size)):
        assert oracle.eval(w) >= f_acc + rep.v @ (w - rep.accepted) - rep.epsilon - 1e-9
    # eta values increase and stay below the exact prox value
    etas = [r.eta for r in rep.trace]
    for a, b in zip(etas, etas[1:]):
        assert b >= a - 1e-9 * (1 + abs(a))
    if rho >= oracle.smoothness:
        d = rep.accepted - y_k
        assert 2 * rep.epsilon <= rho * (d @ d) + 1e-9 * (1 + rho * (d @ d))
        assert rep.inner_iterations <= inner_bound_ceiling(oracle.smoothness, rho, beta)


def _exact_prox_value(obj, y_k, rho):
    Q = obj.to_dense()
    x = np.linalg.solve(Q + rho * np.eye(obj.dim), obj.b + rho * y_k)
    return obj.eval(x) + 0.5 * rho * float((x - y_k) @ (x - y_k))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(0.05, 0.95), rho_scale=st.floats(1.0, 4.0),
       dim=st.integers(1, 8))
def test_report_invariants(seed, beta, rho_scale, dim):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((dim, dim))
    obj = small_quadratic(A.T @ A, b=rng.standard_normal(dim))
    rho = rho_scale * obj.smoothness
    y_k = 2 * rng.standard_normal(dim)
    rep = prox_descent(obj, y_k, beta, rho)
    _check_report(obj, y_k, beta, rho, rep, rng)
    eta_star = _exact_prox_value(obj, y_k, rho)
    assert all(r.eta <= eta_star + 1e-9 * (1 + abs(eta_star)) for r in rep.trace)


@pytest.mark.parametrize("beta", [0.1, 0.3, 0.5])
@pytest.mark.parametrize("make", [lambda: make_worst_case(40), lambda: make_random_psd_quadratic(30, 2),
                                  lambda: Parabola(dim=3, scale=2.0)], ids=["worst", "psd", "parabola"])
def test_one_inner_iteration_regime(make, beta):
    obj = make()
    rng = np.random.default_rng(4)
    for rho in (obj.smoothness, 2.0 * obj.smoothness):
        for _ in range(20):
            y = 3 * rng.standard_normal(obj.dim)
            rep = prox_descent(obj, y, beta, rho)
            assert rep.inner_iterations == 1
            np.testing.assert_array_equal(rep.accepted, y - obj.grad(y) / rho)


def test_budget_exhaustion_carries_trace():
    obj = make_worst_case(200)
    with pytest.raises(InnerBudgetExhausted) as info:
        prox_descent(obj, np.zeros(200), 0.99, 0.01, max_inner=3)
    assert len(info.value.trace) == 3
    assert not any(r.descent for r in info.value.trace)


def test_model_recording():
    obj = make_worst_case(50)
    rep = prox_descent(obj, np.zeros(50), 0.95, 1.0, record_models=True)
    assert len(rep.models) == rep.inner_iterations
    assert rep.models[0].aggregate is None
    assert all(m.aggregate is not None for m in rep.models[1:])


@pytest.mark.parametrize("kwargs", [dict(beta=0.0, rho=1.0), dict(beta=0.5, rho=0.0), dict(beta=0.5, rho=1.0, max_inner=0)])
def test_prox_descent_rejects_bad_parameters(parabola, kwargs):
    with pytest.raises(ValueError):
        prox_descent(parabola, np.array([1.0]), **kwargs)
