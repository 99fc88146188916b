"""The ProxDescent oracle: bundle inner loop with the descent test.

Starting from the tangent cut at the center, each inner iteration solves the
proximal subproblem on the current two-cut model and either accepts the
trial point (descent step) or refines the model with a new tangent cut plus
the aggregate cut (null step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bundle_model import TwoCutModel, aggregate_cut, solve_prox, tangent_cut

__all__ = [
    "InnerRecord",
    "ProxDescentReport",
    "InnerBudgetExhausted",
    "BundleStep",
    "descent_test",
    "bundle_step",
    "inner_bound",
    "inner_bound_ceiling",
    "default_max_inner",
    "prox_descent",
]


class InnerBudgetExhausted(RuntimeError):
    """ProxDescent hit ``max_inner`` without passing the descent test.

    ``trace`` holds the inner records collected so far; solvers attach the
    partial run as ``run`` before re-raising.
    """

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace
        self.run = None


@dataclass
class InnerRecord:
    z: np.ndarray
    f_z: float
    model_z: float
    eta: float
    descent: bool


@dataclass
class ProxDescentReport:
    accepted: np.ndarray
    v: np.ndarray
    epsilon: float
    inner_iterations: int
    trace: list[InnerRecord]
    oracle_calls: int
    f_accepted: float
    models: list[TwoCutModel] = field(default_factory=list)


def descent_test(f_at_center: float, f_at_trial: float, model_at_trial: float, beta: float) -> bool:
    """True when the trial point realizes a ``beta`` fraction of the predicted decrease."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    return f_at_center - f_at_trial >= beta * (f_at_center - model_at_trial)


def inner_bound(M: float, rho: float, beta: float) -> float:
    """Worst-case inner iteration count ``16 (M + rho)^3 / ((1 - beta)^2 rho^3)``."""
    return 16.0 * (M + rho) ** 3 / ((1.0 - beta) ** 2 * rho**3)


def inner_bound_ceiling(M: float, rho: float, beta: float) -> int:
    """Integer ceiling of :func:`inner_bound`, ignoring last-bit rounding noise."""
    return math.ceil(round(inner_bound(M, rho, beta), 9))


def default_max_inner(M: float | None, rho: float, beta: float) -> int:
    if M is None or beta >= 1.0:
        return 100_000
    return 4 * inner_bound_ceiling(M, rho, beta)


def _value_and_grad(oracle, x):
    if hasattr(oracle, "value_and_grad"):
        return oracle.value_and_grad(x)
    return oracle.eval(x), oracle.grad(x)


@dataclass
class BundleStep:
    z: np.ndarray
    f_z: float
    model_z: float
    eta: float
    descent: bool


def bundle_step(oracle, center, f_center, model, rho, beta) -> BundleStep:
    """One subproblem solve plus descent test; shared by every bundle driver."""
    z, model_z = solve_prox(model, center, rho)
    f_z = oracle.eval(z)
    diff = z - center
    eta = model_z + 0.5 * rho * float(diff @ diff)
    return BundleStep(z, f_z, model_z, eta, descent_test(f_center, f_z, model_z, beta))


def refine_model(oracle, center, step: BundleStep, rho) -> TwoCutModel:
    """Model after a null step: new tangent cut at the trial point plus aggregation."""
    newest = tangent_cut(oracle, step.z, value=step.f_z)
    return TwoCutModel(newest, aggregate_cut(center, step.z, rho, step.model_z))


def prox_descent(oracle, y_k, beta, rho, max_inner=None, *, f_center=None, grad_center=None,
                 record_models=False) -> ProxDescentReport:
    """Run the bundle inner loop from center ``y_k`` until the descent test passes.

    Parameters
    ----------
    oracle : objective with ``eval`` and ``grad``
    y_k : array
        Proximal center.
    beta : float
        Descent-test fraction in ``(0, 1)``.
    rho : float
        Proximal parameter.
    max_inner : int, optional
        Inner budget. Defaults to four times the worst-case bound when the
        oracle's smoothness is known.
    f_center, grad_center : optional
        Precomputed oracle output at ``y_k``.
    record_models : bool
        Keep every model used, for minorant diagnostics.

    Returns
    -------
    ProxDescentReport
        Accepted point, inexact subgradient ``v = rho (y_k - accepted)`` and
        inexactness ``epsilon = f(accepted) - model(accepted)``.

    Raises
    ------
    InnerBudgetExhausted
        If ``max_inner`` subproblems were solved without a descent step.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if max_inner is None:
        max_inner = default_max_inner(getattr(oracle, "smoothness", None), rho, beta)
    if max_inner < 1:
        raise ValueError("max_inner must be at least 1")

    y_k = np.asarray(y_k, dtype=float)
    calls = 0
    if f_center is None or grad_center is None:
        f_center, grad_center = _value_and_grad(oracle, y_k)
        calls += 1
    model = TwoCutModel(tangent_cut(oracle, y_k, value=f_center, gradient=grad_center))
    models = [model] if record_models else []
    trace: list[InnerRecord] = []

    for _ in range(max_inner):
        step = bundle_step(oracle, y_k, f_center, model, rho, beta)
        calls += 1
        trace.append(InnerRecord(step.z, step.f_z, step.model_z, step.eta, step.descent))
        if step.descent:
            eps = step.f_z - step.model_z
            if eps < 0.0 and eps >= -1e-12 * (1.0 + abs(step.f_z)):
                eps = 0.0
            return ProxDescentReport(
                accepted=step.z,
                v=rho * (y_k - step.z),
                epsilon=eps,
                inner_iterations=len(trace),
                trace=trace,
                oracle_calls=calls,
                f_accepted=step.f_z,
                models=models,
            )
        model = refine_model(oracle, y_k, step, rho)
        if record_models:
            models.append(model)

    raise InnerBudgetExhausted(f"no descent step within {max_inner} inner iterations", trace)
