"""Outer solvers producing uniform run records.

``gd``          constant-step gradient descent
``agd``         Nesterov's accelerated gradient descent
``pbm``         double-loop proximal bundle method (repeated ProxDescent)
``pbm-single``  classical single-loop bundle method with null/descent steps
``apbm``        accelerated bundle method: AGD with the gradient step replaced
                by ProxDescent
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bundle_model import TwoCutModel, tangent_cut
from .prox_descent import (
    InnerBudgetExhausted,
    _value_and_grad,
    bundle_step,
    default_max_inner,
    prox_descent,
    refine_model,
)

__all__ = [
    "AccelCoefficients",
    "IterationRecord",
    "ModelSnapshot",
    "RunRecord",
    "next_coefficients",
    "coefficient_sequence",
    "gradient_descent",
    "nesterov_agd",
    "pbm",
    "classical_pbm_single_loop",
    "accelerated_pbm",
    "SOLVERS",
]


@dataclass(frozen=True)
class AccelCoefficients:
    a: float
    A: float


def next_coefficients(A: float) -> AccelCoefficients:
    """Given ``A_k`` return ``a_k`` and ``A_{k+1} = A_k + a_k``."""
    a = (1.0 + math.sqrt(1.0 + 4.0 * A)) / 2.0
    return AccelCoefficients(a, A + a)


def coefficient_sequence(steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Arrays ``a[0..steps-1]`` and ``A[0..steps]`` with ``A[0] = 0``."""
    a = np.empty(steps)
    A = np.empty(steps + 1)
    A[0] = 0.0
    for k in range(steps):
        c = next_coefficients(A[k])
        a[k] = c.a
        A[k + 1] = c.A
    return a, A


@dataclass
class IterationRecord:
    """State after outer iteration ``k``.

    For accelerated solvers, record ``k + 1`` carries the extrapolated point
    ``y = y_k`` and coefficient ``a = a_k`` that produced ``x_{k+1}``, along
    with ``A = A_{k+1}``, ``v = v_k`` and ``epsilon = epsilon_{k+1}``.
    """

    k: int
    x: np.ndarray
    f: float
    gap: float | None = None
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    a: float | None = None
    A: float | None = None
    v: np.ndarray | None = None
    epsilon: float | None = None
    inner_iterations: int = 0
    oracle_calls: int = 0
    wall_ms: float = 0.0
    descent: bool | None = None


@dataclass
class ModelSnapshot:
    center: np.ndarray
    model: TwoCutModel


@dataclass
class RunRecord:
    solver_name: str
    objective_name: str
    parameters: dict
    f_star: float | None = None
    iterations: list[IterationRecord] = field(default_factory=list)
    model_snapshots: list[ModelSnapshot] = field(default_factory=list)

    def gaps(self) -> np.ndarray:
        return np.array([np.nan if r.gap is None else r.gap for r in self.iterations])

    def descent_records(self) -> list[IterationRecord]:
        """Records that correspond to a move of the center (all of them for non-single-loop solvers)."""
        return [r for r in self.iterations if r.descent is None or r.descent or r.k == 0]


class _Recorder:
    def __init__(self, run: RunRecord, f_star):
        self.run = run
        self.f_star = f_star
        self.t0 = time.perf_counter()
        self.calls = 0

    def add(self, k, x, f, **kw):
        gap = None if self.f_star is None else f - self.f_star
        rec = IterationRecord(k=k, x=x, f=f, gap=gap, oracle_calls=self.calls,
                              wall_ms=1e3 * (time.perf_counter() - self.t0), **kw)
        self.run.iterations.append(rec)
        return rec

    def done(self, gap_tol):
        if gap_tol is None or self.f_star is None:
            return False
        return self.run.iterations[-1].gap <= gap_tol


def _name(oracle):
    return getattr(oracle, "name", type(oracle).__name__)


def gradient_descent(oracle, x0, step=None, iters=1000, *, f_star=None, gap_tol=None) -> RunRecord:
    """Iterate ``x_{k+1} = x_k - step * grad f(x_k)``; ``step`` defaults to ``1/M``."""
    if step is None:
        step = 1.0 / oracle.smoothness
    if not step > 0:
        raise ValueError("step must be positive")
    run = RunRecord("gd", _name(oracle), {"step": step, "M": oracle.smoothness, "iterations": iters}, f_star)
    rec = _Recorder(run, f_star)
    x = np.array(x0, dtype=float)
    fx, g = _value_and_grad(oracle, x)
    rec.calls += 1
    rec.add(0, x, fx)
    for k in range(iters):
        x = x - step * g
        fx, g = _value_and_grad(oracle, x)
        rec.calls += 1
        rec.add(k + 1, x, fx, inner_iterations=1)
        if rec.done(gap_tol):
            break
    return run


@dataclass
class _Step:
    x: np.ndarray
    f_x: float
    v: np.ndarray
    epsilon: float
    inner_iterations: int
    oracle_calls: int


def _accelerated(oracle, x0, iters, step: Callable[[np.ndarray], _Step], run: RunRecord, f_star, gap_tol):
    rec = _Recorder(run, f_star)
    x = np.array(x0, dtype=float)
    z = x.copy()
    A = 0.0
    rec.calls += 1
    rec.add(0, x, oracle.eval(x), z=z, A=A)
    for k in range(iters):
        c = next_coefficients(A)
        y = (A / c.A) * x + (c.a / c.A) * z
        try:
            s = step(y)
        except InnerBudgetExhausted as exc:
            exc.run = run
            raise
        rec.calls += s.oracle_calls
        z = z - c.a * (y - s.x)
        x = s.x
        A = c.A
        rec.add(k + 1, x, s.f_x, y=y, z=z, a=c.a, A=A, v=s.v, epsilon=s.epsilon,
                inner_iterations=s.inner_iterations)
        if rec.done(gap_tol):
            break
    return run


def nesterov_agd(oracle, x0, iters=1000, *, f_star=None, gap_tol=None) -> RunRecord:
    """Nesterov's accelerated gradient method with step ``1/M``.

    ``v`` and ``epsilon`` are recorded as the certificate of the gradient
    step viewed as a prox step on the tangent model with ``rho = M``.
    """
    M = oracle.smoothness
    run = RunRecord("agd", _name(oracle), {"M": M, "rho": M, "iterations": iters}, f_star)

    def gradient_step(y):
        f_y, g = _value_and_grad(oracle, y)
        x_next = y - g / M
        f_next = oracle.eval(x_next)
        eps = max(0.0, f_next - (f_y + float(g @ (x_next - y))))
        return _Step(x_next, f_next, M * (y - x_next), eps, 1, 2)

    return _accelerated(oracle, x0, iters, gradient_step, run, f_star, gap_tol)


def accelerated_pbm(oracle, x0, beta=0.5, rho=1.0, outer_iters=1000, max_inner=None, *,
                    f_star=None, gap_tol=None, record_models=False) -> RunRecord:
    """Accelerated proximal bundle method.

    Identical to :func:`nesterov_agd` except that ``x_{k+1}`` comes from
    :func:`prox_descent` at the extrapolated point.
    """
    _check_bundle_params(beta, rho)
    M = getattr(oracle, "smoothness", None)
    if max_inner is None:
        max_inner = default_max_inner(M, rho, beta)
    run = RunRecord("apbm", _name(oracle),
                    {"beta": beta, "rho": rho, "M": M, "max_inner": max_inner, "iterations": outer_iters},
                    f_star)

    def bundle(y):
        rep = prox_descent(oracle, y, beta, rho, max_inner, record_models=record_models)
        for m in rep.models:
            run.model_snapshots.append(_snapshot(y, m))
        return _Step(rep.accepted, rep.f_accepted, rep.v, rep.epsilon, rep.inner_iterations, rep.oracle_calls)

    return _accelerated(oracle, x0, outer_iters, bundle, run, f_star, gap_tol)


def _snapshot(center, model):
    return ModelSnapshot(np.array(center), model)


def _check_bundle_params(beta, rho):
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")


def pbm(oracle, y0, beta=0.5, rho=1.0, outer_iters=1000, max_inner=None, *,
        f_star=None, gap_tol=None, record_models=False) -> RunRecord:
    """Double-loop proximal bundle method: ``y_{k+1} = ProxDescent(y_k)``."""
    _check_bundle_params(beta, rho)
    M = getattr(oracle, "smoothness", None)
    if max_inner is None:
        max_inner = default_max_inner(M, rho, beta)
    run = RunRecord("pbm", _name(oracle),
                    {"beta": beta, "rho": rho, "M": M, "max_inner": max_inner, "iterations": outer_iters},
                    f_star)
    rec = _Recorder(run, f_star)
    y = np.array(y0, dtype=float)
    f_y, g_y = _value_and_grad(oracle, y)
    rec.calls += 1
    rec.add(0, y, f_y)
    for k in range(outer_iters):
        try:
            rep = prox_descent(oracle, y, beta, rho, max_inner, f_center=f_y, grad_center=g_y,
                               record_models=record_models)
        except InnerBudgetExhausted as exc:
            exc.run = run
            raise
        for m in rep.models:
            run.model_snapshots.append(_snapshot(y, m))
        # the accepted point becomes the next center, which needs its gradient
        rec.calls += rep.oracle_calls
        y_prev = y
        y = rep.accepted
        f_y, g_y = rep.f_accepted, oracle.grad(y)
        rec.add(k + 1, y, f_y, y=y_prev, v=rep.v, epsilon=rep.epsilon,
                inner_iterations=rep.inner_iterations)
        if rec.done(gap_tol):
            break
    return run


def classical_pbm_single_loop(oracle, y0, beta=0.5, rho=1.0, total_iters=1000, *,
                              f_star=None, gap_tol=None) -> RunRecord:
    """Single-loop bundle method: one subproblem solve per iteration.

    A null step keeps the center and refines the model (tangent plus
    aggregate cut); a descent step moves the center and restarts the model
    from the tangent cut there. Record ``k`` is written after every solve,
    with ``descent`` marking which kind of step it was and
    ``inner_iterations`` counting solves since the last descent.
    """
    _check_bundle_params(beta, rho)
    run = RunRecord("pbm-single", _name(oracle),
                    {"beta": beta, "rho": rho, "M": getattr(oracle, "smoothness", None),
                     "iterations": total_iters}, f_star)
    rec = _Recorder(run, f_star)
    y = np.array(y0, dtype=float)
    f_y, g_y = _value_and_grad(oracle, y)
    rec.calls += 1
    rec.add(0, y, f_y)
    model = TwoCutModel(tangent_cut(oracle, y, value=f_y, gradient=g_y))
    since_descent = 0
    for k in range(total_iters):
        step = bundle_step(oracle, y, f_y, model, rho, beta)
        rec.calls += 1
        since_descent += 1
        if step.descent:
            v = rho * (y - step.z)
            eps = step.f_z - step.model_z
            if eps < 0.0 and eps >= -1e-12 * (1.0 + abs(step.f_z)):
                eps = 0.0
            y_prev = y
            y, f_y = step.z, step.f_z
            g_y = oracle.grad(y)
            model = TwoCutModel(tangent_cut(oracle, y, value=f_y, gradient=g_y))
            rec.add(k + 1, y, f_y, y=y_prev, v=v, epsilon=eps, inner_iterations=since_descent, descent=True)
            since_descent = 0
        else:
            model = refine_model(oracle, y, step, rho)
            rec.add(k + 1, y, f_y, inner_iterations=since_descent, descent=False)
        if rec.done(gap_tol):
            break
    return run


SOLVERS = ("gd", "agd", "pbm", "pbm-single", "apbm")
