"""Affine cuts, the two-cut bundle model and its proximal subproblem.

Cuts are stored anchor-free as ``l(y) = offset + <slope, y>``. The model is
the maximum of the newest tangent cut and (after the first null step) the
aggregate cut built from the previous subproblem's optimality condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Cut",
    "TwoCutModel",
    "tangent_cut",
    "aggregate_cut",
    "model_eval",
    "solve_prox",
    "prox_dual",
]


@dataclass(frozen=True)
class Cut:
    slope: np.ndarray
    offset: float

    def __call__(self, y: np.ndarray) -> float:
        return float(self.offset + self.slope @ y)


@dataclass(frozen=True)
class TwoCutModel:
    newest: Cut
    aggregate: Cut | None = None

    def cuts(self) -> tuple[Cut, ...]:
        if self.aggregate is None:
            return (self.newest,)
        return (self.newest, self.aggregate)

    def __call__(self, y: np.ndarray) -> float:
        return model_eval(self, y)


def tangent_cut(oracle, z: np.ndarray, value: float | None = None, gradient: np.ndarray | None = None) -> Cut:
    """Linearization of ``oracle`` at ``z``.

    ``value`` and ``gradient`` may be passed when already known, to avoid
    re-evaluating the oracle.
    """
    z = np.asarray(z, dtype=float)
    if value is None:
        value = oracle.eval(z)
    if gradient is None:
        gradient = oracle.grad(z)
    g = np.asarray(gradient, dtype=float)
    return Cut(g, float(value - g @ z))


def aggregate_cut(y_k: np.ndarray, z_next: np.ndarray, rho: float, model_value_at_z: float) -> Cut:
    """Linearization of the previous model at its prox point ``z_next``.

    The slope ``rho * (y_k - z_next)`` is a subgradient of that model at
    ``z_next`` because ``z_next`` solved its proximal subproblem.
    """
    s = rho * (np.asarray(y_k, dtype=float) - np.asarray(z_next, dtype=float))
    return Cut(s, float(model_value_at_z - s @ z_next))


def model_eval(model: TwoCutModel, y: np.ndarray) -> float:
    return max(cut(y) for cut in model.cuts())


def _theta(model: TwoCutModel, y_k: np.ndarray, rho: float) -> float:
    # Maximizer over [0, 1] of the concave dual
    #   D(t) = t h1 + (1 - t) h2 - ||t g1 + (1 - t) g2||^2 / (2 rho),
    # where h_i = l_i(y_k).
    if model.aggregate is None:
        return 1.0
    c1, c2 = model.newest, model.aggregate
    d = c1.slope - c2.slope
    dd = float(d @ d)
    if dd == 0.0:
        return 1.0
    dh = c1(y_k) - c2(y_k)
    theta = (rho * dh - float(c2.slope @ d)) / dd
    return min(1.0, max(0.0, theta))


def _combined(model: TwoCutModel, theta: float) -> tuple[np.ndarray, float]:
    if model.aggregate is None or theta == 1.0:
        return model.newest.slope, model.newest.offset
    c1, c2 = model.newest, model.aggregate
    if theta == 0.0:
        return c2.slope, c2.offset
    return theta * c1.slope + (1.0 - theta) * c2.slope, theta * c1.offset + (1.0 - theta) * c2.offset


def solve_prox(model: TwoCutModel, y_k: np.ndarray, rho: float) -> tuple[np.ndarray, float]:
    """Minimize ``model(y) + rho/2 ||y - y_k||^2`` in closed form.

    Returns the minimizer ``z`` and the model value ``model(z)``.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    y_k = np.asarray(y_k, dtype=float)
    g, _ = _combined(model, _theta(model, y_k, rho))
    z = y_k - g / rho
    return z, model_eval(model, z)


def prox_dual(model: TwoCutModel, y_k: np.ndarray, rho: float) -> tuple[float, float]:
    """Optimal dual multiplier on the newest cut and the optimal dual value."""
    y_k = np.asarray(y_k, dtype=float)
    theta = _theta(model, y_k, rho)
    g, c = _combined(model, theta)
    return theta, float(c + g @ y_k - (g @ g) / (2.0 * rho))
