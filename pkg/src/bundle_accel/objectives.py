"""Smooth convex test objectives.

An objective is anything exposing ``dim``, ``smoothness``, ``eval(x)`` and
``grad(x)``. Two quadratic families are provided: Nesterov's tridiagonal
worst-case function and a seeded random PSD quadratic normalized to unit
operator norm.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "ObjectiveOracle",
    "QuadraticObjective",
    "OptimumUnavailable",
    "make_worst_case",
    "make_random_psd_quadratic",
    "quadratic_optimum",
    "parse_objective",
    "default_start",
]


class OptimumUnavailable(RuntimeError):
    """Raised when the minimizer of a quadratic cannot be computed."""


class ObjectiveOracle(Protocol):
    dim: int
    smoothness: float

    def eval(self, x: np.ndarray) -> float: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...


class QuadraticObjective:
    """``f(x) = 0.5 x^T Q x - <b, x>``.

    ``Q`` is either a dense symmetric matrix or, when ``tridiag`` is given as
    ``(diagonal, offdiagonal)``, a symmetric tridiagonal operator applied
    matrix-free.
    """

    def __init__(self, b, smoothness, Q=None, tridiag=None, name="quadratic"):
        if (Q is None) == (tridiag is None):
            raise ValueError("exactly one of Q or tridiag must be given")
        self.b = np.asarray(b, dtype=float)
        self.dim = self.b.shape[0]
        self.smoothness = float(smoothness)
        self.name = name
        if Q is not None:
            Q = np.asarray(Q, dtype=float)
            if Q.shape != (self.dim, self.dim):
                raise ValueError(f"Q has shape {Q.shape}, expected {(self.dim, self.dim)}")
            Q.setflags(write=False)
            self.Q = Q
            self.tridiag = None
        else:
            diag, off = (np.asarray(t, dtype=float) for t in tridiag)
            if diag.shape != (self.dim,) or off.shape != (max(self.dim - 1, 0),):
                raise ValueError("tridiagonal bands do not match dimension")
            diag.setflags(write=False)
            off.setflags(write=False)
            self.Q = None
            self.tridiag = (diag, off)
        self.b.setflags(write=False)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Return ``Q @ x``; a 2-D ``x`` is treated as a stack of row vectors."""
        if self.Q is not None:
            return x @ self.Q
        diag, off = self.tridiag
        out = diag * x
        out[..., :-1] += off * x[..., 1:]
        out[..., 1:] += off * x[..., :-1]
        return out

    def eval(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * (x @ self.apply(x)) - self.b @ x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.apply(x) - self.b

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        """Values at each row of ``X``."""
        X = np.asarray(X, dtype=float)
        return 0.5 * np.einsum("ij,ij->i", X, self.apply(X)) - X @ self.b

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        Qx = self.apply(x)
        return float(0.5 * (x @ Qx) - self.b @ x), Qx - self.b

    def to_dense(self) -> np.ndarray:
        if self.Q is not None:
            return np.array(self.Q)
        diag, off = self.tridiag
        return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)

    def __repr__(self) -> str:
        return f"QuadraticObjective(name={self.name!r}, dim={self.dim}, smoothness={self.smoothness})"


def make_worst_case(n: int) -> QuadraticObjective:
    """Nesterov's worst-case function ``x^T L x / 8 - x_1 / 4``.

    ``L`` is tridiagonal with 2 on the diagonal and -1 off it. Since
    ``||L|| < 4`` the function is 1-smooth, and the smoothness field is set to 1.
    """
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    diag = np.full(n, 0.5)
    off = np.full(n - 1, -0.25)
    b = np.zeros(n)
    b[0] = 0.25
    return QuadraticObjective(b, 1.0, tridiag=(diag, off), name=f"worst-case:{n}")


def _power_iteration(apply, n, rng, rtol=1e-10, max_iter=100_000):
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = apply(v)
        lam_new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            return lam_new
        lam = lam_new
    return lam


def make_random_psd_quadratic(n: int, seed: int) -> QuadraticObjective:
    """Random ``Q = A^T A / ||A^T A||`` with seeded Gaussian ``A`` and ``b = 0``.

    The generator is numpy's PCG64 seeded with ``seed``; the normalizing
    operator norm is a power-iteration estimate.
    """
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    A = rng.standard_normal((n, n))
    AtA = A.T @ A
    AtA = 0.5 * (AtA + AtA.T)
    lam = _power_iteration(lambda v: AtA @ v, n, rng)
    Q = AtA / lam
    return QuadraticObjective(np.zeros(n), 1.0, Q=Q, name=f"psd-quad:{n}:{seed}")


def _conjugate_gradient(apply, b, tol, max_iter):
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = r @ r
    for _ in range(max_iter):
        if np.sqrt(rs) <= tol:
            return x
        Ap = apply(p)
        curv = p @ Ap
        if curv <= 0.0:
            raise OptimumUnavailable("conjugate gradients hit a direction of zero curvature")
        alpha = rs / curv
        x += alpha * p
        r -= alpha * Ap
        rs_new = r @ r
        p = r + (rs_new / rs) * p
        rs = rs_new
    if np.linalg.norm(b - apply(x)) <= tol:
        return x
    raise OptimumUnavailable(f"conjugate gradients did not reach residual {tol:.1e} in {max_iter} iterations")


def quadratic_optimum(obj: QuadraticObjective) -> tuple[np.ndarray, float]:
    """Minimizer and minimum value of a convex quadratic.

    Tridiagonal objectives use a banded direct solve; dense ones use
    conjugate gradients capped at ``10 n`` iterations.

    Raises
    ------
    OptimumUnavailable
        If the linear solve misses the residual target
        ``1e-12 (1 + ||b||)``.
    """
    b = np.asarray(obj.b)
    tol = 1e-12 * (1.0 + np.linalg.norm(b))
    if obj.tridiag is not None:
        diag, off = obj.tridiag
        bands = np.zeros((3, obj.dim))
        bands[0, 1:] = off
        bands[1] = diag
        bands[2, :-1] = off
        x_star = solve_banded((1, 1), bands, b)
        if np.linalg.norm(obj.apply(x_star) - b) > tol:
            raise OptimumUnavailable("banded solve residual above tolerance")
    else:
        x_star = _conjugate_gradient(obj.apply, b, tol, 10 * obj.dim)
    return x_star, obj.eval(x_star)


def parse_objective(spec: str) -> QuadraticObjective:
    """Build an objective from ``worst-case:<n>`` or ``psd-quad:<n>:<seed>``."""
    parts = spec.split(":")
    try:
        if parts[0] == "worst-case" and len(parts) == 2:
            return make_worst_case(int(parts[1]))
        if parts[0] == "psd-quad" and len(parts) == 3:
            return make_random_psd_quadratic(int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ValueError(f"bad objective {spec!r}: {exc}") from None
    raise ValueError(f"unknown objective {spec!r}")


def default_start(obj: QuadraticObjective, seed: int | None = None) -> np.ndarray:
    """Starting point used by the experiments.

    Zero for the worst-case family; uniform on ``[0, 1]^n`` for the random
    quadratic, drawn from a stream independent of the one that built ``Q``.
    """
    if obj.name.startswith("psd-quad"):
        if seed is None:
            seed = int(obj.name.split(":")[2])
        rng = np.random.Generator(np.random.PCG64([seed, 1]))
        return rng.uniform(0.0, 1.0, obj.dim)
    return np.zeros(obj.dim)
