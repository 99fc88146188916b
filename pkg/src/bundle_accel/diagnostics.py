"""Runtime certificate checks on run records, plus brute-force reference oracles.

Every checker returns a :class:`CertificateReport`. Violations are measured
as ``(lhs - rhs) / scale`` so that ``passed`` is simply
``worst_violation <= slack``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bundle_model import TwoCutModel, model_eval
from .prox_descent import inner_bound_ceiling

__all__ = [
    "CertificateReport",
    "NotApplicable",
    "check_ahpe_condition",
    "check_potential",
    "check_coefficients",
    "check_inner_bound",
    "check_model_minorant",
    "check_rate_bound",
    "loglog_slope",
    "grid_prox_dual",
    "prox_objective",
]


class NotApplicable(ValueError):
    """The run does not carry the data a checker needs."""


@dataclass(frozen=True)
class CertificateReport:
    check_name: str
    worst_violation: float
    first_failure: int | None
    passed: bool
    slack: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        where = "" if self.first_failure is None else f" (first failure at k={self.first_failure})"
        return f"{status}  {self.check_name:<22} worst={self.worst_violation:.3e}{where}"


def _report(name, violations, indices, slack):
    if len(violations) == 0:
        return CertificateReport(name, -math.inf, None, True, slack)
    violations = np.asarray(violations, dtype=float)
    bad = np.flatnonzero(~(violations <= slack))
    first = int(indices[bad[0]]) if bad.size else None
    return CertificateReport(name, float(np.max(violations)), first, bad.size == 0, slack)


def check_ahpe_condition(run, rho: float) -> CertificateReport:
    """Inexact-prox certificate of every accelerated step.

    Checks ``x_{k+1} = y_k - v_k / rho`` to 1e-12 relative and
    ``2 eps_{k+1} <= rho ||x_{k+1} - y_k||^2`` with slack
    ``1e-9 (1 + rho ||x_{k+1} - y_k||^2)``. The reported violation is in
    units of the respective tolerance, so the slack is 1. Record index
    ``k + 1`` is reported as iteration ``k``.
    """
    recs = [r for r in run.iterations if r.k > 0]
    if any(r.v is None or r.epsilon is None or r.y is None for r in recs):
        raise NotApplicable(f"{run.solver_name} run has no inexactness certificates")
    violations, idx = [], []
    for r in recs:
        d = r.x - r.y
        dn2 = float(d @ d)
        step_err = np.linalg.norm(r.x - (r.y - r.v / rho)) / (1.0 + np.linalg.norm(r.x))
        eps_viol = (2.0 * r.epsilon - rho * dn2) / (1.0 + rho * dn2)
        # both parts in units of their own tolerance
        violations.append(max(step_err / 1e-12, eps_viol / 1e-9))
        idx.append(r.k - 1)
    return _report("ahpe_condition", violations, idx, 1.0)


def check_potential(run, x_ref: np.ndarray, rho: float, oracle=None, f_ref: float | None = None) -> CertificateReport:
    """Monotonicity of ``A_k (f(x_k) - f(x_ref)) + rho/2 ||z_k - x_ref||^2``."""
    recs = run.iterations
    if any(r.z is None or r.A is None for r in recs):
        raise NotApplicable(f"{run.solver_name} run does not record z_k and A_k")
    if f_ref is None:
        if oracle is None:
            raise ValueError("need oracle or f_ref")
        f_ref = oracle.eval(x_ref)
    x_ref = np.asarray(x_ref, dtype=float)
    pot = [r.A * (r.f - f_ref) + 0.5 * rho * float((r.z - x_ref) @ (r.z - x_ref)) for r in recs]
    violations, idx = [], []
    for k in range(len(pot) - 1):
        violations.append((pot[k + 1] - pot[k]) / (1.0 + abs(pot[k])))
        idx.append(recs[k].k)
    return _report("potential", violations, idx, 1e-8)


def check_coefficients(run) -> CertificateReport:
    """``A_k >= k^2 / 4`` and ``A_{k+1} = a_k^2``, both with 1e-10 relative slack.

    ``run`` may be a run record or a pair of arrays ``(a, A)`` with
    ``len(A) == len(a) + 1``.
    """
    if isinstance(run, tuple):
        a, A = (np.asarray(t, dtype=float) for t in run)
    else:
        if any(r.A is None for r in run.iterations) or any(r.a is None for r in run.iterations[1:]):
            raise NotApplicable(f"{run.solver_name} run has no momentum coefficients")
        A = np.array([r.A for r in run.iterations])
        a = np.array([r.a for r in run.iterations[1:]])
    k = np.arange(len(A), dtype=float)
    scale = np.maximum(A, 1.0)
    growth = (k**2 / 4.0 - A) / scale
    square = np.zeros_like(A)
    square[1:] = np.abs(A[1:] - a**2) / scale[1:]
    growth[0] = 0.0 if A[0] == 0.0 else growth[0]
    return _report("coefficients", np.maximum(growth, square), np.arange(len(A)), 1e-10)


def check_inner_bound(run, M: float, rho: float, beta: float) -> CertificateReport:
    bound = inner_bound_ceiling(M, rho, beta)
    counts = [(r.k, r.inner_iterations) for r in run.iterations if r.k > 0 and r.descent is not False]
    violations = [float(c - bound) for _, c in counts]
    return _report(f"inner_bound<={bound}", violations, [k for k, _ in counts], 0.0)


def check_model_minorant(oracle, model_snapshots, samples: int = 1000, seed: int = 0,
                         radius: float = 10.0) -> CertificateReport:
    """Sample each stored model in a ball around its center and compare to ``f``.

    ``model_snapshots`` holds :class:`ModelSnapshot` objects or
    ``(center, model)`` pairs. The center itself is always among the samples.
    """
    rng = np.random.default_rng(seed)
    violations, idx = [], []
    for i, snap in enumerate(model_snapshots):
        center, model = (snap.center, snap.model) if hasattr(snap, "model") else snap
        n = center.shape[0]
        dirs = rng.standard_normal((samples, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        # uniform radius rather than uniform volume, so points near the center
        # (where a model is tightest) are not starved in high dimension
        radii = radius * rng.uniform(size=samples)
        radii[0] = 0.0
        Y = center + radii[:, None] * dirs
        if hasattr(oracle, "eval_batch"):
            fy = oracle.eval_batch(Y)
        else:
            fy = np.array([oracle.eval(y) for y in Y])
        my = np.max([cut.offset + Y @ cut.slope for cut in model.cuts()], axis=0)
        worst = float(np.max((my - fy) / (1.0 + np.abs(fy))))
        violations.append(worst)
        idx.append(i)
    return _report("model_minorant", violations, idx, 1e-9)


def check_rate_bound(run, dist2: float, rho: float) -> CertificateReport:
    """``f(x_k) - f* <= 2 rho dist^2 / k^2`` for every ``k >= 1``."""
    if run.f_star is None:
        raise NotApplicable("optimal value unknown")
    slack = 1e-9 * (1.0 + abs(run.f_star))
    recs = [r for r in run.iterations if r.k > 0]
    violations = [r.gap - 2.0 * rho * dist2 / r.k**2 for r in recs]
    return _report("rate_bound", violations, [r.k for r in recs], slack)


def loglog_slope(gaps, k_lo: int, k_hi: int) -> float:
    """Least-squares slope of ``log gap_k`` against ``log k`` for ``k_lo <= k <= k_hi``."""
    if k_lo < 1 or k_hi <= k_lo:
        raise ValueError("need 1 <= k_lo < k_hi")
    gaps = np.asarray(gaps, dtype=float)
    window = gaps[k_lo:k_hi + 1]
    if window.shape[0] != k_hi - k_lo + 1 or not np.all(window > 0):
        raise ValueError("window unusable: gaps must be positive on the whole window")
    slope, _ = np.polyfit(np.log(np.arange(k_lo, k_hi + 1)), np.log(window), 1)
    return float(slope)


def prox_objective(model: TwoCutModel, y_k, rho, y) -> float:
    d = np.asarray(y) - y_k
    return model_eval(model, y) + 0.5 * rho * float(d @ d)


@lru_cache(maxsize=4)
def _grid(points):
    t = np.linspace(0.0, 1.0, points)
    u = 1.0 - t
    return t, t * t, 2.0 * t * u, u * u


def grid_prox_dual(model: TwoCutModel, y_k, rho, points: int = 1_000_000) -> tuple[float, np.ndarray]:
    """Brute-force dual of the two-cut prox subproblem.

    For each multiplier ``t`` on a uniform grid over ``[0, 1]`` the Lagrangian
    ``t l1(y) + (1 - t) l2(y) + rho/2 ||y - y_k||^2`` is minimized at
    ``y(t) = y_k - (t g1 + (1 - t) g2) / rho``, where it equals
    ``t l1(y_k) + (1 - t) l2(y_k) - ||t g1 + (1 - t) g2||^2 / (2 rho)``.
    Returns the best value over the grid and the corresponding ``y(t)``.
    """
    y_k = np.asarray(y_k, dtype=float)
    c1 = model.newest
    c2 = model.aggregate if model.aggregate is not None else model.newest
    g1, g2 = c1.slope, c2.slope
    h1, h2 = c1(y_k), c2(y_k)
    t, tt, tu2, uu = _grid(points)
    sq = tt * float(g1 @ g1) + tu2 * float(g1 @ g2) + uu * float(g2 @ g2)
    lagr = h2 + t * (h1 - h2) - sq / (2.0 * rho)
    i = int(np.argmax(lagr))
    y = y_k - (t[i] * g1 + (1.0 - t[i]) * g2) / rho
    return float(lagr[i]), y
