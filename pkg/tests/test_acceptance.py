"""Acceptance suite: one test per criterion, numbered 01-11.

Each test attaches a short ``detail`` property; the terminal summary hook in
``conftest.py`` prints one PASS/FAIL line per criterion from those.
"""

import time

import numpy as np
import pytest
from conftest import WORST_CASE_500_DIST2, WORST_CASE_500_F_STAR

from bundle_accel.diagnostics import (
    check_ahpe_condition,
    check_coefficients,
    check_inner_bound,
    check_model_minorant,
    check_potential,
    loglog_slope,
)
from bundle_accel.objectives import default_start, make_random_psd_quadratic, quadratic_optimum
from bundle_accel.solvers import (
    accelerated_pbm,
    classical_pbm_single_loop,
    coefficient_sequence,
    nesterov_agd,
    pbm,
)

pytestmark = pytest.mark.acceptance

N = 500
ITERS = 1000


@pytest.fixture(scope="module")
def apbm_worst(worst_case_500):
    t0 = time.process_time()
    run = accelerated_pbm(worst_case_500, np.zeros(N), 0.5, 1.0, ITERS, f_star=WORST_CASE_500_F_STAR)
    return run, time.process_time() - t0


@pytest.fixture(scope="module")
def pbm_worst(worst_case_500):
    return pbm(worst_case_500, np.zeros(N), 0.5, 1.0, ITERS, f_star=WORST_CASE_500_F_STAR)


@pytest.fixture(scope="module")
def psd_100_7():
    obj = make_random_psd_quadratic(100, 7)
    _, f_star = quadratic_optimum(obj)
    return obj, default_start(obj), f_star


@pytest.fixture(scope="module")
def equivalence_runs(psd_100_7):
    obj, x0, _ = psd_100_7
    return nesterov_agd(obj, x0, 200), accelerated_pbm(obj, x0, 0.5, 1.0, 200)


@pytest.fixture(scope="module")
def snapshot_run(worst_case_500):
    return accelerated_pbm(worst_case_500, np.zeros(N), 0.9, 1.0, ITERS, f_star=WORST_CASE_500_F_STAR,
                           record_models=True)


@pytest.fixture(scope="module")
def loop_runs(worst_case_500):
    double = pbm(worst_case_500, np.zeros(N), 0.9, 1.0, 50)
    total = sum(r.inner_iterations for r in double.iterations[1:])
    single = classical_pbm_single_loop(worst_case_500, np.zeros(N), 0.9, 1.0, total)
    return double, single


@pytest.fixture(scope="module")
def figure_runs(psd_100_7):
    obj, x0, f_star = psd_100_7
    runs = {
        "agd": nesterov_agd(obj, x0, ITERS, f_star=f_star),
        "pbm": pbm(obj, x0, 0.5, 1.0, ITERS, f_star=f_star),
    }
    with np.errstate(over="ignore", invalid="ignore"):
        for rho in (1.0, 0.5, 0.1):
            runs[f"apbm@{rho:g}"] = accelerated_pbm(obj, x0, 0.5, rho, ITERS, f_star=f_star)
    return runs


def test_criterion_01_rate_bound(apbm_worst, record_property):
    run, seconds = apbm_worst
    slack = 1e-9 * (1 + abs(WORST_CASE_500_F_STAR))
    excess = [r.gap - 2 * WORST_CASE_500_DIST2 / r.k**2 for r in run.iterations[1:]]
    worst = max(excess)
    record_property("detail", f"max(gap - bound) = {worst:.3e}, runtime {seconds:.2f}s")
    assert len(excess) == ITERS
    assert worst <= slack
    assert seconds < 30.0


def test_criterion_02_rate_separation(apbm_worst, pbm_worst, record_property):
    apbm_slope = loglog_slope(apbm_worst[0].gaps(), 100, 1000)
    pbm_slope = loglog_slope(pbm_worst.gaps(), 100, 1000)
    record_property("detail", f"apbm slope {apbm_slope:.4f} (<= -1.8), pbm slope {pbm_slope:.4f} (in [-1.3, -0.7])")
    assert apbm_slope <= -1.8
    assert -1.3 <= pbm_slope <= -0.7


def test_criterion_03_agd_equivalence(equivalence_runs, record_property):
    agd, apbm = equivalence_runs
    assert len(agd.iterations) == len(apbm.iterations) == 201
    dev = max(np.linalg.norm(b.x - a.x) / (1 + np.linalg.norm(a.x))
              for a, b in zip(agd.iterations, apbm.iterations))
    inner = {r.inner_iterations for r in apbm.iterations[1:]}
    record_property("detail", f"max relative deviation {dev:.3e}, inner counts {sorted(inner)}")
    assert dev <= 1e-8
    assert inner == {1}


def test_criterion_04_inner_bound(apbm_worst, pbm_worst, equivalence_runs, snapshot_run, loop_runs, figure_runs,
                                  record_property):
    cases = [
        (apbm_worst[0], 0.5), (pbm_worst, 0.5), (equivalence_runs[1], 0.5), (snapshot_run, 0.9),
        (loop_runs[0], 0.9), (loop_runs[1], 0.9), (figure_runs["pbm"], 0.5), (figure_runs["apbm@1"], 0.5),
    ]
    reports = [check_inner_bound(run, 1.0, 1.0, beta) for run, beta in cases]
    names = sorted({r.check_name for r in reports})
    peak = max(r.inner_iterations for run, _ in cases for r in run.iterations[1:])
    record_property("detail", f"{len(cases)} runs, checks {names}, largest inner count {peak}")
    assert "inner_bound<=512" in names and "inner_bound<=12800" in names
    assert all(r.passed for r in reports)


def test_criterion_05_ahpe_certificate(apbm_worst, equivalence_runs, snapshot_run, figure_runs, record_property):
    runs = [apbm_worst[0], equivalence_runs[1], snapshot_run, figure_runs["apbm@1"]]
    reports = [check_ahpe_condition(run, 1.0) for run in runs]
    worst = max(r.worst_violation for r in reports)
    record_property("detail", f"{len(runs)} APBM runs with rho >= M, worst normalized violation {worst:.3e}")
    assert all(r.passed for r in reports)


def test_criterion_06_potential(apbm_worst, worst_case_500, worst_case_500_optimum, record_property):
    run = apbm_worst[0]
    x_star, f_star = worst_case_500_optimum
    reports = [check_potential(run, x_star, 1.0, f_ref=f_star)]
    rng = np.random.default_rng(6)
    for _ in range(10):
        reports.append(check_potential(run, rng.standard_normal(N), 1.0, oracle=worst_case_500))
    passed = sum(r.passed for r in reports)
    record_property("detail", f"{passed}/11 references pass (x* plus 10 random)")
    assert passed == 11


def test_criterion_07_coefficients(record_property):
    rep = check_coefficients(coefficient_sequence(1_000_000))
    record_property("detail", f"10^6 steps, worst violation {rep.worst_violation:.3e}")
    assert rep.passed


def test_criterion_08_prox_grid_equivalence(prox_grid_comparison, record_property):
    closed, grid_dual, grid_primal = prox_grid_comparison.T
    diff = np.abs(closed - grid_dual)
    record_property("detail", f"{diff.size} instances, max |closed - grid dual| = {diff.max():.3e}")
    assert diff.size == 1000
    assert diff.max() <= 1e-9
    # no grid candidate beats the closed-form minimizer
    assert np.all(closed <= grid_primal + 1e-12)


def test_criterion_09_single_double_loop(loop_runs, record_property):
    double, single = loop_runs
    descents = [r for r in single.iterations if r.descent]
    nulls = [r for r in single.iterations if r.descent is False]
    total = sum(r.inner_iterations for r in double.iterations[1:])
    same = all(np.array_equal(d.x, s.x) for d, s in zip(double.iterations[1:], descents))
    counts = [d.inner_iterations for d in double.iterations[1:]] == [s.inner_iterations for s in descents]
    between, run_len = [], 0
    for r in single.iterations[1:]:
        if r.descent:
            between.append(run_len)
            run_len = 0
        else:
            run_len += 1
    counts &= between == [d.inner_iterations - 1 for d in double.iterations[1:]]
    record_property("detail", f"{len(descents)} descents, {len(nulls)} null steps, {total} solves, "
                              f"iterates identical={same}")
    assert len(descents) == 50
    assert same and counts
    assert len(nulls) == total - 50


def test_criterion_10_figure_ordering(figure_runs, record_property):
    final = {name: run.iterations[-1].gap for name, run in figure_runs.items()}
    record_property("detail", ", ".join(f"{k}={v:.3e}" for k, v in final.items()))
    assert all(len(run.iterations) == ITERS + 1 for run in figure_runs.values())
    assert final["apbm@1"] <= final["agd"] <= final["pbm"]


def test_criterion_11_model_minorant(worst_case_500, snapshot_run, record_property):
    snaps = snapshot_run.model_snapshots
    two_cut = sum(s.model.aggregate is not None for s in snaps)
    rep = check_model_minorant(worst_case_500, snaps, samples=1000, seed=11)
    record_property("detail", f"{len(snaps)} snapshots ({two_cut} two-cut), worst excess {rep.worst_violation:.3e}")
    assert two_cut > 0
    assert rep.passed
