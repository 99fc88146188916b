"""Accelerated proximal bundle method for smooth convex minimization, with baselines and certificate checks."""

from .bundle_model import Cut, TwoCutModel, aggregate_cut, model_eval, solve_prox, tangent_cut
from .objectives import (
    QuadraticObjective,
    make_random_psd_quadratic,
    make_worst_case,
    parse_objective,
    quadratic_optimum,
)
from .prox_descent import InnerBudgetExhausted, ProxDescentReport, descent_test, prox_descent
from .solvers import (
    RunRecord,
    accelerated_pbm,
    classical_pbm_single_loop,
    gradient_descent,
    nesterov_agd,
    pbm,
)

__version__ = "0.1.0"
