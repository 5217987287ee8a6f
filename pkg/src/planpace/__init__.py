"""Online budget pacing against a per-round spending plan.

Learners (dual and primal-dual, with a meta-procedure for very uneven
plans), LP baselines, seeded environments and an experiment harness.
"""

from ._jit import backend_name
from .algorithms import (
    AlgorithmSpec,
    RefusePreprocess,
    ZeroRhoMin,
    meta_transform,
    ora_best_response,
    run,
    run_olrc_bandit,
    run_olrc_full,
    run_ora,
    void_skip_preprocess,
)
from .core import Instance, LagrangeVector, Mixture, RunTrace, SpendingPlan, validate_instance
from .environments import BanditFeedback, Environment, EnvironmentSpec, PlanSpec, generate_plan
from .lp import LinearProgram, LpSolution, lp_brute_check, solve_lp
from .oracles import (
    ErrorSchedule,
    MeanProfile,
    OracleReport,
    opt_dynamic,
    opt_dynamic_eps,
    opt_static,
    opt_static_eps,
    realized_regrets,
    regret_bound,
)

__version__ = "0.1.0"
