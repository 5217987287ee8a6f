"""Optimal baselines and closed-form regret bounds.

All baselines are LPs over mixtures of the real arms. The void arm is
eliminated by relaxing the simplex equality to ``sum_{x >= 1} xi(x) <= 1``,
which leaves only ``<=`` rows with nonnegative right-hand sides, so the
origin is always a feasible basis and phase 1 never runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RunTrace, SpendingPlan
from .lp import LinearProgram, solve_lp
from .minimizers import exp3ix_regret_bound, hedge_regret_bound

SETTINGS = ("ORA", "OLRC_full", "OLRC_bandit")


class InvalidParameters(ValueError):
    pass


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class MeanProfile:
    """Mean rewards ``fbar[t, x]`` and costs ``cbar[t, x, i]``, 0-based rounds."""

    fbar: np.ndarray
    cbar: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.fbar, dtype=np.float64)
        c = np.asarray(self.cbar, dtype=np.float64)
        if c.ndim == 2:
            c = c[:, :, None]
        if f.ndim != 2 or c.ndim != 3 or c.shape[:2] != f.shape:
            raise ValueError(f"profile shapes disagree: fbar {f.shape}, cbar {c.shape}")
        if np.any(f[:, 0] != 0) or np.any(c[:, 0] != 0):
            raise ValueError("void arm 0 must have zero mean reward and cost")
        if np.any((f < 0) | (f > 1)) or np.any((c < 0) | (c > 1)):
            raise ValueError("mean rewards and costs must lie in [0, 1]")
        object.__setattr__(self, "fbar", f)
        object.__setattr__(self, "cbar", c)

    @property
    def horizon(self) -> int:
        return self.fbar.shape[0]

    @property
    def num_arms(self) -> int:
        return self.fbar.shape[1]

    @property
    def num_resources(self) -> int:
        return self.cbar.shape[2]


@dataclass(frozen=True)
class ErrorSchedule:
    eps: np.ndarray  # (m, T)

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.eps, dtype=np.float64))
        if np.any(e < 0) or not np.all(np.isfinite(e)):
            raise ValueError("error terms must be finite and nonnegative")
        object.__setattr__(self, "eps", e)

    @classmethod
    def constant(cls, m: int, T: int, value: float) -> "ErrorSchedule":
        return cls(np.full((m, T), float(value)))

    def total(self) -> float:
        return float(self.eps.sum())

    def is_zero(self) -> bool:
        return not np.any(self.eps)


@dataclass
class OracleReport:
    opt_dynamic: float
    opt_static: float
    per_round_dynamic_values: np.ndarray
    opt_dynamic_eps: float | None = None
    opt_static_eps: float | None = None


def _check_dims(profile: MeanProfile, plan: SpendingPlan):
    if plan.entries.shape != (profile.num_resources, profile.horizon):
        raise ValueError(
            f"plan shape {plan.entries.shape} does not match profile (m, T) = "
            f"{(profile.num_resources, profile.horizon)}"
        )


def _solve(lp: LinearProgram) -> float:
    sol = solve_lp(lp)
    if not sol.optimal:
        raise OracleError(f"baseline LP returned {sol.status.value}")
    return sol.objective_value


def _round_lp(f, c, budgets) -> LinearProgram:
    """One round over the real arms: ``f`` (K-1,), ``c`` (K-1, m), ``budgets`` (m,)."""
    A = np.vstack([c.T, np.ones((1, f.size))])
    return LinearProgram(c=f, A=A, b=np.append(budgets, 1.0))


# --------------------------------------------------------------- dynamic


def _per_round_values(profile: MeanProfile, plan: SpendingPlan) -> np.ndarray:
    T = profile.horizon
    f = profile.fbar[:, 1:]
    c = profile.cbar[:, 1:, :]
    vals = np.empty(T)
    cache: dict[bytes, float] = {}
    for t in range(T):
        bt = plan.entries[:, t]
        key = f[t].tobytes() + c[t].tobytes() + bt.tobytes()
        v = cache.get(key)
        if v is None:
            v = cache[key] = _solve(_round_lp(f[t], c[t], bt))
        vals[t] = v
    return vals


def _joint_lp(profile, plan, eps=None, aggregate=None) -> LinearProgram:
    T, K, m = profile.horizon, profile.num_arms, profile.num_resources
    n1 = K - 1
    f = profile.fbar[:, 1:]
    c = profile.cbar[:, 1:, :]
    rows, rhs = [], []
    for t in range(T):
        blk = np.zeros((m + 1, T * n1))
        blk[:m, t * n1 : (t + 1) * n1] = c[t].T
        blk[m, t * n1 : (t + 1) * n1] = 1.0
        rows.append(blk)
        b = plan.entries[:, t].copy()
        if eps is not None:
            b = b + eps[:, t]
        rhs.append(np.append(b, 1.0))
    if aggregate is not None:
        agg = np.zeros((m, T * n1))
        for i in range(m):
            agg[i] = c[:, :, i].ravel()
        rows.append(agg)
        rhs.append(np.full(m, float(aggregate)))
    return LinearProgram(c=f.ravel(), A=np.vstack(rows), b=np.concatenate(rhs))


def opt_dynamic(profile: MeanProfile, plan: SpendingPlan, method: str = "per_round"):
    """Best per-round mixtures that each respect the plan. Returns ``(value, per_round)``.

    ``method="joint"`` solves the single stacked LP instead; it exists to
    cross-check the per-round decomposition on small instances.
    """
    _check_dims(profile, plan)
    if method == "per_round":
        vals = _per_round_values(profile, plan)
        return float(vals.sum()), vals
    if method == "joint":
        lp = _joint_lp(profile, plan)
        sol = solve_lp(lp)
        if not sol.optimal:
            raise OracleError(f"joint LP returned {sol.status.value}")
        n1 = profile.num_arms - 1
        per = (sol.x.reshape(profile.horizon, n1) * profile.fbar[:, 1:]).sum(axis=1)
        return sol.objective_value, per
    raise ValueError(f"unknown method {method!r}")


def opt_dynamic_eps(profile: MeanProfile, plan: SpendingPlan, errs: ErrorSchedule, B: float) -> float:
    """Per-round rows relaxed by ``eps``, plus the aggregate rows ``sum_t spend <= B``."""
    _check_dims(profile, plan)
    if errs.eps.shape != plan.entries.shape:
        raise ValueError(f"error schedule shape {errs.eps.shape} != plan shape {plan.entries.shape}")
    if errs.is_zero():
        return opt_dynamic(profile, plan)[0]
    return _solve(_joint_lp(profile, plan, errs.eps, aggregate=B))


# ---------------------------------------------------------------- static


def _static_lp(profile, plan, eps=None, aggregate=None) -> LinearProgram:
    m = profile.num_resources
    f_sum = profile.fbar[:, 1:].sum(axis=0)
    c = profile.cbar[:, 1:, :]
    # one row per (t, i): c[t, :, i] . xi <= B_t^i (+ eps)
    A = np.transpose(c, (2, 0, 1)).reshape(-1, c.shape[1])
    b = plan.entries.reshape(-1).copy()
    if eps is not None:
        b = b + eps.reshape(-1)
    # identical rows only ever bind at their smallest bound
    uniq, inv = np.unique(A, axis=0, return_inverse=True)
    bmin = np.full(uniq.shape[0], np.inf)
    np.minimum.at(bmin, inv.ravel(), b)
    nonzero = np.any(uniq != 0, axis=1)
    A_rows = [uniq[nonzero], np.ones((1, c.shape[1]))]
    b_rows = [bmin[nonzero], [1.0]]
    if aggregate is not None:
        A_rows.append(c.sum(axis=0).T)
        b_rows.append(np.full(m, float(aggregate)))
    return LinearProgram(c=f_sum, A=np.vstack(A_rows), b=np.concatenate(b_rows))


def opt_static(profile: MeanProfile, plan: SpendingPlan) -> float:
    """Best single mixture used in every round that respects the plan in every round."""
    _check_dims(profile, plan)
    return _solve(_static_lp(profile, plan))


def opt_static_eps(profile: MeanProfile, plan: SpendingPlan, errs: ErrorSchedule, B: float) -> float:
    _check_dims(profile, plan)
    if errs.eps.shape != plan.entries.shape:
        raise ValueError(f"error schedule shape {errs.eps.shape} != plan shape {plan.entries.shape}")
    if errs.is_zero():
        return opt_static(profile, plan)
    return _solve(_static_lp(profile, plan, errs.eps, aggregate=B))


def oracle_report(profile: MeanProfile, plan: SpendingPlan, errs: ErrorSchedule | None = None) -> OracleReport:
    dyn, per = opt_dynamic(profile, plan)
    rep = OracleReport(opt_dynamic=dyn, opt_static=opt_static(profile, plan), per_round_dynamic_values=per)
    if errs is not None:
        rep.opt_dynamic_eps = opt_dynamic_eps(profile, plan, errs, plan.budget)
        rep.opt_static_eps = opt_static_eps(profile, plan, errs, plan.budget)
    return rep


def realized_regrets(trace: RunTrace, report: OracleReport):
    """``(dynamic, static)`` regret of a run; negative values are kept."""
    total = trace.total_reward
    return report.opt_dynamic - total, report.opt_static - total


# ----------------------------------------------------------------- bounds


def regret_bound(setting: str, meta: bool, T: int, rho: float, rho_min: float, R_D_T: float,
                 R_P_T: float = 0.0, delta: float = 0.05, delta_P: float = 0.05,
                 eps_total: float = 0.0) -> float:
    """High-probability regret bound of each learner.

    ``R_D_T`` and ``R_P_T`` are the regret bounds of the dual and primal
    minimizers on payoffs rescaled to [0, 1]. ``eps_total`` adds the cost of
    competing with the relaxed baselines. ``delta_P`` only matters through
    ``R_P_T`` for the bandit learner; it is validated here for completeness.
    """
    if setting not in SETTINGS:
        raise InvalidParameters(f"unknown setting {setting!r}")
    if not (0 < delta < 1) or not (0 < delta_P < 1):
        raise InvalidParameters("delta and delta_P must lie in (0, 1)")
    if T < 1 or R_D_T < 0 or R_P_T < 0 or eps_total < 0:
        raise InvalidParameters("T must be positive and regret terms nonnegative")
    conc = math.sqrt(2.0 * T * math.log(T / delta))
    c0 = 4.0 if setting == "OLRC_bandit" else 8.0
    rp = 0.0 if setting == "ORA" else R_P_T
    if not meta:
        if not rho_min > 0:
            raise InvalidParameters("rho_min must be positive without the meta-procedure")
        inv = 1.0 / rho_min
        return (1.0 + inv + 2.0 * inv * R_D_T + (1.0 + 2.0 * inv) * rp
                + (c0 + c0 * inv) * conc + inv * eps_total)
    if not rho > 0:
        raise InvalidParameters("rho must be positive for the meta-procedure")
    q = T ** 0.25
    head = math.sqrt(math.log(T / delta)) if setting != "OLRC_bandit" else 0.0
    return ((14.0 / rho) * (head + (R_D_T + rp) / math.sqrt(T)) * T ** 0.75
            + T ** 0.75
            + (c0 + 4.0 * q / rho) * conc
            + (2.0 * q / rho) * R_D_T
            + (1.0 + 2.0 * q / rho) * rp
            + (q / rho) * eps_total)


def minimizer_regret_terms(setting: str, T: int, K: int, m: int, dual_kind: str = "euclidean",
                           delta_P: float = 0.05, grad_bound: float | None = None):
    """``(R_D, R_P)`` of the default minimizers on [0, 1]-rescaled payoffs."""
    if dual_kind == "euclidean":
        G = math.sqrt(m) if grad_bound is None else grad_bound
        # 1.5 D G sqrt(T) in raw units over a payoff range of width 2 D
        R_D = 0.75 * G * math.sqrt(T)
    elif dual_kind == "entropic":
        R_D = hedge_regret_bound(m + 1, T)
    else:
        raise InvalidParameters(f"unknown dual kind {dual_kind!r}")
    if setting == "ORA":
        R_P = 0.0
    elif setting == "OLRC_full":
        R_P = hedge_regret_bound(K, T)
    else:
        R_P = exp3ix_regret_bound(K, T, delta_P)
    return R_D, R_P
