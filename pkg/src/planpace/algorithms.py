"""Dual and primal-dual learners that follow a spending plan.

* ``run_ora``: rewards and costs are revealed before acting; the learner
  best-responds to the Lagrangian at the current prices.
* ``run_olrc_full`` / ``run_olrc_bandit``: a primal minimizer picks a mixture
  before anything is revealed, with full or bandit feedback afterwards.

Every learner plays the void arm once some remaining budget drops below 1,
and keeps updating its minimizers until round T.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import Instance, LagrangeVector, Mixture, RunTrace, SpendingPlan, stop_time
from .environments import BanditFeedback, Environment
from .minimizers import Exp3IX, Hedge, make_dual

log = logging.getLogger(__name__)

SETTINGS = ("ORA", "OLRC_full", "OLRC_bandit")


class ZeroRhoMin(ValueError):
    """The plan has a zero entry and neither meta nor void-skip was requested."""


class RefusePreprocess(ValueError):
    """Too many sub-threshold rounds for void-skip; use the meta-procedure."""


@dataclass(frozen=True)
class AlgorithmSpec:
    setting: str = "ORA"
    meta_rescale: bool = False
    void_skip: bool = False
    dual_kind: str = "euclidean"
    primal_kind: str | None = None
    tie_break: str = "lowest-index"
    # minimizer hyperparameters; None picks the defaults
    dual_eta: float | None = None
    grad_bound: float | None = None
    primal_eta: float | None = None
    strict: bool = False

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}; expected one of {SETTINGS}")
        if self.primal_kind is None:
            default = {"ORA": None, "OLRC_full": "hedge", "OLRC_bandit": "exp3ix"}[self.setting]
            object.__setattr__(self, "primal_kind", default)
        if self.setting == "ORA" and self.primal_kind is not None:
            raise ValueError("ORA has no primal minimizer")
        if self.setting == "OLRC_full" and self.primal_kind != "hedge":
            raise ValueError("full feedback pairs with the hedge primal")
        if self.setting == "OLRC_bandit" and self.primal_kind != "exp3ix":
            raise ValueError("bandit feedback pairs with the exp3ix primal")
        if self.meta_rescale and self.void_skip:
            raise ValueError("meta_rescale and void_skip are mutually exclusive")
        if self.dual_kind not in ("euclidean", "entropic"):
            raise ValueError(f"unknown dual kind {self.dual_kind!r}")
        if self.tie_break != "lowest-index":
            raise ValueError("only lowest-index tie breaking is supported")


@dataclass(frozen=True)
class LagrangianTerms:
    reward_part: float
    penalty_part: float
    value: float


def lagrangian_terms(f, c, lam, mixture=None, budgets=None) -> LagrangianTerms:
    """Lagrangian of ``mixture`` (default: uniform) at prices ``lam``.

    Without ``budgets`` the value is ``reward - lam . spend`` (best-response
    form); with them it is ``reward + lam . (budgets - spend)``.
    """
    f = np.asarray(f, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    lam = lam.values if isinstance(lam, LagrangeVector) else np.asarray(lam, dtype=np.float64)
    p = np.full(f.size, 1.0 / f.size) if mixture is None else np.asarray(getattr(mixture, "probs", mixture))
    reward = float(p @ f)
    spend = p @ c
    if budgets is None:
        pen = float(lam @ spend)
        return LagrangianTerms(reward, pen, reward - pen)
    pen = float(lam @ (spend - np.asarray(budgets, dtype=np.float64)))
    return LagrangianTerms(reward, pen, reward - pen)


def ora_best_response(f_t, c_t, lam) -> Mixture:
    """Point mass on ``argmax_x f(x) - lam . c(x)``, lowest index on ties."""
    lam = lam.values if isinstance(lam, LagrangeVector) else np.asarray(lam, dtype=np.float64)
    f_t = np.asarray(f_t, dtype=np.float64)
    c_t = np.asarray(c_t, dtype=np.float64)
    return Mixture.point_mass(f_t.size, kernels.best_response(f_t, c_t, lam))


# ------------------------------------------------------------ preprocessing


def meta_transform(inst: Instance):
    """``(rho_hat, instance with plan scaled by 1 - T^{-1/4})``."""
    T = inst.horizon
    rho = inst.rho
    if not rho > 0:
        raise ValueError("the meta-procedure needs rho > 0")
    q = T ** 0.25
    shrink = 1.0 - 1.0 / q
    plan = SpendingPlan(inst.plan.entries * shrink)
    scaled = Instance(T, inst.num_arms, inst.num_resources, float(plan.entries[0].sum()), plan)
    return rho / q, scaled


@dataclass(frozen=True)
class SkipPlan:
    """Result of void-skip: masked rounds and the plan over the remaining ones."""

    mask: np.ndarray  # (T,) True where the learner is forced to the void arm
    entries: np.ndarray  # (m, T') plan over unmasked rounds
    rho_min: float

    @property
    def horizon(self) -> int:
        return self.entries.shape[1]


def void_skip_preprocess(inst: Instance, threshold: float | None = None) -> SkipPlan:
    T = inst.horizon
    if threshold is None:
        threshold = inst.rho / T ** 0.25
    mask = np.any(inst.plan.entries < threshold, axis=0)
    n = int(mask.sum())
    if n > math.sqrt(T):
        raise RefusePreprocess(f"{n} rounds below {threshold:.4g} exceed sqrt(T) = {math.sqrt(T):.4g}")
    kept = inst.plan.entries[:, ~mask]
    rmin = float(kept.min()) if kept.size else 0.0
    return SkipPlan(mask, kept, rmin)


# ---------------------------------------------------------------- helpers


@dataclass
class _Setup:
    radius: float
    plan: np.ndarray  # (m, T) targets fed to the dual
    mask: np.ndarray  # (T,) bool
    meta: dict = field(default_factory=dict)


def _setup(inst: Instance, spec: AlgorithmSpec) -> _Setup:
    T = inst.horizon
    mask = np.zeros(T, dtype=bool)
    info = {"meta_applied": False, "void_skip": False, "masked_rounds": 0}
    if spec.meta_rescale:
        rho_hat, scaled = meta_transform(inst)
        info.update(meta_applied=True, rho_min_used=rho_hat)
        return _Setup(1.0 / rho_hat, scaled.plan.entries, mask, info)
    if spec.void_skip:
        sk = void_skip_preprocess(inst)
        if not sk.rho_min > 0:
            raise ZeroRhoMin("plan still has a zero entry after void-skip")
        info.update(void_skip=True, masked_rounds=int(sk.mask.sum()), rho_min_used=sk.rho_min)
        return _Setup(1.0 / sk.rho_min, inst.plan.entries, sk.mask, info)
    rmin = inst.rho_min
    if not rmin > 0:
        raise ZeroRhoMin("rho_min = 0: enable meta_rescale or void_skip")
    info["rho_min_used"] = rmin
    return _Setup(1.0 / rmin, inst.plan.entries, mask, info)


def _dual_for(spec: AlgorithmSpec, inst: Instance, radius: float):
    if spec.dual_kind == "euclidean":
        G = math.sqrt(inst.num_resources) if spec.grad_bound is None else spec.grad_bound
        return make_dual("euclidean", inst.num_resources, radius, inst.horizon, grad_bound=G, eta=spec.dual_eta)
    return make_dual("entropic", inst.num_resources, radius, inst.horizon, eta=spec.dual_eta)


class _Recorder:
    def __init__(self, T, K, m, budget, radius):
        self.budget = budget
        self.radius = radius
        self.mixtures = np.zeros((T, K))
        self.arms = np.zeros(T, dtype=np.int64)
        self.rewards = np.zeros(T)
        self.costs = np.zeros((T, m))
        self.remaining = np.zeros((T, m))
        self.lambdas = np.zeros((T, m))
        self.forced = np.zeros(T, dtype=bool)

    def trace(self, meta: dict) -> RunTrace:
        return RunTrace(
            budget=self.budget,
            radius=self.radius,
            mixtures=self.mixtures,
            arms=self.arms,
            rewards=self.rewards,
            costs=self.costs,
            remaining=self.remaining,
            lambdas=self.lambdas,
            forced_void=self.forced,
            tau=stop_time(self.remaining),
            meta=meta,
        )


def _check_env(inst: Instance, env):
    if (env.horizon, env.num_arms, env.num_resources) != (inst.horizon, inst.num_arms, inst.num_resources):
        raise ValueError(
            f"environment (T, K, m) = {(env.horizon, env.num_arms, env.num_resources)} does not match "
            f"instance {(inst.horizon, inst.num_arms, inst.num_resources)}"
        )


def _arm_uniforms(env: Environment, T: int) -> np.ndarray:
    return kernels.uniform_block(env.learner_seed, T, 1, 1)[:, 0, 0]


# ---------------------------------------------------------------- learners


def run_ora(inst: Instance, env: Environment, spec: AlgorithmSpec | None = None) -> RunTrace:
    """Dual learner for the full-information setting."""
    spec = spec or AlgorithmSpec("ORA")
    _check_env(inst, env)
    st = _setup(inst, spec)
    dual = _dual_for(spec, inst, st.radius)
    T, K, m = inst.horizon, inst.num_arms, inst.num_resources
    F, C = env.sample_block()
    rec = _Recorder(T, K, m, inst.budget, st.radius)
    if kernels.JIT_ENABLED and spec.dual_kind == "euclidean":
        return _run_ora_fused(rec, F, C, st, dual, inst.budget).trace(st.meta)
    remaining = np.full(m, float(inst.budget))
    plan = st.plan
    for k in range(T):
        lam = dual.select()
        rec.lambdas[k] = lam
        if st.mask[k]:
            rec.mixtures[k, 0] = 1.0
            rec.forced[k] = True
            rec.remaining[k] = remaining
            continue
        f, c = F[k], C[k]
        arm = kernels.best_response(f, c, lam)
        rec.mixtures[k, arm] = 1.0
        if np.any(remaining < 1.0):
            rec.forced[k] = True
        else:
            rec.arms[k] = arm
            rec.rewards[k] = f[arm]
            rec.costs[k] = c[arm]
            remaining = remaining - c[arm]
        rec.remaining[k] = remaining
        # feedback uses the best response, not the played arm
        dual.update(c[arm] - plan[:, k])
    return rec.trace(st.meta)


def _run_ora_fused(rec, F, C, st, dual, budget):
    """Same rounds as the loop in run_ora, compiled as a single kernel."""
    fixed = -1.0 if dual.fixed_eta is None else float(dual.fixed_eta)
    out = kernels.ora_euclid_loop_nb(
        np.ascontiguousarray(F), np.ascontiguousarray(C), np.ascontiguousarray(st.plan, dtype=np.float64),
        np.asarray(st.mask, dtype=np.bool_), float(budget), float(st.radius), float(dual.G), fixed,
    )
    arms, best, rewards, costs, remaining, lambdas, forced = out
    rec.arms[:] = arms
    rec.mixtures[np.arange(len(best)), best] = 1.0  # masked rounds keep best=0, the void arm
    rec.rewards[:] = rewards
    rec.costs[:] = costs
    rec.remaining[:] = remaining
    rec.lambdas[:] = lambdas
    rec.forced[:] = forced
    return rec


def run_olrc_full(inst: Instance, env: Environment, spec: AlgorithmSpec | None = None) -> RunTrace:
    """Hedge primal and a full-feedback dual; both see the whole round after acting."""
    spec = spec or AlgorithmSpec("OLRC_full")
    _check_env(inst, env)
    st = _setup(inst, spec)
    dual = _dual_for(spec, inst, st.radius)
    T, K, m = inst.horizon, inst.num_arms, inst.num_resources
    D = st.radius
    primal = Hedge(K, -D, 1.0 + D, T, eta=spec.primal_eta, strict=spec.strict)
    F, C = env.sample_block()
    U = _arm_uniforms(env, T)
    rec = _Recorder(T, K, m, inst.budget, D)
    remaining = np.full(m, float(inst.budget))
    plan = st.plan
    for k in range(T):
        if st.mask[k]:
            rec.mixtures[k, 0] = 1.0
            rec.forced[k] = True
            rec.remaining[k] = remaining
            rec.lambdas[k] = dual.select()
            continue
        xi = primal.select()
        rec.mixtures[k] = xi
        arm = kernels.sample_index(xi, U[k])
        f, c = F[k], C[k]
        if np.any(remaining < 1.0):
            rec.forced[k] = True
        else:
            rec.arms[k] = arm
            rec.rewards[k] = f[arm]
            rec.costs[k] = c[arm]
            remaining = remaining - c[arm]
        rec.remaining[k] = remaining
        lam = dual.select()
        rec.lambdas[k] = lam
        primal.update(f - c @ lam)
        dual.update(xi @ c - plan[:, k])
    meta = dict(st.meta, clamp_events=primal.clamp_events, primal_eta=primal.eta)
    return rec.trace(meta)


def run_olrc_bandit(inst: Instance, env: Environment, spec: AlgorithmSpec | None = None) -> RunTrace:
    """EXP3-IX primal on the played arm only; the dual sees the played cost."""
    spec = spec or AlgorithmSpec("OLRC_bandit")
    _check_env(inst, env)
    st = _setup(inst, spec)
    dual = _dual_for(spec, inst, st.radius)
    T, K, m = inst.horizon, inst.num_arms, inst.num_resources
    D = st.radius
    primal = Exp3IX(K, -D, 1.0 + D, T, strict=spec.strict)
    U = _arm_uniforms(env, T)
    feed = env if isinstance(env, BanditFeedback) else BanditFeedback(env)
    rec = _Recorder(T, K, m, inst.budget, D)
    remaining = np.full(m, float(inst.budget))
    plan = st.plan
    zero = np.zeros(m)
    for k in range(T):
        if st.mask[k]:
            rec.mixtures[k, 0] = 1.0
            rec.forced[k] = True
            rec.remaining[k] = remaining
            rec.lambdas[k] = dual.select()
            continue
        xi = primal.select()
        rec.mixtures[k] = xi
        arm = kernels.sample_index(xi, U[k])
        if np.any(remaining < 1.0):
            rec.forced[k] = True
            arm, r, c = 0, 0.0, zero
        else:
            r, c = feed.play(k + 1, arm)
            rec.arms[k] = arm
            rec.rewards[k] = r
            rec.costs[k] = c
            remaining = remaining - c
        rec.remaining[k] = remaining
        lam = dual.select()
        rec.lambdas[k] = lam
        primal.update(arm, r - float(lam @ c))
        dual.update(c - plan[:, k])
    meta = dict(st.meta, clamp_events=primal.clamp_events)
    return rec.trace(meta)


_RUNNERS = {"ORA": run_ora, "OLRC_full": run_olrc_full, "OLRC_bandit": run_olrc_bandit}


def run(inst: Instance, env: Environment, spec: AlgorithmSpec) -> RunTrace:
    trace = _RUNNERS[spec.setting](inst, env, spec)
    if spec.strict and trace.meta.get("clamp_events", 0) > 0:
        raise RuntimeError(f"{trace.meta['clamp_events']} payoffs were clamped in strict mode")
    return trace


def final_mixture(trace: RunTrace) -> np.ndarray:
    """Mixture used in the last unmasked round."""
    live = np.nonzero(trace.mixtures[:, 0] < 1.0)[0]
    return trace.mixtures[live[-1] if live.size else -1]
