"""Domain types, instance validation, budget accounting and run traces."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-9
MIXTURE_TOL = 1e-12
BALL_TOL = 1e-9


class PlanError(ValueError):
    """Base class for rejected instances. ``index`` names the offending entry."""

    def __init__(self, message: str, index=None):
        super().__init__(message)
        self.index = index


class PlanRowSumMismatch(PlanError):
    pass


class EntryOutOfRange(PlanError):
    pass


class DegenerateDimensions(PlanError):
    pass


class ScaledCostOutOfRange(ValueError):
    pass


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpendingPlan:
    """Per-round budget targets, ``entries[i, t]`` for resource i at round t+1."""

    entries: np.ndarray

    def __post_init__(self):
        e = _frozen(self.entries)
        if e.ndim == 1:
            e = _frozen(e[None, :])
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise DegenerateDimensions(f"plan must be a non-empty m x T matrix, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            bad = tuple(int(v) for v in np.argwhere(~np.isfinite(e))[0])
            raise EntryOutOfRange(f"plan entry {bad} is not finite", index=bad)
        out = (e < 0.0) | (e > 1.0)
        if out.any():
            bad = tuple(int(v) for v in np.argwhere(out)[0])
            raise EntryOutOfRange(f"plan entry {bad} = {e[bad]!r} outside [0, 1]", index=bad)
        sums = e.sum(axis=1)
        for i in range(1, sums.size):
            if abs(sums[i] - sums[0]) > ROW_SUM_TOL:
                raise PlanRowSumMismatch(
                    f"plan row {i} sums to {sums[i]!r}, row 0 sums to {sums[0]!r}", index=i
                )
        object.__setattr__(self, "entries", e)

    @property
    def num_resources(self) -> int:
        return self.entries.shape[0]

    @property
    def horizon(self) -> int:
        return self.entries.shape[1]

    @property
    def budget(self) -> float:
        return float(self.entries[0].sum())

    @property
    def rho(self) -> float:
        return self.budget / self.horizon

    def entry(self, i: int, t: int) -> float:
        """Budget for resource ``i`` at round ``t`` (1-based)."""
        return float(self.entries[i, t - 1])

    @property
    def rho_min(self) -> float:
        return float(self.entries.min())

    def scaled(self, factor: float) -> "SpendingPlan":
        return SpendingPlan(self.entries * factor)

    @classmethod
    def uniform(cls, T: int, m: int, rho: float) -> "SpendingPlan":
        return cls(np.full((m, T), float(rho)))


@dataclass(frozen=True)
class Instance:
    horizon: int
    num_arms: int
    num_resources: int
    budget: float
    plan: SpendingPlan

    def __post_init__(self):
        validate_instance(self)

    @property
    def rho(self) -> float:
        return self.budget / self.horizon

    @property
    def rho_min(self) -> float:
        return self.plan.rho_min

    @classmethod
    def from_plan(cls, plan: SpendingPlan, num_arms: int) -> "Instance":
        return cls(plan.horizon, num_arms, plan.num_resources, plan.budget, plan)


def validate_instance(inst: Instance) -> Instance:
    """Return ``inst`` unchanged if every structural invariant holds."""
    T, K, m = inst.horizon, inst.num_arms, inst.num_resources
    if int(T) != T or T < 1:
        raise DegenerateDimensions(f"horizon must be a positive integer, got {T!r}", index="horizon")
    if int(K) != K or K < 2:
        raise DegenerateDimensions(f"need the void arm plus at least one arm, got K={K!r}", index="num_arms")
    if int(m) != m or m < 1:
        raise DegenerateDimensions(f"need at least one resource, got m={m!r}", index="num_resources")
    if not np.isfinite(inst.budget) or inst.budget < 0:
        raise EntryOutOfRange(f"budget must be a nonnegative real, got {inst.budget!r}", index="budget")
    plan = inst.plan
    if plan.entries.shape != (m, T):
        raise DegenerateDimensions(
            f"plan shape {plan.entries.shape} does not match (m, T) = {(m, T)}", index="plan"
        )
    sums = plan.entries.sum(axis=1)
    for i, s in enumerate(sums):
        if abs(s - inst.budget) > ROW_SUM_TOL:
            raise PlanRowSumMismatch(f"plan row {i} sums to {s!r}, budget is {inst.budget!r}", index=i)
    return inst


@dataclass(frozen=True)
class Mixture:
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("mixture must be a non-empty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > MIXTURE_TOL * max(1, p.size):
            raise ValueError(f"not a probability vector: {p}")
        object.__setattr__(self, "probs", p)

    @classmethod
    def point_mass(cls, K: int, arm: int) -> "Mixture":
        p = np.zeros(K)
        p[arm] = 1.0
        return cls(p)

    @classmethod
    def void(cls, K: int) -> "Mixture":
        return cls.point_mass(K, 0)

    def expect(self, values: np.ndarray) -> np.ndarray:
        """Expectation of per-arm ``values`` (shape (K,) or (K, m)) under the mixture."""
        return self.probs @ values


@dataclass(frozen=True)
class LagrangeVector:
    values: np.ndarray
    radius: float

    def __post_init__(self):
        v = _frozen(self.values)
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if np.any(v < 0) or v.sum() > self.radius + BALL_TOL:
            raise ValueError(f"lambda {v} outside the l1 ball of radius {self.radius}")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, m: int, radius: float) -> "LagrangeVector":
        return cls(np.zeros(m), radius)


def normalize_budgets(per_resource_budgets, raw_costs):
    """Rescale costs so every resource shares the budget ``min_j B_j``.

    ``raw_costs`` has resources on its last axis. Returns ``(scaled, B)``.
    """
    budgets = np.asarray(per_resource_budgets, dtype=np.float64)
    if np.any(budgets <= 0):
        raise ValueError("all budgets must be positive")
    costs = np.asarray(raw_costs, dtype=np.float64)
    if costs.shape[-1] != budgets.size:
        raise ValueError(f"cost array has {costs.shape[-1]} resources, expected {budgets.size}")
    common = budgets.min()
    scaled = costs / (budgets / common)
    if np.any(scaled > 1.0) or np.any(scaled < 0.0):
        raise ScaledCostOutOfRange("scaled cost outside [0, 1]")
    return scaled, float(common)


def update_budget(remaining, costs) -> np.ndarray:
    return np.asarray(remaining, dtype=np.float64) - np.asarray(costs, dtype=np.float64)


def should_force_void(remaining) -> bool:
    # non-strict: a resource with exactly 1 left can still pay any cost
    return bool(np.any(np.asarray(remaining) < 1.0))


@dataclass(frozen=True)
class RoundOutcome:
    t: int
    mixture: Mixture
    arm: int
    reward: float
    costs: np.ndarray
    remaining_budgets: np.ndarray
    lam: LagrangeVector
    forced_void: bool


@dataclass
class RunTrace:
    """Per-round record of one run, stored column-wise.

    Round ``t`` (1-based) lives at row ``t - 1``. ``remaining`` holds the
    budgets after the round's update; ``lambdas`` the dual vector used in
    the round.
    """

    budget: float
    radius: float
    mixtures: np.ndarray  # (T, K)
    arms: np.ndarray  # (T,)
    rewards: np.ndarray  # (T,)
    costs: np.ndarray  # (T, m)
    remaining: np.ndarray  # (T, m)
    lambdas: np.ndarray  # (T, m)
    forced_void: np.ndarray  # (T,) bool
    tau: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.arms.shape[0]

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())

    def outcome(self, t: int) -> RoundOutcome:
        k = t - 1
        return RoundOutcome(
            t=t,
            mixture=Mixture(self.mixtures[k]),
            arm=int(self.arms[k]),
            reward=float(self.rewards[k]),
            costs=self.costs[k].copy(),
            remaining_budgets=self.remaining[k].copy(),
            lam=LagrangeVector(self.lambdas[k], self.radius),
            forced_void=bool(self.forced_void[k]),
        )

    @property
    def outcomes(self) -> list[RoundOutcome]:
        return [self.outcome(t) for t in range(1, self.horizon + 1)]

    def start_budgets(self) -> np.ndarray:
        """Remaining budgets at the start of each round, shape (T, m)."""
        m = self.remaining.shape[1]
        return np.vstack([np.full((1, m), self.budget), self.remaining[:-1]])

    def cumulative_spend(self) -> np.ndarray:
        return np.cumsum(self.costs, axis=0)

    def to_csv(self, path=None) -> str:
        text = trace_to_csv(self)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def stop_time(remaining: np.ndarray) -> int:
    """First round after which some budget is below 1, else T."""
    below = np.nonzero(np.any(remaining < 1.0, axis=1))[0]
    return int(below[0]) + 1 if below.size else remaining.shape[0]


def fmt_float(x) -> str:
    return repr(float(x))


def trace_to_csv(trace: RunTrace) -> str:
    m = trace.costs.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["t", "arm", "forced_void", "reward"]
        + [f"cost_{i}" for i in range(m)]
        + [f"remaining_{i}" for i in range(m)]
        + [f"lambda_{i}" for i in range(m)]
        + ["cum_reward"]
    )
    cum = np.cumsum(trace.rewards)
    for k in range(trace.horizon):
        w.writerow(
            [k + 1, int(trace.arms[k]), int(bool(trace.forced_void[k])), fmt_float(trace.rewards[k])]
            + [fmt_float(v) for v in trace.costs[k]]
            + [fmt_float(v) for v in trace.remaining[k]]
            + [fmt_float(v) for v in trace.lambdas[k]]
            + [fmt_float(cum[k])]
        )
    return buf.getvalue()


def read_trace_csv(path) -> dict[str, np.ndarray]:
    """Load a trace CSV back into column arrays keyed by header name."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    return {key: np.array([float(r[key]) for r in rows]) for key in rows[0]}
