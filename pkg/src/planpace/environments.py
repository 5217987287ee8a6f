"""Seeded reward/cost sequences and spending-plan generators.

Randomness is counter based: the uniform behind arm ``x``, channel ``j`` at
round ``t`` is a hash of ``(stream seed, t, x, j)``. Channel 0 drives the
reward and channel ``1 + i`` the cost of resource ``i``. A learner that reads
the whole round and one that reads only the played arm therefore see the
same sample path, and the order of queries never matters.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import SpendingPlan
from .oracles import MeanProfile

KINDS = ("stationary", "piecewise", "drifting", "deterministic_adversarial")
NOISE = ("bernoulli", "uniform")
PLAN_KINDS = ("uniform", "frontloaded", "backloaded", "spiky", "custom")

_MASK = (1 << 64) - 1
# salt for the learner's own arm-sampling stream, kept apart from the environment's
LEARNER_SALT = 0xA11C


class BanditHygieneViolation(RuntimeError):
    """A bandit learner tried to read more than the played arm."""


class InfeasiblePlanSpec(ValueError):
    pass


def derive_seed(*parts: int) -> int:
    """Combine integers into one 64-bit seed (splitmix64 finaliser per part)."""
    h = 0x6A09E667F3BCC909
    for p in parts:
        z = (h + (int(p) & _MASK) * 0x9E3779B97F4A7C15) & _MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        h = z ^ (z >> 31)
    return h


# ------------------------------------------------------------ environments


@dataclass(frozen=True)
class EnvironmentSpec:
    """Per-phase arm means plus a noise model.

    ``reward_means`` has shape (P, K) and ``cost_means`` (P, K, m); row 0 of
    every phase is the void arm and must be zero. For ``piecewise`` the
    ``boundaries`` are the P-1 rounds (1-based) at which a new phase starts.
    For ``drifting`` the phases are anchors placed at round 1, at each
    boundary, and at round T, with linear interpolation in between.
    """

    reward_means: np.ndarray
    cost_means: np.ndarray
    kind: str = "stationary"
    boundaries: tuple = ()
    noise: str = "bernoulli"
    spread: float = 1.0
    shared_noise: bool = False
    seed: int = 0

    def __post_init__(self):
        f = np.asarray(self.reward_means, dtype=np.float64)
        c = np.asarray(self.cost_means, dtype=np.float64)
        if f.ndim == 1:
            f = f[None, :]
        if c.ndim == 1:
            c = c[None, :, None]
        elif c.ndim == 2:
            c = c[:, :, None]
        if c.shape[:2] != f.shape:
            raise ValueError(f"cost means {c.shape} do not match reward means {f.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown environment kind {self.kind!r}; expected one of {KINDS}")
        if self.noise not in NOISE:
            raise ValueError(f"unknown noise model {self.noise!r}; expected one of {NOISE}")
        if np.any((f < 0) | (f > 1)) or np.any((c < 0) | (c > 1)):
            raise ValueError("all means must lie in [0, 1]")
        if np.any(f[:, 0] != 0) or np.any(c[:, 0] != 0):
            raise ValueError("arm 0 is the void arm: its means must be zero")
        if f.shape[1] < 2:
            raise ValueError("need at least one real arm besides the void arm")
        if not 0.0 <= self.spread <= 1.0:
            raise ValueError("spread must lie in [0, 1]")
        b = tuple(int(x) for x in self.boundaries)
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])) or any(x < 1 for x in b):
            raise ValueError(f"phase boundaries must be increasing positive rounds, got {b}")
        P = f.shape[0]
        if self.kind == "stationary" and P != 1:
            raise ValueError("a stationary environment has exactly one phase")
        want = max(P - 2, 0) if self.kind == "drifting" else P - 1
        if len(b) != want:
            raise ValueError(f"{self.kind} with {P} phases needs {want} boundaries, got {len(b)}")
        object.__setattr__(self, "reward_means", f)
        object.__setattr__(self, "cost_means", c)
        object.__setattr__(self, "boundaries", b)

    @property
    def num_arms(self) -> int:
        return self.reward_means.shape[1]

    @property
    def num_resources(self) -> int:
        return self.cost_means.shape[2]

    @property
    def num_phases(self) -> int:
        return self.reward_means.shape[0]


class Environment:
    """An :class:`EnvironmentSpec` laid out over a horizon, plus a stream seed."""

    def __init__(self, spec: EnvironmentSpec, horizon: int, run_seed: int = 0):
        if spec.boundaries and spec.boundaries[-1] > horizon:
            raise ValueError(f"phase boundary {spec.boundaries[-1]} beyond horizon {horizon}")
        self.spec = spec
        self.horizon = int(horizon)
        self.stream = derive_seed(spec.seed, run_seed)
        self._fbar, self._cbar = _lay_out_means(spec, self.horizon)

    @property
    def num_arms(self) -> int:
        return self.spec.num_arms

    @property
    def num_resources(self) -> int:
        return self.spec.num_resources

    @property
    def learner_seed(self) -> int:
        """Seed for the learner's arm sampling; a one-way hash of the stream."""
        return derive_seed(self.stream, LEARNER_SALT)

    def _check_t(self, t: int):
        if not 1 <= t <= self.horizon:
            raise IndexError(f"round {t} outside 1..{self.horizon}")

    def mean_round(self, t: int):
        """Exact means ``(fbar_t (K,), cbar_t (K, m))`` of round ``t``."""
        self._check_t(t)
        return self._fbar[t - 1].copy(), self._cbar[t - 1].copy()

    def mean_profile(self) -> MeanProfile:
        return MeanProfile(self._fbar, self._cbar)

    def sample_block(self, start: int = 1, count: int | None = None):
        """Samples for rounds ``start .. start+count-1``: ``f`` (n, K), ``c`` (n, K, m)."""
        if count is None:
            count = self.horizon - start + 1
        self._check_t(start)
        self._check_t(start + count - 1)
        fbar = self._fbar[start - 1 : start - 1 + count]
        cbar = self._cbar[start - 1 : start - 1 + count]
        if self.spec.kind == "deterministic_adversarial":
            return fbar.copy(), cbar.copy()
        K, m = self.num_arms, self.num_resources
        if self.spec.shared_noise:
            u = kernels.uniform_block(self.stream, count, 1, 1, start - 1)[:, :, 0:1]
            uf, uc = u[:, :, 0], u
        else:
            u = kernels.uniform_block(self.stream, count, K, 1 + m, start - 1)
            uf, uc = u[:, :, 0], u[:, :, 1:]
        return _apply_noise(fbar, uf, self.spec), _apply_noise(cbar, uc, self.spec)

    def sample_round(self, t: int):
        f, c = self.sample_block(t, 1)
        return f[0], c[0]


def _lay_out_means(spec: EnvironmentSpec, T: int):
    f, c = spec.reward_means, spec.cost_means
    P = spec.num_phases
    t = np.arange(1, T + 1)
    if spec.kind == "drifting" and P > 1:
        anchors = np.array([1, *spec.boundaries, T], dtype=np.float64)
        if np.any(np.diff(anchors) <= 0):
            raise ValueError("drifting anchors must be strictly increasing")
        fb = np.stack([np.interp(t, anchors, f[:, k]) for k in range(f.shape[1])], axis=1)
        cb = np.empty((T, c.shape[1], c.shape[2]))
        for k in range(c.shape[1]):
            for i in range(c.shape[2]):
                cb[:, k, i] = np.interp(t, anchors, c[:, k, i])
        return fb, cb
    phase = np.searchsorted(np.asarray(spec.boundaries, dtype=np.int64), t, side="right")
    return f[phase].copy(), c[phase].copy()


def _apply_noise(mean, u, spec: EnvironmentSpec):
    if spec.noise == "bernoulli":
        return (u < mean).astype(np.float64)
    half = spec.spread * np.minimum(mean, 1.0 - mean)
    return mean + half * (2.0 * u - 1.0)


def analytic_mean(noise: str, mean: float, spread: float = 1.0) -> float:
    """Mean of one draw under ``noise``; both models are unbiased by construction."""
    if noise not in NOISE:
        raise ValueError(f"unknown noise model {noise!r}")
    return float(mean)


class BanditFeedback:
    """Read-only view of a run's samples that reveals only the played arm.

    Built before the run from a pre-sampled block; any request for means or
    for a whole round raises :class:`BanditHygieneViolation`.
    """

    __slots__ = ("_f", "_c", "horizon", "num_arms", "num_resources", "reads", "learner_seed")

    def __init__(self, env: Environment):
        self._f, self._c = env.sample_block()
        self.learner_seed = env.learner_seed
        self.horizon = env.horizon
        self.num_arms = env.num_arms
        self.num_resources = env.num_resources
        self.reads = 0

    def play(self, t: int, arm: int):
        """Realised reward and cost vector of ``arm`` at round ``t``."""
        self.reads += 1
        return float(self._f[t - 1, arm]), self._c[t - 1, arm].copy()

    def mean_round(self, t):
        raise BanditHygieneViolation("mean access is not available under bandit feedback")

    def mean_profile(self):
        raise BanditHygieneViolation("mean access is not available under bandit feedback")

    def sample_round(self, t):
        raise BanditHygieneViolation("full-round access is not available under bandit feedback")

    def sample_block(self, *a, **kw):
        raise BanditHygieneViolation("full-round access is not available under bandit feedback")


def hard_pair(T: int, reward: float = 0.5):
    """Two environments that agree on the first half and then diverge.

    In the first, arm 1 pays ``reward`` at cost 1 and the second half is
    worthless; in the second, the second half offers reward 1 at cost 1.
    Without a plan, any learner with budget T/2 must guess how much to spend
    early, so one of the two environments costs it a constant fraction of T.
    """
    half = T // 2
    f_a = np.array([[0.0, reward], [0.0, 0.0]])
    f_b = np.array([[0.0, reward], [0.0, 1.0]])
    c = np.array([[[0.0], [1.0]], [[0.0], [1.0]]])
    mk = lambda f: EnvironmentSpec(f, c, kind="piecewise", boundaries=(half + 1,),
                                   noise="bernoulli")
    return mk(f_a), mk(f_b)


# ------------------------------------------------------------------ plans


@dataclass(frozen=True)
class PlanSpec:
    """Shape of a spending plan.

    Parameters by kind: ``frontloaded``/``backloaded`` take ``halvings``
    (how many times the per-round target halves across the horizon);
    ``spiky`` takes ``factor`` (low rounds get ``rho / (factor T^{1/4})``),
    ``fraction`` of each ``period`` rounds set low, or an explicit ``low``;
    ``custom`` takes ``path`` to an m x T CSV matrix.
    """

    kind: str = "uniform"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise ValueError(f"unknown plan kind {self.kind!r}; expected one of {PLAN_KINDS}")


def _water_fill(profile: np.ndarray, B: float) -> np.ndarray:
    """Scale ``profile`` so it sums to ``B`` with every entry capped at 1."""
    if B > profile.size + 1e-9:
        raise InfeasiblePlanSpec(f"budget {B} exceeds horizon {profile.size}")
    if B == 0:
        return np.zeros_like(profile)
    lo, hi = 0.0, 1.0
    while np.minimum(hi * profile, 1.0).sum() < B:
        hi *= 2.0
        if hi > 1e300:
            raise InfeasiblePlanSpec("profile has too many zero entries to reach the budget")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.minimum(mid * profile, 1.0).sum() < B:
            lo = mid
        else:
            hi = mid
    out = np.minimum(hi * profile, 1.0)
    # absorb the bisection residue in the uncapped entries; scaling keeps them >= 0
    free = out < 1.0
    free_sum = out[free].sum()
    if free_sum > 0:
        out[free] *= (B - (out.size - free.sum())) / free_sum
    return np.minimum(out, 1.0)


def generate_plan(spec: PlanSpec, T: int, m: int, B: float) -> SpendingPlan:
    if T < 1 or m < 1:
        raise InfeasiblePlanSpec("need T >= 1 and m >= 1")
    if B < 0 or B > T:
        raise InfeasiblePlanSpec(f"budget {B} must lie in [0, T={T}]")
    p = spec.params
    rho = B / T
    if spec.kind == "uniform":
        row = np.full(T, rho)
    elif spec.kind in ("frontloaded", "backloaded"):
        halvings = float(p.get("halvings", 1.0))
        prof = 2.0 ** (-halvings * np.arange(T) / max(T - 1, 1))
        if spec.kind == "backloaded":
            prof = prof[::-1]
        row = _water_fill(prof, B)
    elif spec.kind == "spiky":
        row = _spiky_row(T, B, p)
    else:
        return _custom_plan(p, T, m, B)
    plan = np.tile(row, (m, 1))
    try:
        return SpendingPlan(plan)
    except ValueError as exc:
        raise InfeasiblePlanSpec(str(exc)) from exc


def _spiky_row(T, B, p) -> np.ndarray:
    rho = B / T
    period = int(p.get("period", 8))
    fraction = float(p.get("fraction", 0.5))
    if period < 1 or not 0 < fraction < 1:
        raise InfeasiblePlanSpec("spiky plans need period >= 1 and fraction in (0, 1)")
    if "low" in p:
        low = float(p["low"])
    else:
        low = rho / (float(p.get("factor", 2.0)) * T ** 0.25)
    n_low_per = max(1, int(round(fraction * period)))
    if n_low_per >= period:
        raise InfeasiblePlanSpec("spiky plan leaves no high rounds in a period")
    is_low = (np.arange(T) % period) < n_low_per
    n_low = int(is_low.sum())
    n_high = T - n_low
    if n_high == 0:
        raise InfeasiblePlanSpec("spiky plan leaves no high rounds")
    high = (B - n_low * low) / n_high
    if high > 1.0 + 1e-12 or high < low or low < 0:
        raise InfeasiblePlanSpec(
            f"spiky plan infeasible: low={low!r}, high={high!r} (budget {B}, horizon {T})"
        )
    row = np.where(is_low, low, min(high, 1.0))
    row[~is_low] += (B - row.sum()) / n_high
    return row


def _custom_plan(p, T, m, B) -> SpendingPlan:
    path = p.get("path")
    if not path:
        raise InfeasiblePlanSpec("custom plan needs a 'path' to a CSV matrix")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[float(v) for v in r] for r in csv.reader(fh) if r]
    mat = np.array(rows, dtype=np.float64)
    if mat.shape != (m, T):
        raise InfeasiblePlanSpec(f"custom plan {path} has shape {mat.shape}, expected {(m, T)}")
    if np.any(np.abs(mat.sum(axis=1) - B) > 1e-9):
        raise InfeasiblePlanSpec(f"custom plan rows do not sum to B={B}")
    try:
        return SpendingPlan(mat)
    except ValueError as exc:
        raise InfeasiblePlanSpec(str(exc)) from exc


def meta_threshold(T: int, rho: float) -> float:
    """Plans with ``rho_min`` at or below this value call for the meta-procedure."""
    return rho / math.pow(T, 0.25)
