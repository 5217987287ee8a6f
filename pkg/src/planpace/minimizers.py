"""Black-box regret minimizers used as primal and dual subroutines.

Each minimizer follows the same two-call protocol: ``select()`` returns the
current decision and ``update(...)`` consumes the round's feedback. Payoffs
arrive in the range ``[lo, hi]`` given at construction and are mapped to
``[0, 1]`` internally.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import LagrangeVector, Mixture

log = logging.getLogger(__name__)


class ProbabilityUnderflow(ArithmeticError):
    pass


class ClampError(ValueError):
    """Raised in strict mode when a payoff falls outside the configured range."""


@dataclass(frozen=True)
class MinimizerConfig:
    payoff_lo: float
    payoff_hi: float
    horizon_hint: int
    time_varying: bool = True
    gamma: float = 0.0

    def __post_init__(self):
        if not self.payoff_hi > self.payoff_lo:
            raise ValueError(f"empty payoff range [{self.payoff_lo}, {self.payoff_hi}]")
        if self.horizon_hint < 1:
            raise ValueError("horizon_hint must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")

    @property
    def width(self) -> float:
        return self.payoff_hi - self.payoff_lo


@dataclass(frozen=True)
class BallProjectionInput:
    point: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")


class _RangeMixin:
    """Affine map of payoffs to [0, 1] with clamp accounting."""

    lo: float
    hi: float
    strict: bool
    clamp_events: int

    def _rescale(self, payoff):
        x = (np.asarray(payoff, dtype=np.float64) - self.lo) / (self.hi - self.lo)
        # float noise at the range edges is not a clamp event
        bad = (x < -1e-9) | (x > 1 + 1e-9)
        if np.any(bad):
            self.clamp_events += int(np.count_nonzero(bad))
            if self.strict:
                raise ClampError(f"payoff {payoff} outside [{self.lo}, {self.hi}]")
            log.warning("payoff outside [%g, %g] clamped", self.lo, self.hi)
        return np.clip(x, 0.0, 1.0)


# ----------------------------------------------------------------- hedge


def hedge_select(weights) -> Mixture:
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.max()
    return Mixture(w / w.sum())


def hedge_update(weights, payoffs, eta: float, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """One exponentiated-weights step; returns normalised weights."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    x = np.clip((np.asarray(payoffs, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
    logw = np.log(np.asarray(weights, dtype=np.float64)) + eta * x
    return kernels.softmax(logw)


class Hedge(_RangeMixin):
    """Exponentiated weights over K arms with full feedback.

    The fixed rate ``sqrt(8 ln K / T)`` gives regret at most
    ``sqrt(T ln K / 2)`` on payoffs in [0, 1].
    """

    def __init__(self, num_arms: int, lo: float, hi: float, horizon: int, eta=None, strict=False):
        if num_arms < 1:
            raise ValueError("need at least one arm")
        self.K = num_arms
        self.lo, self.hi = float(lo), float(hi)
        self.eta = default_learning_rate("hedge", num_arms, horizon=horizon) if eta is None else float(eta)
        self.logw = np.zeros(num_arms)
        self.strict = strict
        self.clamp_events = 0

    def select(self) -> np.ndarray:
        return kernels.softmax(self.logw)

    def update(self, payoffs) -> None:
        self.logw += self.eta * self._rescale(payoffs)
        # keep the log-weights bounded; softmax is shift invariant
        self.logw -= self.logw.max()


# --------------------------------------------------------------- EXP3-IX


def ix_loss_estimate(probs, arm: int, loss: float, gamma: float) -> np.ndarray:
    """Implicit-exploration loss estimate: ``loss * 1[k == arm] / (p_k + gamma)``."""
    denom = probs[arm] + gamma
    if not denom > 0:
        raise ProbabilityUnderflow(f"p + gamma = {denom} for arm {arm}")
    est = np.zeros(len(probs))
    est[arm] = loss / denom
    return est


class Exp3IX(_RangeMixin):
    """EXP3 with implicit exploration on bandit feedback.

    Anytime schedule: ``eta_t = sqrt(2 ln K / (K t))``, ``gamma_t = eta_t / 2``.
    With ``time_varying=False`` the same formulas use the horizon instead of t.
    """

    def __init__(self, num_arms: int, lo: float, hi: float, horizon: int, time_varying=True, strict=False):
        self.K = num_arms
        self.lo, self.hi = float(lo), float(hi)
        self.horizon = horizon
        self.time_varying = time_varying
        self.cum_loss = np.zeros(num_arms)
        self.t = 0
        self.strict = strict
        self.clamp_events = 0
        self.probs = np.full(num_arms, 1.0 / num_arms)
        self.eta = self.gamma = 0.0

    def _rates(self, t: int):
        return default_learning_rate("exp3ix", self.K, t=t if self.time_varying else self.horizon)

    def select(self) -> np.ndarray:
        self.t += 1
        self.eta, self.gamma = self._rates(self.t)
        self.probs = kernels.softmax(-self.eta * self.cum_loss)
        return self.probs

    def update(self, arm: int, payoff: float) -> None:
        loss = 1.0 - float(self._rescale(payoff))
        self.cum_loss += ix_loss_estimate(self.probs, arm, loss, self.gamma)


@dataclass
class Exp3IXState:
    cum_loss: np.ndarray
    probs: np.ndarray
    t: int
    eta: float
    gamma: float
    lo: float = 0.0
    hi: float = 1.0

    @classmethod
    def initial(cls, K: int, lo=0.0, hi=1.0) -> "Exp3IXState":
        eta, gamma = default_learning_rate("exp3ix", K, t=1)
        return cls(np.zeros(K), np.full(K, 1.0 / K), 1, eta, gamma, lo, hi)


def exp3ix_step(state: Exp3IXState, played_arm: int, observed_payoff: float):
    """Functional EXP3-IX round: apply the estimate, move to t+1, return the next mixture."""
    x = min(max((observed_payoff - state.lo) / (state.hi - state.lo), 0.0), 1.0)
    cum = state.cum_loss + ix_loss_estimate(state.probs, played_arm, 1.0 - x, state.gamma)
    K = cum.size
    eta, gamma = default_learning_rate("exp3ix", K, t=state.t + 1)
    probs = kernels.softmax(-eta * cum)
    new = Exp3IXState(cum, probs, state.t + 1, eta, gamma, state.lo, state.hi)
    return new, Mixture(probs)


# --------------------------------------------------------------- duals


def project_l1_ball(inp: BallProjectionInput) -> np.ndarray:
    return kernels.project_l1_ball(np.asarray(inp.point, dtype=np.float64), float(inp.radius))


def ogd_dual_step(lam: LagrangeVector, gradient, eta_t: float) -> LagrangeVector:
    point = lam.values + eta_t * np.asarray(gradient, dtype=np.float64)
    return LagrangeVector(project_l1_ball(BallProjectionInput(point, lam.radius)), lam.radius)


class ProjectedOGD:
    """Projected online gradient ascent on ``{lam >= 0, |lam|_1 <= D}``.

    Feedback is the gradient of the linear dual reward, i.e. spend minus plan.
    """

    def __init__(self, num_resources: int, radius: float, horizon: int, grad_bound=None, eta=None):
        self.m = num_resources
        self.radius = float(radius)
        self.G = math.sqrt(num_resources) if grad_bound is None else float(grad_bound)
        self.fixed_eta = eta
        self.lam = np.zeros(num_resources)
        self.t = 0

    def eta(self, t: int) -> float:
        if self.fixed_eta is not None:
            return float(self.fixed_eta)
        return default_learning_rate("ogd", radius=self.radius, grad_bound=self.G, t=t)

    def select(self) -> np.ndarray:
        return self.lam

    def update(self, gradient) -> None:
        self.t += 1
        step = self.lam + self.eta(self.t) * np.asarray(gradient, dtype=np.float64)
        self.lam = kernels.project_l1_ball(step, self.radius)


class EntropicDual:
    """Hedge over the ball's vertices ``{0, D e_1, ..., D e_m}``.

    The slack coordinate is the zero vector; the decision is ``D * p[:m]``.
    """

    def __init__(self, num_resources: int, radius: float, horizon: int, eta=None):
        self.m = num_resources
        self.radius = float(radius)
        self.eta = default_learning_rate("hedge", num_resources + 1, horizon=horizon) if eta is None else eta
        self.logw = np.zeros(num_resources + 1)

    def select(self) -> np.ndarray:
        return self.radius * kernels.softmax(self.logw)[: self.m]

    def update(self, gradient) -> None:
        g = np.asarray(gradient, dtype=np.float64)
        # vertex payoffs D*g_i in [-D, D]; slack vertex earns 0
        payoff = np.append(self.radius * g, 0.0)
        self.logw += self.eta * (payoff + self.radius) / (2 * self.radius)
        self.logw -= self.logw.max()


def make_dual(kind: str, num_resources: int, radius: float, horizon: int, **kw):
    if kind == "euclidean":
        return ProjectedOGD(num_resources, radius, horizon, **kw)
    if kind == "entropic":
        return EntropicDual(num_resources, radius, horizon, **kw)
    raise ValueError(f"unknown dual kind {kind!r}")


# ---------------------------------------------------------- learning rates


def default_learning_rate(kind: str, n: int | None = None, *, radius=None, grad_bound=None,
                          width=None, horizon=None, t=None):
    """Default step sizes.

    hedge:  ``sqrt(8 ln n / horizon)``
    ogd:    ``radius / (G sqrt(t))`` with ``G = grad_bound`` or ``sqrt(n) * max(1, width)``
    exp3ix: ``(eta_t, gamma_t) = (sqrt(2 ln n / (n t)), eta_t / 2)``
    """
    if kind == "hedge":
        return math.sqrt(8.0 * math.log(n) / horizon)
    if kind == "ogd":
        G = grad_bound if grad_bound is not None else math.sqrt(n) * max(1.0, width)
        return radius / (G * math.sqrt(t))
    if kind == "exp3ix":
        eta = math.sqrt(2.0 * math.log(n) / (n * t))
        return eta, eta / 2.0
    raise ValueError(f"unknown learning-rate kind {kind!r}")


# ------------------------------------------------- regret bounds on [0, 1]


def hedge_regret_bound(K: int, T: int) -> float:
    return math.sqrt(T * math.log(K) / 2.0)


def ogd_regret_bound(m: int, T: int, radius: float = 1.0, grad_bound=None) -> float:
    G = math.sqrt(m) if grad_bound is None else grad_bound
    return 1.5 * radius * G * math.sqrt(T)


def exp3ix_regret_bound(K: int, T: int, delta_p: float) -> float:
    """High-probability EXP3-IX bound for losses in [0, 1] (Neu, 2015 form)."""
    return 2.0 * math.sqrt(2.0 * K * T * math.log(K)) + (
        math.sqrt(2.0 * K * T / math.log(K)) + 1.0
    ) * math.log(2.0 / delta_p)
