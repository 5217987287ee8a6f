import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from planpace.core import LagrangeVector
from planpace.minimizers import (
    BallProjectionInput,
    ClampError,
    EntropicDual,
    Exp3IX,
    Exp3IXState,
    Hedge,
    MinimizerConfig,
    ProbabilityUnderflow,
    ProjectedOGD,
    default_learning_rate,
    exp3ix_regret_bound,
    exp3ix_step,
    hedge_regret_bound,
    hedge_select,
    hedge_update,
    ix_loss_estimate,
    make_dual,
    ogd_dual_step,
    ogd_regret_bound,
    project_l1_ball,
)


def test_hedge_starts_uniform_and_moves_toward_better_arm():
    h = Hedge(3, 0.0, 1.0, 100)
    np.testing.assert_allclose(h.select(), [1 / 3] * 3)
    for _ in range(50):
        h.update([0.0, 1.0, 0.5])
    p = h.select()
    assert p.argmax() == 1 and p.sum() == pytest.approx(1.0)


def test_hedge_rate_and_closed_form_weights():
    K, T = 4, 400
    h = Hedge(K, -1.0, 3.0, T)
    assert h.eta == pytest.approx(math.sqrt(8 * math.log(K) / T))
    pays = np.array([[-1.0, 0.0, 1.0, 3.0], [3.0, 3.0, -1.0, 1.0]])
    for p in pays:
        h.update(p)
    x = ((pays - (-1.0)) / 4.0).sum(axis=0)
    expect = np.exp(h.eta * x) / np.exp(h.eta * x).sum()
    np.testing.assert_allclose(h.select(), expect, rtol=1e-12)


def test_functional_hedge_matches_class():
    h = Hedge(3, 0.0, 1.0, 50)
    w = np.ones(3) / 3
    rng = np.random.default_rng(0)
    for _ in range(20):
        pay = rng.uniform(size=3)
        h.update(pay)
        w = hedge_update(w, pay, h.eta)
    np.testing.assert_allclose(hedge_select(w).probs, h.select(), rtol=1e-10)
    with pytest.raises(ValueError):
        hedge_update(w, [0, 0, 0], 0.0)


def test_clamp_events_counted_and_strict_raises():
    h = Hedge(2, 0.0, 1.0, 10)
    h.update([1.5, 0.5])
    assert h.clamp_events == 1
    h.update([1.0 + 1e-12, 0.0])  # float noise at the edge is not a clamp
    assert h.clamp_events == 1
    with pytest.raises(ClampError):
        Hedge(2, 0.0, 1.0, 10, strict=True).update([-0.5, 0.5])


def test_ix_loss_estimate():
    est = ix_loss_estimate(np.array([0.25, 0.75]), 0, 0.5, 0.25)
    np.testing.assert_allclose(est, [1.0, 0.0])
    with pytest.raises(ProbabilityUnderflow):
        ix_loss_estimate(np.array([0.0, 1.0]), 0, 1.0, 0.0)


def test_exp3ix_functional_matches_class():
    K = 3
    ex = Exp3IX(K, 0.0, 1.0, 100)
    state = Exp3IXState.initial(K)
    rng = np.random.default_rng(1)
    p = ex.select()
    np.testing.assert_allclose(p, state.probs)
    for _ in range(30):
        arm = int(rng.integers(K))
        pay = float(rng.uniform())
        ex.update(arm, pay)
        state, mix = exp3ix_step(state, arm, pay)
        np.testing.assert_allclose(ex.select(), mix.probs, rtol=1e-12)
    assert ex.gamma == pytest.approx(ex.eta / 2)


def test_exp3ix_concentrates_on_good_arm():
    ex = Exp3IX(4, 0.0, 1.0, 3000)
    rng = np.random.default_rng(2)
    means = np.array([0.1, 0.8, 0.2, 0.3])
    for _ in range(3000):
        p = ex.select()
        arm = int(rng.choice(4, p=p))
        ex.update(arm, float(rng.uniform() < means[arm]))
    assert ex.select()[1] > 0.8


def test_minimizer_config_width():
    cfg = MinimizerConfig(-2.0, 3.0, 10)
    assert cfg.width == 5.0
    with pytest.raises(ValueError):
        MinimizerConfig(1.0, 1.0, 10)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(-5, 5)), st.floats(0.1, 5))
def test_projection_lands_in_ball_and_is_nearest(point, radius):
    proj = project_l1_ball(BallProjectionInput(point, radius))
    assert np.all(proj >= 0)
    assert proj.sum() <= radius + 1e-9
    # idempotent on its own output
    np.testing.assert_allclose(project_l1_ball(BallProjectionInput(proj, radius)), proj, atol=1e-12)
    # no random point of the ball is closer
    rng = np.random.default_rng(0)
    cand = rng.dirichlet(np.ones(point.size + 1), size=200)[:, : point.size] * radius
    d_best = np.linalg.norm(point - proj)
    assert np.all(np.linalg.norm(cand - point, axis=1) >= d_best - 1e-9)


def test_projection_known_values():
    np.testing.assert_allclose(project_l1_ball(BallProjectionInput(np.array([3.0, 1.0]), 2.0)), [2.0, 0.0])
    np.testing.assert_allclose(project_l1_ball(BallProjectionInput(np.array([1.5, 1.5]), 2.0)), [1.0, 1.0])
    np.testing.assert_allclose(project_l1_ball(BallProjectionInput(np.array([-1.0, 0.5]), 2.0)), [0.0, 0.5])


def test_ogd_step_rate_and_projection():
    ogd = ProjectedOGD(2, 4.0, 100)
    assert ogd.G == pytest.approx(math.sqrt(2))
    assert ogd.eta(4) == pytest.approx(4.0 / (math.sqrt(2) * 2))
    ogd.update([1.0, -1.0])
    eta1 = 4.0 / math.sqrt(2)
    np.testing.assert_allclose(ogd.select(), [eta1, 0.0])
    ogd_fixed = ProjectedOGD(1, 1.0, 10, eta=0.3)
    ogd_fixed.update([1.0])
    ogd_fixed.update([1.0])
    np.testing.assert_allclose(ogd_fixed.select(), [0.6])


def test_ogd_dual_step_returns_lagrange_vector():
    lam = ogd_dual_step(LagrangeVector.zeros(2, 1.0), [5.0, 5.0], 1.0)
    np.testing.assert_allclose(lam.values, [0.5, 0.5])


def test_entropic_dual_stays_in_ball_and_favours_positive_gradient():
    d = EntropicDual(2, 3.0, 500)
    for _ in range(500):
        d.update([0.5, -0.5])
        lam = d.select()
        assert np.all(lam >= 0) and lam.sum() <= 3.0 + 1e-12
    assert lam[0] > 2.5
    assert isinstance(make_dual("entropic", 2, 1.0, 10), EntropicDual)
    with pytest.raises(ValueError):
        make_dual("mirror", 2, 1.0, 10)


def test_default_learning_rates():
    assert default_learning_rate("hedge", 4, horizon=100) == pytest.approx(math.sqrt(8 * math.log(4) / 100))
    # the generic gradient bound includes the payoff width
    assert default_learning_rate("ogd", 2, radius=2.0, width=3.0, t=4) == pytest.approx(2.0 / (math.sqrt(2) * 3 * 2))
    eta, gamma = default_learning_rate("exp3ix", 5, t=10)
    assert eta == pytest.approx(math.sqrt(2 * math.log(5) / 50)) and gamma == pytest.approx(eta / 2)
    with pytest.raises(ValueError):
        default_learning_rate("adam")


def test_regret_bound_values():
    # frozen closed-form values
    assert hedge_regret_bound(2, 10_000) == pytest.approx(58.87050112577373)
    assert ogd_regret_bound(1, 10_000, radius=4.0) == pytest.approx(600.0)
    assert exp3ix_regret_bound(4, 5000, 0.05) == pytest.approx(
        2 * math.sqrt(2 * 4 * 5000 * math.log(4)) + (math.sqrt(2 * 4 * 5000 / math.log(4)) + 1) * math.log(40)
    )
