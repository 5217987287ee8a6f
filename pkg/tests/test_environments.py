import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planpace.environments import (
    BanditFeedback,
    BanditHygieneViolation,
    Environment,
    EnvironmentSpec,
    InfeasiblePlanSpec,
    PlanSpec,
    analytic_mean,
    derive_seed,
    generate_plan,
    hard_pair,
    meta_threshold,
)
from planpace.oracles import opt_dynamic
from planpace.core import SpendingPlan

FM = [[0, 0.7, 0.2]]
CM = [[0, 0.4, 0.1]]


def test_same_seed_same_samples_different_run_seed_differs():
    spec = EnvironmentSpec(FM, CM, seed=3)
    a = Environment(spec, 50, run_seed=1).sample_block()
    b = Environment(spec, 50, run_seed=1).sample_block()
    c = Environment(spec, 50, run_seed=2).sample_block()
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert not np.array_equal(a[0], c[0])


def test_blocks_and_rounds_agree():
    env = Environment(EnvironmentSpec(FM, CM, noise="uniform", spread=0.5, seed=9), 40)
    F, C = env.sample_block()
    f2, c2 = env.sample_block(11, 5)
    np.testing.assert_array_equal(F[10:15], f2)
    np.testing.assert_array_equal(C[10:15], c2)
    f, c = env.sample_round(40)
    np.testing.assert_array_equal(F[39], f)
    with pytest.raises(IndexError):
        env.sample_round(41)


@pytest.mark.parametrize("noise", ["bernoulli", "uniform"])
def test_empirical_means_match(noise):
    T = 40_000
    env = Environment(EnvironmentSpec(FM, CM, noise=noise, spread=1.0, seed=1), T)
    F, C = env.sample_block()
    # 5 standard errors at most 0.5 / sqrt(T)
    tol = 5 * 0.5 / np.sqrt(T)
    np.testing.assert_allclose(F.mean(axis=0), FM[0], atol=tol)
    np.testing.assert_allclose(C.mean(axis=0)[:, 0], CM[0], atol=tol)
    assert np.all((F >= 0) & (F <= 1)) and np.all((C >= 0) & (C <= 1))
    assert F[:, 0].max() == 0 and C[:, 0].max() == 0
    assert analytic_mean(noise, 0.3) == 0.3
    if noise == "bernoulli":
        assert set(np.unique(F)) <= {0.0, 1.0}


def test_shared_noise_scales_every_entry_by_one_factor():
    env = Environment(EnvironmentSpec([[0, 0.5, 0.2]], [[0, 0.5, 0.1]], noise="uniform", spread=0.25,
                                      shared_noise=True, seed=2), 200)
    F, C = env.sample_block()
    ratio_f = F[:, 1:] / np.array([0.5, 0.2])
    ratio_c = C[:, 1:, 0] / np.array([0.5, 0.1])
    np.testing.assert_allclose(ratio_f, np.repeat(ratio_f[:, :1], 2, axis=1))
    np.testing.assert_allclose(ratio_c, ratio_f)
    assert ratio_f.min() >= 0.75 - 1e-12 and ratio_f.max() <= 1.25 + 1e-12


def test_piecewise_and_drifting_layouts():
    f = [[0, 0.8], [0, 0.2]]
    c = [[0, 0.5], [0, 0.5]]
    pw = Environment(EnvironmentSpec(f, c, kind="piecewise", boundaries=(4,)), 6)
    assert pw.mean_round(3)[0][1] == 0.8 and pw.mean_round(4)[0][1] == 0.2
    dr = Environment(EnvironmentSpec(f, c, kind="drifting"), 5)
    np.testing.assert_allclose(dr.mean_profile().fbar[:, 1], [0.8, 0.65, 0.5, 0.35, 0.2])


def test_deterministic_adversarial_returns_means():
    spec = EnvironmentSpec([[0, 0.3], [0, 0.9]], [[0, 0.2], [0, 0.6]], kind="deterministic_adversarial",
                           boundaries=(2,))
    F, C = Environment(spec, 3).sample_block()
    np.testing.assert_array_equal(F[:, 1], [0.3, 0.9, 0.9])
    np.testing.assert_array_equal(C[:, 1, 0], [0.2, 0.6, 0.6])


def test_environment_settings_are_validated():
    with pytest.raises(ValueError):
        EnvironmentSpec([[0.1, 0.5]], [[0, 0.5]])
    with pytest.raises(ValueError):
        EnvironmentSpec([[0, 1.5]], [[0, 0.5]])
    with pytest.raises(ValueError):
        EnvironmentSpec([[0, 0.5], [0, 0.4]], [[0, 0.5], [0, 0.5]])  # stationary with two phases
    with pytest.raises(ValueError):
        EnvironmentSpec(FM, CM, noise="gaussian")
    with pytest.raises(ValueError):
        EnvironmentSpec([[0, 0.5], [0, 0.4]], [[0, 0.5], [0, 0.5]], kind="piecewise", boundaries=(3, 2))
    with pytest.raises(ValueError):
        Environment(EnvironmentSpec([[0, 0.5], [0, 0.4]], [[0, 0.5], [0, 0.5]], kind="piecewise",
                                    boundaries=(9,)), 5)


def test_bandit_feedback_reveals_only_the_played_arm():
    env = Environment(EnvironmentSpec(FM, CM, seed=4), 10)
    F, C = env.sample_block()
    fb = BanditFeedback(env)
    r, c = fb.play(3, 1)
    assert r == F[2, 1] and c[0] == C[2, 1, 0]
    assert fb.reads == 1
    for call in (lambda: fb.mean_round(1), fb.mean_profile, lambda: fb.sample_round(1), fb.sample_block):
        with pytest.raises(BanditHygieneViolation):
            call()
    with pytest.raises(AttributeError):
        fb.extra = 1  # no side channel can be attached


def test_hard_pair_agrees_then_diverges():
    T = 20
    a, b = hard_pair(T)
    ea, eb = Environment(a, T), Environment(b, T)
    np.testing.assert_array_equal(ea.mean_profile().fbar[:10], eb.mean_profile().fbar[:10])
    plan = SpendingPlan.uniform(T, 1, 0.5)
    va, _ = opt_dynamic(ea.mean_profile(), plan)
    vb, _ = opt_dynamic(eb.mean_profile(), plan)
    assert va == pytest.approx(2.5) and vb == pytest.approx(7.5)


def test_derive_seed_is_stable():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(2, 1)
    assert 0 <= derive_seed(-5) < 2**64


@pytest.mark.parametrize("kind", ["uniform", "frontloaded", "backloaded", "spiky"])
def test_generated_plans_hit_the_budget(kind):
    T, m, B = 64, 2, 20.0
    plan = generate_plan(PlanSpec(kind), T, m, B)
    assert plan.entries.shape == (m, T)
    np.testing.assert_allclose(plan.entries.sum(axis=1), B, atol=1e-9)
    assert plan.entries.max() <= 1.0


def test_frontloaded_plan_is_decreasing_and_spiky_has_small_entries():
    front = generate_plan(PlanSpec("frontloaded", {"halvings": 2}), 100, 1, 30).entries[0]
    assert np.all(np.diff(front) <= 1e-12) and front[0] == pytest.approx(4 * front[-1])
    back = generate_plan(PlanSpec("backloaded", {"halvings": 2}), 100, 1, 30).entries[0]
    np.testing.assert_allclose(back, front[::-1])
    T, rho = 4096, 0.125
    spiky = generate_plan(PlanSpec("spiky"), T, 1, rho * T)
    assert spiky.rho_min == pytest.approx(rho / (2 * T**0.25))
    explicit = generate_plan(PlanSpec("spiky", {"low": 0.001}), T, 1, rho * T)
    assert explicit.rho_min == pytest.approx(0.001)


def test_plan_errors(tmp_path):
    with pytest.raises(InfeasiblePlanSpec):
        generate_plan(PlanSpec("uniform"), 10, 1, 20.0)
    with pytest.raises(InfeasiblePlanSpec):
        generate_plan(PlanSpec("spiky", {"low": 0.99}), 16, 1, 15.0)
    with pytest.raises(InfeasiblePlanSpec):
        generate_plan(PlanSpec("custom"), 4, 1, 1.0)
    with pytest.raises(ValueError):
        PlanSpec("wavy")
    p = tmp_path / "plan.csv"
    p.write_text("0.5,0.25,0.25\n0.25,0.5,0.25\n")
    plan = generate_plan(PlanSpec("custom", {"path": str(p)}), 3, 2, 1.0)
    assert plan.entries[1, 1] == 0.5
    with pytest.raises(InfeasiblePlanSpec):
        generate_plan(PlanSpec("custom", {"path": str(p)}), 3, 2, 2.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 300), st.floats(0.0, 1.0), st.floats(0.1, 4.0))
def test_water_filled_plans_are_valid(T, rho, halvings):
    plan = generate_plan(PlanSpec("frontloaded", {"halvings": halvings}), T, 1, rho * T)
    assert plan.entries.max() <= 1.0
    assert plan.budget == pytest.approx(rho * T, abs=1e-8)


def test_meta_threshold():
    assert meta_threshold(4096, 0.125) == pytest.approx(0.125 / 8)
