import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planpace.core import (
    DegenerateDimensions,
    EntryOutOfRange,
    Instance,
    LagrangeVector,
    Mixture,
    PlanRowSumMismatch,
    RunTrace,
    ScaledCostOutOfRange,
    SpendingPlan,
    normalize_budgets,
    read_trace_csv,
    should_force_void,
    stop_time,
    update_budget,
    validate_instance,
)


def test_uniform_plan_basic_properties():
    plan = SpendingPlan.uniform(10, 2, 0.3)
    assert plan.horizon == 10 and plan.num_resources == 2
    assert plan.budget == pytest.approx(3.0)
    assert plan.rho == pytest.approx(0.3)
    assert plan.rho_min == pytest.approx(0.3)
    assert plan.entry(1, 4) == pytest.approx(0.3)


def test_plan_entries_are_read_only():
    plan = SpendingPlan.uniform(4, 1, 0.5)
    with pytest.raises(ValueError):
        plan.entries[0, 0] = 0.1


def test_plan_rejects_out_of_range_entry_with_index():
    with pytest.raises(EntryOutOfRange) as exc:
        SpendingPlan(np.array([[0.2, 1.5, 0.1]]))
    assert exc.value.index == (0, 1)


def test_plan_rejects_mismatched_rows():
    with pytest.raises(PlanRowSumMismatch) as exc:
        SpendingPlan(np.array([[0.5, 0.5], [0.5, 0.4]]))
    assert exc.value.index == 1


def test_plan_rejects_empty():
    with pytest.raises(DegenerateDimensions):
        SpendingPlan(np.zeros((1, 0)))


def test_scaled_plan_keeps_shape():
    plan = SpendingPlan.uniform(8, 1, 0.5).scaled(0.5)
    assert plan.budget == pytest.approx(2.0)


def test_validate_instance_checks_budget_and_arms():
    plan = SpendingPlan.uniform(5, 1, 0.2)
    inst = Instance.from_plan(plan, 3)
    assert validate_instance(inst) is inst
    with pytest.raises(PlanRowSumMismatch):
        validate_instance(Instance(5, 3, 1, 2.0, plan))
    with pytest.raises(DegenerateDimensions):
        validate_instance(Instance(5, 1, 1, 1.0, plan))
    with pytest.raises(DegenerateDimensions):
        validate_instance(Instance(6, 3, 1, 1.0, plan))


def test_mixture_validation_and_expectation():
    mix = Mixture(np.array([0.25, 0.75]))
    assert mix.expect(np.array([0.0, 1.0])) == pytest.approx(0.75)
    np.testing.assert_allclose(mix.expect(np.array([[0.0, 0.0], [1.0, 2.0]])), [0.75, 1.5])
    assert Mixture.void(3).probs.tolist() == [1.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        Mixture(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        Mixture(np.array([1.2, -0.2]))


def test_lagrange_vector_ball():
    LagrangeVector(np.array([1.0, 1.0]), 2.0)
    with pytest.raises(ValueError):
        LagrangeVector(np.array([1.5, 1.0]), 2.0)
    with pytest.raises(ValueError):
        LagrangeVector(np.array([-0.1]), 2.0)
    assert LagrangeVector.zeros(3, 1.0).values.sum() == 0


def test_normalize_budgets_rescales_to_smallest():
    costs = np.array([[0.0, 0.0], [0.5, 1.0]])
    scaled, B = normalize_budgets([10.0, 20.0], costs)
    assert B == 10.0
    np.testing.assert_allclose(scaled, [[0.0, 0.0], [0.5, 0.5]])
    with pytest.raises(ScaledCostOutOfRange):
        normalize_budgets([10.0, 20.0], np.array([[2.0, 0.0]]))
    with pytest.raises(ValueError):
        normalize_budgets([0.0], np.zeros((1, 1)))


def test_force_void_is_non_strict_at_one():
    assert not should_force_void([1.0, 3.0])
    assert should_force_void([0.999, 3.0])
    np.testing.assert_allclose(update_budget([2.0, 1.0], [0.5, 0.25]), [1.5, 0.75])


def test_stop_time():
    rem = np.array([[3.0], [2.0], [0.9], [0.9]])
    assert stop_time(rem) == 3
    assert stop_time(np.array([[5.0], [4.0]])) == 2


def _tiny_trace():
    T, K, m = 3, 2, 1
    mix = np.zeros((T, K))
    mix[:, 1] = 1
    return RunTrace(
        budget=2.0, radius=4.0, mixtures=mix, arms=np.array([1, 1, 0]), rewards=np.array([0.5, 0.25, 0.0]),
        costs=np.array([[0.75], [0.5], [0.0]]), remaining=np.array([[1.25], [0.75], [0.75]]),
        lambdas=np.array([[0.0], [0.1], [0.2]]), forced_void=np.array([False, False, True]), tau=2,
    )


def test_trace_roundtrip_and_outcomes(tmp_path):
    tr = _tiny_trace()
    assert tr.total_reward == pytest.approx(0.75)
    np.testing.assert_allclose(tr.start_budgets()[:, 0], [2.0, 1.25, 0.75])
    np.testing.assert_allclose(tr.cumulative_spend()[:, 0], [0.75, 1.25, 1.25])
    out = tr.outcome(3)
    assert out.forced_void and out.arm == 0 and out.t == 3
    path = tmp_path / "t.csv"
    text = tr.to_csv(path)
    assert text.splitlines()[0].startswith("t,arm,forced_void,reward,cost_0")
    cols = read_trace_csv(path)
    np.testing.assert_allclose(cols["cum_reward"], [0.5, 0.75, 0.75])
    np.testing.assert_allclose(cols["lambda_0"], [0.0, 0.1, 0.2])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30))
def test_any_valid_row_makes_a_plan(row):
    plan = SpendingPlan(np.array([row]))
    assert plan.budget == pytest.approx(sum(row))
    assert plan.rho_min == min(row)
