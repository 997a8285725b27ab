import numpy as np
import pytest

from bicausal_ot.common.rng import STREAM_TREE_X, STREAM_TREE_Y, make_rng, repetition_seed
from bicausal_ot.core.bicausal import (
    MAX_TREE_HORIZON,
    BicausalError,
    SinkhornConvergenceError,
    backward_lp_value,
    nested_sinkhorn_value,
)
from bicausal_ot.core.discrete_ot import exact_ot, sinkhorn
from bicausal_ot.core.oracle import exact_value
from bicausal_ot.core.process import GaussianAR1, StageCost
from bicausal_ot.core.quantization import ScenarioTree, build_tree

EPSILON_GRID = (1.0, 0.1, 0.01, 0.001)


def _one_step_tree(root, children, probs):
    return ScenarioTree(
        1, 2, (np.array([[root]]), np.array(children, dtype=float)[:, None]), (np.array([probs]),)
    )


def _random_pair(seed, T, S=40):
    modelX = GaussianAR1(1.0, 1.0, horizon=T)
    modelY = GaussianAR1(2.0, 0.25, horizon=T)
    return (
        build_tree(modelX, T, S, make_rng(seed, STREAM_TREE_X)),
        build_tree(modelY, T, S, make_rng(seed, STREAM_TREE_Y)),
    )


def _mirror(tree):
    """逐层反转节点顺序，得到同一棵树的另一种编号。"""
    states = tuple(level[::-1] for level in tree.states)
    probs = tuple(level[::-1, ::-1] for level in tree.child_probs)
    return ScenarioTree(tree.horizon, tree.branching, states, probs)


def test_identical_trees_have_zero_value(rng):
    tree = build_tree(GaussianAR1(0.0, 1.0, horizon=3), 3, 50, rng)
    result = backward_lp_value(tree, tree)
    assert result.value == pytest.approx(0.0, abs=1e-12)
    assert len(result.table) == 4


def test_one_step_hand_example():
    treeX = _one_step_tree(0.0, [0.0, 2.0], [0.5, 0.5])
    treeY = _one_step_tree(0.0, [1.0, 3.0], [0.5, 0.5])
    assert backward_lp_value(treeX, treeY).value == pytest.approx(1.0)


def test_one_step_reduces_to_single_exact_ot(rng):
    for seed in range(5):
        treeX, treeY = _random_pair(seed, 1)
        cost = (treeX.states[1][:, 0][:, None] - treeY.states[1][:, 0][None, :]) ** 2
        expected = exact_ot(cost, treeX.child_probs[0][0], treeY.child_probs[0][0]).value
        assert backward_lp_value(treeX, treeY).value == pytest.approx(expected, abs=1e-12)


def test_root_state_cost_is_excluded():
    treeX = _one_step_tree(0.0, [1.0, 1.0], [0.5, 0.5])
    treeY = _one_step_tree(10.0, [1.0, 1.0], [0.5, 0.5])
    assert backward_lp_value(treeX, treeY).value == pytest.approx(0.0)


def test_table_shapes_and_leaf_layer(rng):
    treeX, treeY = _random_pair(3, 3)
    table = backward_lp_value(treeX, treeY).table
    for t in range(4):
        assert table[t].shape == (2**t, 2**t)
    leaf_cost = (treeX.states[3][:, 0][:, None] - treeY.states[3][:, 0][None, :]) ** 2
    np.testing.assert_allclose(table[3], leaf_cost)


def test_value_is_symmetric_and_permutation_invariant():
    treeX, treeY = _random_pair(11, 3)
    value = backward_lp_value(treeX, treeY).value
    assert backward_lp_value(treeY, treeX).value == pytest.approx(value, abs=1e-10)
    assert backward_lp_value(_mirror(treeX), treeY).value == pytest.approx(value, abs=1e-10)
    assert backward_lp_value(treeX, _mirror(treeY)).value == pytest.approx(value, abs=1e-10)


def test_value_grows_with_horizon():
    values = []
    for T in range(1, 6):
        treeX, treeY = _random_pair(21, T)
        values.append(backward_lp_value(treeX, treeY).value)
    for shorter, longer in zip(values, values[1:]):
        assert longer >= shorter - 1e-12


def test_wider_branching_uses_general_solver(rng):
    model = GaussianAR1(0.0, 1.0, horizon=2)
    tree = build_tree(model, 2, 90, rng, branching=3, partition="quantile")
    other = build_tree(GaussianAR1(0.5, 1.0, horizon=2), 2, 90, rng, branching=3, partition="quantile")
    assert backward_lp_value(tree, tree).value == pytest.approx(0.0, abs=1e-12)
    assert backward_lp_value(tree, other).value > 0.0


def test_custom_stage_cost(rng):
    treeX, treeY = _random_pair(4, 2)
    doubled = StageCost(lambda t, x, y: 2.0 * np.sum((x - y) ** 2, axis=-1), "double")
    base = backward_lp_value(treeX, treeY).value
    assert backward_lp_value(treeX, treeY, doubled).value == pytest.approx(2.0 * base)


def test_mismatched_trees_are_rejected(rng):
    treeX, _ = _random_pair(1, 2)
    _, treeY = _random_pair(1, 3)
    with pytest.raises(BicausalError, match="期数不一致"):
        backward_lp_value(treeX, treeY)
    wide = build_tree(GaussianAR1(0.0, 1.0, horizon=2), 2, 30, rng, branching=3, partition="quantile")
    with pytest.raises(BicausalError, match="分叉数不一致"):
        nested_sinkhorn_value(treeX, wide)


def test_horizon_cap_is_enforced():
    T = MAX_TREE_HORIZON + 1
    states = tuple(np.zeros((2**t, 1)) for t in range(T + 1))
    probs = tuple(np.full((2**t, 2), 0.5) for t in range(T))
    tree = ScenarioTree(T, 2, states, probs)
    with pytest.raises(BicausalError, match="超过树方法上限"):
        backward_lp_value(tree, tree)


def test_nested_one_step_is_single_sinkhorn():
    treeX, treeY = _random_pair(8, 1)
    cost = (treeX.states[1][:, 0][:, None] - treeY.states[1][:, 0][None, :]) ** 2
    expected = sinkhorn(cost, treeX.child_probs[0][0], treeY.child_probs[0][0], epsilon=0.1, tol=1e-10)
    result = nested_sinkhorn_value(treeX, treeY, epsilon=0.1, tol=1e-10)
    assert result.value == pytest.approx(expected.value, abs=1e-7)
    assert result.linear_value == pytest.approx(expected.linear_value, abs=1e-7)


def test_nested_dominates_exact_and_converges_to_it():
    for seed in range(20):
        treeX, treeY = _random_pair(100 + seed, 1 + seed % 2)
        exact = backward_lp_value(treeX, treeY).value
        values = [
            nested_sinkhorn_value(treeX, treeY, epsilon=eps, tol=1e-9, max_iter=100_000).value
            for eps in EPSILON_GRID
        ]
        for value in values:
            assert value >= exact - 1e-6
        for larger, smaller in zip(values, values[1:]):
            assert smaller <= larger + 1e-6
        assert abs(values[-1] - exact) <= 0.02 * (1.0 + exact)


def test_nested_linear_part_lies_between_exact_and_entropic():
    treeX, treeY = _random_pair(5, 2)
    exact = backward_lp_value(treeX, treeY).value
    result = nested_sinkhorn_value(treeX, treeY, epsilon=0.5, tol=1e-10)
    assert exact - 1e-9 <= result.linear_value <= result.value + 1e-9
    assert result.epsilon == 0.5
    assert result.linear_table[0].shape == (1, 1)


def test_nested_reports_first_unconverged_pair():
    treeX = build_tree(GaussianAR1(1.0, 1.0, horizon=2), 2, 90, make_rng(6, STREAM_TREE_X), branching=3, partition="quantile")
    treeY = build_tree(GaussianAR1(2.0, 0.25, horizon=2), 2, 90, make_rng(6, STREAM_TREE_Y), branching=3, partition="quantile")
    with pytest.raises(SinkhornConvergenceError) as excinfo:
        nested_sinkhorn_value(treeX, treeY, epsilon=1e-3, tol=1e-14, max_iter=1)
    error = excinfo.value
    assert error.depth == 1
    assert (error.nx, error.ny) == (0, 0)
    assert error.iterations == 1


@pytest.mark.slow
def test_tree_lp_tracks_gaussian_value():
    for T in range(1, 9):
        modelX = GaussianAR1(1.0, 1.0, horizon=T)
        modelY = GaussianAR1(2.0, 0.25, horizon=T)
        estimates = []
        for rep in range(10):
            seed = repetition_seed(0, rep)
            treeX = build_tree(modelX, T, 1000, make_rng(seed, STREAM_TREE_X), partition="moment")
            treeY = build_tree(modelY, T, 1000, make_rng(seed, STREAM_TREE_Y), partition="moment")
            estimates.append(backward_lp_value(treeX, treeY).value)
        actual = exact_value([1.0], [2.0], [[1.0]], [[0.25]], T)
        assert abs(np.mean(estimates) - actual) <= 0.15 * actual
