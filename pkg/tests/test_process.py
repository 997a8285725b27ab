import numpy as np
import pytest

from bicausal_ot.core.process import (
    GaussianAR1,
    Path,
    ProcessError,
    SamplerProcess,
    StageCost,
    path_cost,
    sample_path,
    sample_product_batch,
    sample_product_paths,
)


def test_zero_noise_path_is_constant(rng):
    model = GaussianAR1(1.0, 0.0, horizon=3)
    path = sample_path(model, rng)
    assert len(path) == 4
    np.testing.assert_array_equal(path.values[:, 0], [1.0, 1.0, 1.0, 1.0])


def test_one_step_moments(rng):
    model = GaussianAR1(0.0, 1.0, horizon=1)
    x1 = model.sample_paths(1_000_000, rng)[:, 1, 0]
    assert abs(x1.mean()) < 0.01
    assert abs(x1.var() - 1.0) < 0.01


def test_diagonal_covariance_increments(rng):
    model = GaussianAR1([0.0, 0.0], np.diag([4.0, 9.0]), horizon=1)
    paths = model.sample_paths(1_000_000, rng)
    increments = paths[:, 1, :] - paths[:, 0, :]
    np.testing.assert_allclose(np.cov(increments.T), np.diag([4.0, 9.0]), atol=0.05)


def test_marginal_at_horizon_matches_t_sigma(rng):
    T = 4
    model = GaussianAR1([1.0], [[2.0]], horizon=T)
    n = 200_000
    xT = model.sample_paths(n, rng)[:, T, 0]
    se_mean = np.sqrt(T * 2.0 / n)
    assert abs(xT.mean() - 1.0) < 4 * se_mean
    # Var 的标准误约为 σ²·√(2/n)
    assert abs(xT.var() - T * 2.0) < 4 * T * 2.0 * np.sqrt(2.0 / n)


def test_sample_next_uses_last_point(rng):
    model = GaussianAR1([0.0], [[0.0]], horizon=2)
    draws = model.sample_next(np.array([[0.0], [5.0]]), 3, rng)
    np.testing.assert_array_equal(draws, np.full((3, 1), 5.0))


def test_covariance_validation():
    with pytest.raises(ProcessError, match="不对称"):
        GaussianAR1([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ProcessError, match="半正定"):
        GaussianAR1([0.0], [[-1.0]])
    with pytest.raises(ProcessError, match="维数"):
        GaussianAR1([0.0, 0.0], [[1.0]])


def test_semidefinite_covariance_is_accepted(rng):
    model = GaussianAR1([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]], horizon=1)
    increments = model.sample_paths(1000, rng)[:, 1, :]
    np.testing.assert_allclose(increments[:, 0], increments[:, 1], atol=1e-6)


def test_path_rejects_non_finite():
    with pytest.raises(ProcessError, match="非有限"):
        Path([0.0, np.nan])


def test_product_paths_zero_noise(rng):
    modelX = GaussianAR1(1.0, 0.0, horizon=2)
    modelY = GaussianAR1(2.0, 0.0, horizon=2)
    pairs = sample_product_paths(modelX, modelY, 5, rng)
    assert len(pairs) == 5
    for px, py in pairs:
        np.testing.assert_array_equal(px.values[:, 0], [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(py.values[:, 0], [2.0, 2.0, 2.0])


def test_product_components_are_independent(rng):
    modelX = GaussianAR1(0.0, 1.0, horizon=1)
    modelY = GaussianAR1(0.0, 1.0, horizon=1)
    xs, ys = sample_product_batch(modelX, modelY, 1_000_000, rng)
    corr = np.corrcoef(xs[:, 1, 0], ys[:, 1, 0])[0, 1]
    assert abs(corr) < 0.01


def test_product_sampling_is_deterministic():
    modelX = GaussianAR1(0.0, 1.0, horizon=3)
    modelY = GaussianAR1(1.0, 0.5, horizon=3)
    a = sample_product_batch(modelX, modelY, 50, np.random.default_rng(7))
    b = sample_product_batch(modelX, modelY, 50, np.random.default_rng(7))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_product_sampling_rejects_horizon_mismatch(rng):
    with pytest.raises(ProcessError, match="期数"):
        sample_product_paths(GaussianAR1(0.0, 1.0, 2), GaussianAR1(0.0, 1.0, 3), 2, rng)


def test_product_batch_truncates_to_requested_horizon(rng):
    xs, ys = sample_product_batch(GaussianAR1(0.0, 1.0, 5), GaussianAR1(0.0, 1.0, 5), 4, rng, horizon=2)
    assert xs.shape == (4, 3, 1)
    assert ys.shape == (4, 3, 1)


def test_path_cost_examples():
    cost = StageCost.squared()
    assert path_cost(cost, Path([1.0, 0.0, 0.0]), Path([1.0, 0.0, 0.0])) == 0.0
    assert path_cost(cost, Path([1.0, 0.0, 0.0]), Path([2.0, 1.0, 3.0])) == pytest.approx(10.0)
    x = Path(np.zeros((5, 2)))
    y = Path(np.ones((5, 2)))
    assert path_cost(cost, x, y) == pytest.approx(8.0)


def test_path_cost_is_symmetric(rng):
    cost = StageCost.squared()
    x = Path(rng.normal(size=(6, 3)))
    y = Path(rng.normal(size=(6, 3)))
    assert path_cost(cost, x, y) == pytest.approx(path_cost(cost, y, x))


def test_path_cost_length_mismatch():
    with pytest.raises(ProcessError, match="长度"):
        path_cost(StageCost.squared(), Path([0.0, 1.0]), Path([0.0, 1.0, 2.0]))


def test_custom_stage_cost_is_time_separable():
    weighted = StageCost(lambda t, x, y: t * np.sum(np.abs(x - y), axis=-1), "weighted-l1")
    assert path_cost(weighted, Path([0.0, 0.0, 0.0]), Path([5.0, 1.0, 1.0])) == pytest.approx(3.0)


def test_sampler_process_checks_output_dimension(rng):
    model = SamplerProcess([0.0, 0.0], lambda history, count, g: g.normal(size=(count, 3)), horizon=1)
    with pytest.raises(ProcessError, match="维数"):
        model.sample_next(np.zeros((1, 2)), 4, rng)


def test_sampler_process_rejects_non_finite_start():
    def step(history, count, g):
        return np.zeros((count, 1))

    for bad in ([np.nan], [np.inf], [[0.0, 1.0]]):
        with pytest.raises(ProcessError, match="x0"):
            SamplerProcess(bad, step, horizon=1)


def test_sampler_process_default_path_sampling(rng):
    model = SamplerProcess([0.0], lambda history, count, g: history[-1] + np.ones((count, 1)), horizon=3)
    paths = model.sample_paths(2, rng)
    np.testing.assert_array_equal(paths[:, :, 0], [[0, 1, 2, 3], [0, 1, 2, 3]])
