import numpy as np
import pytest

from bicausal_ot.core.oracle import OracleError, SpdMatrix, bures_trace_term, exact_value, spd_sqrt

ONE_DIMENSIONAL_VALUES = [1.25, 2.75, 4.5, 6.5, 8.75, 11.25, 14.0, 17.0, 20.25, 23.75, 27.5]


def _random_spd(rng, d):
    a = rng.normal(size=(d, d))
    return a @ a.T + 0.1 * np.eye(d)


@pytest.mark.parametrize("T, expected", list(enumerate(ONE_DIMENSIONAL_VALUES, start=1)))
def test_one_dimensional_values(T, expected):
    assert exact_value(1.0, 2.0, 1.0, 0.25, T) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("T, expected", [(20, 72.5), (40, 245.0)])
def test_long_horizons(T, expected):
    assert exact_value([1.0], [2.0], [[1.0]], [[0.25]], T) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("d, expected", [(5, 100.0), (10, 200.0), (15, 300.0), (20, 400.0)])
def test_multidimensional_values(d, expected):
    value = exact_value(np.ones(d), 2.0 * np.ones(d), 1.21 * np.eye(d), 0.01 * np.eye(d), 5)
    assert value == pytest.approx(expected, abs=1e-9)


def test_identical_processes_have_zero_value(rng):
    sigma = _random_spd(rng, 3)
    x0 = rng.normal(size=3)
    assert exact_value(x0, x0, sigma, sigma, 7) == pytest.approx(0.0, abs=1e-9)


def test_value_is_symmetric(rng):
    for _ in range(20):
        sigma_x, sigma_y = _random_spd(rng, 4), _random_spd(rng, 4)
        x0, y0 = rng.normal(size=4), rng.normal(size=4)
        forward = exact_value(x0, y0, sigma_x, sigma_y, 3)
        assert exact_value(y0, x0, sigma_y, sigma_x, 3) == pytest.approx(forward, abs=1e-9)


def test_commuting_covariances_reduce_to_square_root_gap(rng):
    sigma_x, sigma_y = np.diag([4.0, 9.0]), np.diag([1.0, 1.0])
    # (2 - 1)² + (3 - 1)²
    assert bures_trace_term(sigma_x, sigma_y) == pytest.approx(5.0)


def test_spd_sqrt_examples():
    np.testing.assert_allclose(spd_sqrt(np.eye(3)).entries, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(spd_sqrt(np.diag([4.0, 9.0])).entries, np.diag([2.0, 3.0]), atol=1e-12)


def test_spd_sqrt_squares_back(rng):
    for d in (1, 3, 8):
        m = _random_spd(rng, d)
        root = spd_sqrt(m).entries
        np.testing.assert_array_equal(root, root.T)
        assert np.linalg.norm(root @ root - m) <= 1e-10 * np.linalg.norm(m)


def test_semidefinite_input_is_accepted():
    root = spd_sqrt(np.array([[1.0, 1.0], [1.0, 1.0]])).entries
    np.testing.assert_allclose(root @ root, [[1.0, 1.0], [1.0, 1.0]], atol=1e-10)
    assert bures_trace_term(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0


def test_spd_matrix_validation():
    with pytest.raises(OracleError, match="不对称"):
        SpdMatrix(np.array([[1.0, 0.2], [0.0, 1.0]]))
    with pytest.raises(OracleError, match="半正定"):
        SpdMatrix(np.diag([1.0, -0.5]))
    with pytest.raises(OracleError, match="方阵"):
        SpdMatrix(np.ones((2, 3)))
    assert SpdMatrix(np.diag([1.0, 2.0])).trace == pytest.approx(3.0)


def test_exact_value_validation():
    with pytest.raises(OracleError, match="T 必须"):
        exact_value(1.0, 2.0, 1.0, 0.25, 0)
    with pytest.raises(OracleError, match="维数不一致"):
        exact_value([1.0, 1.0], [2.0], np.eye(2), np.eye(2), 1)
