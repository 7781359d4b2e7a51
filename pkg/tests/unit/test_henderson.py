import numpy as np
import pytest

from mxfar.estimator.henderson import penalty_matrix, solve_henderson_block, weighted_least_squares
from mxfar.estimator.types import ChannelVariance
from mxfar.exceptions import EmptyNeighborhoodError, InsufficientDataError, SingularDesignError, SpecError


def _problem(seed, n_subjects=4, rows=30, q=4, n_groups=2):
    rng = np.random.default_rng(seed)
    blocks = [rng.normal(size=(rows, q)) for _ in range(n_subjects)]
    groups = np.arange(n_subjects) % n_groups
    X = np.zeros((n_subjects * rows, n_groups * q))
    for n, block in enumerate(blocks):
        X[n * rows:(n + 1) * rows, groups[n] * q:(groups[n] + 1) * q] = block
    weights = rng.uniform(0.0, 2.0, size=n_subjects * rows)
    weights[rng.uniform(size=weights.size) < 0.2] = 0.0
    response = rng.normal(size=n_subjects * rows)
    ginv = rng.uniform(0.1, 3.0, size=q)
    return X, blocks, weights, response, ginv


def _dense_solution(X, blocks, weights, response, ginv):
    q = blocks[0].shape[1]
    Z = np.zeros((X.shape[0], q * len(blocks)))
    start = 0
    for n, block in enumerate(blocks):
        Z[start:start + block.shape[0], n * q:(n + 1) * q] = block
        start += block.shape[0]
    C = np.hstack([X, Z])
    penalty = np.r_[np.zeros(X.shape[1]), np.tile(ginv, len(blocks))]
    lhs = C.T @ (C * weights[:, None]) + np.diag(penalty)
    solution = np.linalg.solve(lhs, C.T @ (weights * response))
    return solution[:X.shape[1]], solution[X.shape[1]:].reshape(len(blocks), q)


@pytest.mark.parametrize("nested", [False, True])
@pytest.mark.parametrize("seed", range(5))
def test_block_absorption_matches_dense_solve(seed, nested):
    X, blocks, weights, response, ginv = _problem(seed)
    group_of = np.arange(len(blocks)) % 2 if nested else None
    solution = solve_henderson_block(X, blocks, weights, response, ginv, group_of=group_of)
    theta, gamma = _dense_solution(X, blocks, weights, response, ginv)
    np.testing.assert_allclose(solution.theta, theta, atol=1e-8)
    np.testing.assert_allclose(solution.gamma, gamma, atol=1e-8)
    assert solution.residual_norm <= 1e-8 * solution.rhs_norm


def test_without_random_effects_matches_wls():
    X, _, weights, response, _ = _problem(7, n_groups=1)
    solution = solve_henderson_block(X, None, weights, response)
    np.testing.assert_allclose(solution.theta, weighted_least_squares(X, weights, response, ridge=0.0), atol=1e-10)
    assert solution.gamma.shape == (0, 0)


@pytest.mark.parametrize("nested", [False, True])
def test_heavy_penalty_gives_pooled_wls(nested):
    X, blocks, weights, response, ginv = _problem(3)
    group_of = np.arange(len(blocks)) % 2 if nested else None
    solution = solve_henderson_block(X, blocks, weights, response, np.full_like(ginv, 1e12), group_of=group_of)
    assert np.max(np.abs(solution.gamma)) < 1e-6
    np.testing.assert_allclose(solution.theta, weighted_least_squares(X, weights, response, ridge=0.0), atol=1e-6)


def test_identical_subjects_with_floor_penalty_keep_pooled_mean():
    rng = np.random.default_rng(4)
    block = rng.normal(size=(40, 4))
    y = rng.normal(size=40)
    w = rng.uniform(0.1, 1.0, size=40)
    X = np.vstack([block] * 3)
    solution = solve_henderson_block(X, [block] * 3, np.tile(w, 3), np.tile(y, 3), np.full(4, 1e-8),
                                     group_of=np.zeros(3, dtype=int))
    np.testing.assert_allclose(solution.theta, weighted_least_squares(block, w, y, ridge=0.0), atol=1e-6)
    assert np.max(np.abs(solution.gamma)) < 1e-6


def test_nested_path_rejects_other_designs():
    X, blocks, weights, response, ginv = _problem(1)
    with pytest.raises(ValueError):
        solve_henderson_block(X, blocks, weights, response, ginv, group_of=np.zeros(len(blocks), dtype=int))


def test_wls_errors():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(10, 3))
    y = rng.normal(size=10)
    with pytest.raises(InsufficientDataError):
        weighted_least_squares(X, np.r_[np.ones(2), np.zeros(8)], y)
    X[:, 1] = 0.0
    with pytest.raises(SingularDesignError):
        weighted_least_squares(X, np.ones(10), y)


def test_penalty_matrix():
    variance = ChannelVariance(sigma2_alpha=np.array([0.5, 0.0]), sigma2_beta=np.array([2.0, 4.0]))
    np.testing.assert_allclose(penalty_matrix(variance, 2.0, 4.0, variance_floor=0.1), [0.25, 0.05, 1.0, 2.0])
    with pytest.raises(SpecError):
        penalty_matrix(variance, 0.0, 1.0)
    with pytest.raises(EmptyNeighborhoodError):
        penalty_matrix(variance, 1.0, 0.0)
