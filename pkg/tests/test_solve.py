"""Row-normalized, diagonally-loaded linear solve."""

import numpy as np
import pytest

from issep.iss import regularized_solve, weighted_normal_system


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def well_conditioned(rng, d):
    """Random system with singular values in [0.3, 3]."""
    u, _, vh = np.linalg.svd(random_complex(rng, (d, d)))
    s = rng.uniform(0.3, 3.0, size=d)
    return (u * s) @ vh


def test_identity_passthrough():
    rng = np.random.default_rng(0)
    b = random_complex(rng, (3, 2))
    x = regularized_solve(np.eye(3, dtype=complex), b, epsilon=0.0)
    assert np.abs(x - b).max() < 1e-12


def test_diagonal_example():
    A = np.diag([2.0, 4.0]).astype(complex)
    b = np.array([2.0, 4.0], dtype=complex)
    x = regularized_solve(A, b, epsilon=0.0)
    assert np.abs(x - 1.0).max() < 1e-12


def test_matches_dense_solve_at_zero_epsilon():
    rng = np.random.default_rng(1)
    for _ in range(30):
        A = well_conditioned(rng, 4)
        b = random_complex(rng, (4, 3))
        x = regularized_solve(A, b, epsilon=0.0)
        ref = np.linalg.solve(A, b)
        assert np.abs(x - ref).max() < 1e-10 * max(1.0, np.abs(ref).max())


def test_vector_rhs_matches_matrix_rhs():
    rng = np.random.default_rng(2)
    A = well_conditioned(rng, 3)
    b = random_complex(rng, 3)
    x_vec = regularized_solve(A, b, epsilon=1e-3)
    x_mat = regularized_solve(A, b[:, None], epsilon=1e-3)
    assert x_vec.shape == (3,)
    assert np.abs(x_vec - x_mat[:, 0]).max() < 1e-12


def test_batched_leading_dims_match_loop():
    rng = np.random.default_rng(3)
    A = np.stack([well_conditioned(rng, 3) for _ in range(5)])
    b = random_complex(rng, (5, 3, 2))
    x = regularized_solve(A, b, epsilon=1e-4)
    for f in range(5):
        ref = regularized_solve(A[f], b[f], epsilon=1e-4)
        assert np.abs(x[f] - ref).max() < 1e-12


def test_singular_at_zero_epsilon_raises():
    A = np.ones((3, 3), dtype=complex)
    b = np.ones((3, 1), dtype=complex)
    with pytest.raises(np.linalg.LinAlgError):
        regularized_solve(A, b, epsilon=0.0)


def test_negative_epsilon_rejected():
    with pytest.raises(ValueError):
        regularized_solve(np.eye(2, dtype=complex), np.ones(2, complex), epsilon=-1.0)


def test_singular_augmented_positive_definite():
    rng = np.random.default_rng(4)
    for _ in range(30):
        rank = rng.integers(1, 3)
        A = random_complex(rng, (4, rank)) @ random_complex(rng, (rank, 4))
        G, _ = weighted_normal_system(A, np.zeros((4, 1), complex), epsilon=1e-3)
        eigs = np.linalg.eigvalsh(G)
        assert eigs.min() > 0


def test_normalized_trace_is_relative_scale():
    # With every row nonzero, trace(G) = d + epsilon * d, so epsilon shifts
    # eigenvalues on a fixed relative scale.
    rng = np.random.default_rng(5)
    for eps in (0.0, 1e-3, 0.5):
        A = random_complex(rng, (6, 6))
        G, _ = weighted_normal_system(A, np.zeros((6, 1), complex), epsilon=eps)
        assert abs(np.trace(G).real - (6 + eps * 6)) < 1e-9


def test_zero_rows_get_unit_weight():
    A = np.zeros((3, 3), dtype=complex)
    A[0, 0] = 2.0
    b = np.array([2.0, 5.0, 7.0], dtype=complex)
    x = regularized_solve(A, b, epsilon=1e-2)
    assert np.all(np.isfinite(x))
    # The zero rows contribute nothing to the normal equations: the rhs
    # keeps only the first row's information.
    G, rhs = weighted_normal_system(A, b[:, None], epsilon=1e-2)
    assert np.abs(rhs[1:]).max() < 1e-12


def test_residual_grows_monotonically_in_epsilon():
    rng = np.random.default_rng(6)
    A = well_conditioned(rng, 4)
    b = random_complex(rng, (4, 1))
    eps_grid = [0.0, 1e-6, 1e-4, 1e-2, 1e-1, 1.0]
    residuals = []
    for eps in eps_grid:
        x = regularized_solve(A, b, epsilon=eps)
        residuals.append(np.linalg.norm(A @ x - b))
    for lo, hi in zip(residuals, residuals[1:]):
        assert hi >= lo - 1e-12


def test_solution_minimizes_regularized_objective():
    # x solves argmin ||D^{-1/2}(Ax - b)||^2 + eps ||x||^2; any perturbation
    # increases that objective.
    rng = np.random.default_rng(7)
    A = random_complex(rng, (4, 4))
    b = random_complex(rng, (4, 1))
    eps = 1e-2
    d_weights = np.sum(np.abs(A) ** 2, axis=1)

    def objective(x):
        r = A @ x - b
        return float(np.sum(np.abs(r) ** 2 / d_weights[:, None]) + eps * np.sum(np.abs(x) ** 2))

    x = regularized_solve(A, b, epsilon=eps)
    base = objective(x)
    for _ in range(20):
        delta = 1e-4 * random_complex(rng, x.shape)
        assert objective(x + delta) >= base - 1e-12
