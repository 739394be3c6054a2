"""
Tests for gsanalog module
"""

import os
import sys

import numpy as np
import pytest

# Add src to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from schwarz_adjoint.gsanalog import (
    BlockSystem,
    build_cgs,
    gs_adjoint,
    gs_check_sweep,
    gs_error_identity,
    gs_iterate,
    random_block_system,
    stack_adjoint,
    stacked_qoi,
    stacked_rhs,
)
from schwarz_adjoint.solver import SolverError


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class TestBlockSystem:
    """Test cases for block splitting"""

    def test_splitting(self, rng):
        system, _ = random_block_system(rng, 3, block_size=2)

        assert system.p == 3
        assert system.n == 6
        assert np.array_equal(system.A + system.B, system.matrix)
        assert np.array_equal(np.triu(system.B, 1), system.B)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            BlockSystem(np.eye(4), (2, 1), np.zeros(4))

    def test_singular_diagonal_block(self):
        matrix = np.array([[0.0, 1.0], [1.0, 2.0]])

        with pytest.raises(SolverError):
            BlockSystem(matrix, (1, 1), np.ones(2))


class TestForwardSweeps:
    """Test cases for block Gauss-Seidel iterates"""

    def test_iterates_solve_stacked_system(self, rng):
        system, _ = random_block_system(rng, 4)
        K = 3

        stacked = np.concatenate(gs_iterate(system, None, K))

        C = build_cgs(system, K)
        assert np.abs(C @ stacked - stacked_rhs(system, K)).max() < 1e-12

    def test_initial_guess_enters_first_block(self, rng):
        system, _ = random_block_system(rng, 2)
        x0 = rng.standard_normal(system.n)
        K = 2

        stacked = np.concatenate(gs_iterate(system, x0, K))

        C = build_cgs(system, K)
        assert np.abs(C @ stacked - stacked_rhs(system, K, x0)).max() < 1e-12

    def test_converges(self, rng):
        system, _ = random_block_system(rng, 4)

        x = gs_iterate(system, None, 60)[-1]

        assert np.abs(x - np.linalg.solve(system.matrix, system.b)).max() < 1e-10

    def test_rejects_zero_sweeps(self, rng):
        system, _ = random_block_system(rng, 2)

        with pytest.raises(ValueError):
            gs_iterate(system, None, 0)


class TestAdjointRecursion:
    """Test cases for the backward adjoint blocks"""

    @pytest.mark.parametrize("p,K", [(1, 1), (2, 3), (4, 5)])
    def test_solves_transposed_stacked_system(self, rng, p, K):
        system, psi = random_block_system(rng, p)

        phi = stack_adjoint(system, gs_adjoint(system, psi, K), K)

        C = build_cgs(system, K)
        assert np.abs(C.T @ phi - stacked_qoi(psi, K)).max() < 1e-12

    def test_error_identity(self, rng):
        system, psi = random_block_system(rng, 4)
        K = 3
        x_hat = np.concatenate(gs_iterate(system, None, K)) + 1e-2 * rng.standard_normal(K * system.n)

        lhs, rhs = gs_error_identity(system, x_hat, psi, K)

        assert abs(lhs) > 1e-6
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_exact_iterates_have_no_error(self, rng):
        system, psi = random_block_system(rng, 2)
        K = 2
        x_hat = np.concatenate(gs_iterate(system, None, K))

        lhs, rhs = gs_error_identity(system, x_hat, psi, K)

        assert abs(lhs) < 1e-12
        assert abs(rhs) < 1e-12

    def test_wrong_stack_length(self, rng):
        system, psi = random_block_system(rng, 2)

        with pytest.raises(ValueError):
            gs_error_identity(system, np.zeros(system.n), psi, 2)


class TestCheckSweep:
    """Test cases for the seeded identity sweep"""

    def test_fifty_systems(self):
        checks = gs_check_sweep(n_systems=50)

        assert len(checks) == 50
        assert {c.p for c in checks} == {1, 2, 4}
        assert {c.K for c in checks} == {1, 3, 5}
        assert max(c.violation for c in checks) <= 1e-12

    def test_is_deterministic(self):
        first = gs_check_sweep(n_systems=5, seed=3)
        second = gs_check_sweep(n_systems=5, seed=3)

        assert [(c.lhs, c.rhs) for c in first] == [(c.lhs, c.rhs) for c in second]
