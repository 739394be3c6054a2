"""
Tests for adjoint module
"""

import os
import sys

import numpy as np
import pytest

# Add src to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from schwarz_adjoint.adjoint import (
    solve_additive_adjoints,
    solve_global_adjoint,
    solve_multiplicative_adjoints,
)
from schwarz_adjoint.decomp import QoiData, build_grid
from schwarz_adjoint.experiment import build_problem
from schwarz_adjoint.fem import BilinearForm, FeFunction, assemble_load, indicator
from schwarz_adjoint.geometry import Rect
from schwarz_adjoint.mesh import build_uniform
from schwarz_adjoint.schwarz import LocalProblems, solve_global

QOI = Rect(0.6, 0.6, 0.8, 0.8)


def _qoi(decomp):
    return QoiData(indicator(QOI), decomp, QOI)


class TestGlobalAdjoint:
    """Test cases for the whole-domain adjoint"""

    def test_solves_transposed_problem(self):
        mesh = build_uniform(10, 10)
        problem = build_problem("convdiff")
        psi = indicator(Rect(0.05, 0.05, 0.2, 0.2))

        phi = solve_global_adjoint(problem, mesh, 2, psi)

        space = phi.space
        A = BilinearForm(space, space, problem).assemble()
        free = space.restrict(None).free
        residual = (A.T @ phi.coefficients - assemble_load(space, psi))[free]
        assert np.abs(residual).max() < 1e-10
        assert not np.any(phi.coefficients[space.restrict(None).boundary])

    def test_symmetric_problem_matches_forward_solve(self):
        mesh = build_uniform(10, 10)
        problem = build_problem("poisson")
        psi = indicator(QOI)

        phi = solve_global_adjoint(problem, mesh, 2, psi)
        u = solve_global(problem, mesh, 2, load=psi)

        assert np.abs(phi.coefficients - u.coefficients).max() < 1e-12


class TestMultiplicativeAdjoints:
    """Test cases for the backward multiplicative cascade"""

    def test_members_match_solve_keys(self):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 2, 0.2, mesh)

        family = solve_multiplicative_adjoints(build_problem("poisson"), decomp, 3, _qoi(decomp), 2)

        assert family.variant == "multiplicative"
        assert family.keys() == [(Q, i) for Q in range(3) for i in range(4)]
        assert family.space.degree == 2

    def test_members_vanish_outside_subdomain(self):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.1, mesh)

        family = solve_multiplicative_adjoints(build_problem("poisson"), decomp, 2, _qoi(decomp), 2)

        for (_, i), member in family.members.items():
            sub = family.space.restrict(decomp.subdomains[i].elements)
            outside = np.ones(family.space.ndofs, dtype=bool)
            outside[sub.free] = False
            assert not np.any(member.coefficients[outside])

    def test_single_subdomain_is_global_adjoint(self):
        mesh = build_uniform(8, 8)
        decomp = build_grid(1, 1, 0.0, mesh)
        problem = build_problem("convdiff")

        family = solve_multiplicative_adjoints(problem, decomp, 1, _qoi(decomp), 2)
        phi = solve_global_adjoint(problem, mesh, 2, indicator(QOI))

        assert np.abs(family.members[(0, 0)].coefficients - phi.coefficients).max() < 1e-12

    def test_only_last_sweep_sees_the_qoi(self):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.1, mesh)
        # QoI inside subdomain 1 only; the last solve of the last sweep has no coupling
        qoi = QoiData(indicator(Rect(0.1, 0.1, 0.3, 0.3)), decomp)

        family = solve_multiplicative_adjoints(build_problem("poisson"), decomp, 2, qoi, 1)

        assert not np.any(family.members[(1, 1)].coefficients)
        assert np.any(family.members[(1, 0)].coefficients)
        assert np.any(family.members[(0, 1)].coefficients)

    def test_members_depend_only_on_later_solves(self):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 2, 0.2, mesh)
        problem = build_problem("convdiff")

        short = solve_multiplicative_adjoints(problem, decomp, 2, _qoi(decomp), 2)
        long = solve_multiplicative_adjoints(problem, decomp, 3, _qoi(decomp), 2)

        # prepending a sweep leaves every later member unchanged
        for (Q, i), member in short.members.items():
            assert np.abs(long.members[(Q + 1, i)].coefficients - member.coefficients).max() < 1e-12

    def test_first_sweep_is_driven_by_later_members(self):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.2, mesh)
        problem = build_problem("poisson")

        family = solve_multiplicative_adjoints(problem, decomp, 2, _qoi(decomp), 1)
        local = LocalProblems(problem, decomp, family.space, adjoint=True)
        overlap = decomp.overlap(1, 0)

        # member (0, 1) only couples to member (1, 0) of the next sweep
        rebuilt = local.solve(1, -local.apply(family.members[(1, 0)], overlap))
        zeroed = local.solve(1, -local.apply(FeFunction(family.space, np.zeros(family.space.ndofs)), overlap))

        assert np.any(family.members[(0, 1)].coefficients)
        assert np.abs(rebuilt - family.members[(0, 1)].coefficients).max() < 1e-12
        assert not np.any(zeroed)


class TestAdditiveAdjoints:
    """Test cases for the backward additive cascade"""

    def test_members_and_tails(self):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.1, mesh)

        family = solve_additive_adjoints(build_problem("poisson"), decomp, 3, 0.4, _qoi(decomp), 2)

        assert family.keys() == [(k, i) for k in (1, 2, 3) for i in (0, 1)]
        for i in (0, 1):
            assert not np.any(family.tails[(3, i)])
            expected = family.members[(2, i)].coefficients + family.members[(3, i)].coefficients
            assert np.abs(family.tails[(1, i)] - expected).max() < 1e-15

    def test_last_level_scales_with_tau(self):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.1, mesh)
        problem = build_problem("poisson")

        small = solve_additive_adjoints(problem, decomp, 1, 0.2, _qoi(decomp), 2)
        large = solve_additive_adjoints(problem, decomp, 1, 0.4, _qoi(decomp), 2)

        for i in (0, 1):
            assert np.abs(large.members[(1, i)].coefficients - 2 * small.members[(1, i)].coefficients).max() < 1e-12

    @pytest.mark.parametrize("K", [1, 4])
    def test_level_count(self, K):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 2, 0.1, mesh)

        family = solve_additive_adjoints(build_problem("convdiff"), decomp, K, 0.4, _qoi(decomp), 3)

        assert len(family.members) == K * 4
        assert family.variant == "additive"
