"""
Tests for schwarz module
"""

import os
import sys

import numpy as np
import pytest

# Add src to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from schwarz_adjoint.decomp import build_grid
from schwarz_adjoint.experiment import build_problem
from schwarz_adjoint.mesh import build_uniform
from schwarz_adjoint.schwarz import (
    SchwarzConfig,
    SchwarzError,
    run_additive,
    run_multiplicative,
    run_schwarz,
    solve_global,
)


@pytest.fixture
def poisson():
    return build_problem("poisson")


class TestSchwarzConfig:
    """Test cases for run parameters"""

    def test_unknown_method(self):
        with pytest.raises(SchwarzError):
            SchwarzConfig(method="jacobi")

    def test_iteration_count(self):
        with pytest.raises(SchwarzError):
            SchwarzConfig(K=0)

    def test_additive_needs_positive_tau(self):
        with pytest.raises(SchwarzError):
            SchwarzConfig(method="additive", tau=0.0)


class TestMultiplicative:
    """Test cases for multiplicative sweeps"""

    def test_trace_layout(self, poisson):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.1, mesh)

        trace = run_multiplicative(poisson, mesh, decomp, SchwarzConfig(K=2))

        assert len(trace.iterates) == 1 + 2 * 2
        assert trace.solve_keys() == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert trace.global_iterate(2) is trace.final
        assert not np.any(trace.iterates[0].coefficients)

    def test_local_solves_vanish_outside_subdomain(self, poisson):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.1, mesh)

        trace = run_multiplicative(poisson, mesh, decomp, SchwarzConfig(K=2))

        for (k, i), solve in trace.local_solves.items():
            support = trace.space.restrict(decomp.subdomains[i].elements).support_mask
            assert not np.any(solve.coefficients[~support])

    def test_local_solve_matches_iterate_on_subdomain(self, poisson):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.1, mesh)

        trace = run_multiplicative(poisson, mesh, decomp, SchwarzConfig(K=1))

        support = trace.space.restrict(decomp.subdomains[1].elements).support_mask
        assert np.array_equal(trace.local_solves[(0, 1)].coefficients[support], trace.final.coefficients[support])

    def test_single_subdomain_is_global_solve(self, poisson):
        mesh = build_uniform(8, 8)
        decomp = build_grid(1, 1, 0.0, mesh)

        trace = run_multiplicative(poisson, mesh, decomp, SchwarzConfig(K=1))

        expected = solve_global(poisson, mesh, 1)
        assert np.abs(trace.final.coefficients - expected.coefficients).max() < 1e-12

    def test_global_solve_uses_reduced_system(self, poisson, monkeypatch):
        import schwarz_adjoint.schwarz as schwarz_module

        seen = []
        original = schwarz_module.solve

        def _recording_solve(system):
            seen.append(system)
            return original(system)

        monkeypatch.setattr(schwarz_module, "solve", _recording_solve)

        u_h = solve_global(poisson, build_uniform(4, 4), 1)

        assert len(seen) == 1
        # 3x3 interior vertices of a 4x4 grid
        assert seen[0].matrix.shape == (9, 9)
        assert u_h.coefficients.shape == (25,)

    def test_galerkin_solution_is_a_fixed_point(self, poisson):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 2, 0.2, mesh)
        u_h = solve_global(poisson, mesh, 1)

        trace = run_multiplicative(poisson, mesh, decomp, SchwarzConfig(K=1, initial=u_h.coefficients))

        assert np.abs(trace.final.coefficients - u_h.coefficients).max() < 1e-12

    def test_converges_to_galerkin_solution(self, poisson):
        mesh = build_uniform(20, 20)
        decomp = build_grid(2, 1, 0.1, mesh)
        u_h = solve_global(poisson, mesh, 1)

        trace = run_multiplicative(poisson, mesh, decomp, SchwarzConfig(K=50))

        assert np.abs(trace.final.coefficients - u_h.coefficients).max() < 1e-10

    def test_sweep_order_changes_iterates(self, poisson):
        mesh = build_uniform(10, 10)
        forward = run_multiplicative(poisson, mesh, build_grid(2, 1, 0.1, mesh), SchwarzConfig(K=1))
        backward = run_multiplicative(
            poisson, mesh, build_grid(2, 1, 0.1, mesh, sweep_order=[1, 0]), SchwarzConfig(K=1)
        )

        assert np.abs(forward.final.coefficients - backward.final.coefficients).max() > 1e-6

    def test_rejects_foreign_decomposition(self, poisson):
        decomp = build_grid(2, 1, 0.1, build_uniform(10, 10))

        with pytest.raises(SchwarzError):
            run_multiplicative(poisson, build_uniform(10, 10), decomp, SchwarzConfig(K=1))


class TestAdditive:
    """Test cases for relaxed additive iterations"""

    def test_trace_layout(self, poisson):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 2, 0.1, mesh)

        trace = run_additive(poisson, mesh, decomp, SchwarzConfig(method="additive", K=3, tau=0.4))

        assert len(trace.iterates) == 4
        assert trace.solve_keys()[0] == (1, 0)
        assert trace.solve_keys()[-1] == (3, 3)
        assert len(trace.local_solves) == 12
        assert trace.global_iterate(3) is trace.final

    def test_first_iterate_is_relaxed_sum(self, poisson):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.1, mesh)

        trace = run_additive(poisson, mesh, decomp, SchwarzConfig(method="additive", K=1, tau=0.4))

        total = trace.local_solves[(1, 0)].coefficients + trace.local_solves[(1, 1)].coefficients
        assert np.abs(trace.final.coefficients - 0.4 * total).max() < 1e-14

    def test_converges_to_galerkin_solution(self, poisson):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.1, mesh)
        u_h = solve_global(poisson, mesh, 1)

        trace = run_schwarz(poisson, mesh, decomp, SchwarzConfig(method="additive", K=100, tau=0.4))

        assert np.abs(trace.final.coefficients - u_h.coefficients).max() < 1e-6

    def test_galerkin_solution_is_a_fixed_point(self, poisson):
        mesh = build_uniform(10, 10)
        decomp = build_grid(2, 1, 0.1, mesh)
        u_h = solve_global(poisson, mesh, 2)

        trace = run_additive(
            poisson, mesh, decomp, SchwarzConfig(method="additive", K=1, tau=0.4, degree=2, initial=u_h.coefficients)
        )

        assert np.abs(trace.final.coefficients - u_h.coefficients).max() < 1e-12
