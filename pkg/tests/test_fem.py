"""
Tests for fem module
"""

import os
import sys

import numpy as np
import pytest

# Add src to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from schwarz_adjoint.experiment import build_problem
from schwarz_adjoint.fem import (
    QUAD_POINTS,
    QUAD_WEIGHTS,
    BilinearForm,
    FemError,
    apply_form,
    assemble_load,
    indicator,
    inner_product,
    interpolate,
    interpolate_field,
    lagrange_space,
    reference_element,
    weak_residual,
)
from schwarz_adjoint.geometry import Rect
from schwarz_adjoint.mesh import build_uniform
from schwarz_adjoint.schwarz import solve_global
from schwarz_adjoint.estimator import exact_poisson_qoi, qoi_value


class TestReferenceElement:
    """Test cases for nodal Lagrange bases"""

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_basis_is_nodal(self, degree):
        ref = reference_element(degree)

        assert np.allclose(ref.values(ref.nodes), np.eye(ref.num_nodes), atol=1e-12)

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_partition_of_unity(self, degree):
        ref = reference_element(degree)

        assert np.allclose(ref.values(QUAD_POINTS).sum(axis=1), 1.0)
        assert np.allclose(ref.gradients(QUAD_POINTS).sum(axis=1), 0.0, atol=1e-11)

    def test_unsupported_degree(self):
        with pytest.raises(FemError):
            reference_element(4)


class TestQuadrature:
    """Test cases for the degree-6 triangle rule"""

    def test_weights(self):
        assert QUAD_POINTS.shape == (12, 2)
        assert QUAD_WEIGHTS.sum() == pytest.approx(1.0, abs=1e-12)

    def test_polynomial_integrals(self):
        mesh = build_uniform(3, 3)

        xy = inner_product(lambda p: p[:, 0], lambda p: p[:, 1], mesh)
        sextic = inner_product(lambda p: p[:, 0] ** 2, lambda p: p[:, 1] ** 4, mesh)

        assert xy == pytest.approx(0.25, abs=1e-12)
        assert sextic == pytest.approx(1.0 / 15.0, abs=1e-12)

    def test_region_restriction(self):
        mesh = build_uniform(10, 10)
        rect = Rect(0.6, 0.6, 0.8, 0.8)

        area = inner_product(1.0, indicator(rect), mesh)
        local = inner_product(1.0, 1.0, mesh, mesh.triangles_inside(rect))

        assert area == pytest.approx(0.04, abs=1e-12)
        assert local == pytest.approx(0.04, abs=1e-12)


class TestSpaces:
    """Test cases for global and subdomain spaces"""

    def test_dof_counts(self):
        mesh = build_uniform(2, 2)

        assert lagrange_space(mesh, 1).ndofs == 9
        assert lagrange_space(mesh, 2).ndofs == 25
        assert lagrange_space(mesh, 3).ndofs == 49

    def test_dof_coordinates_are_shared(self):
        space = lagrange_space(build_uniform(2, 2), 2)

        coords = np.round(space.dof_coordinates * 4).astype(int)
        assert len({tuple(c) for c in coords}) == space.ndofs

    def test_restrict_whole_mesh(self):
        space = lagrange_space(build_uniform(4, 4), 2)

        sub = space.restrict(None)

        assert sub.support.shape[0] == space.ndofs
        assert sub.num_free == 7 * 7
        assert sub.boundary.shape[0] == space.ndofs - 49

    def test_restrict_strip(self):
        mesh = build_uniform(4, 4)
        space = lagrange_space(mesh, 1)

        sub = space.restrict(mesh.triangles_inside(Rect(0.0, 0.0, 0.5, 1.0)))

        # interior vertices of the 2x4 block
        assert sub.num_free == 3
        assert sub.extend(np.ones(3)).sum() == 3.0


class TestInterpolation:
    """Test cases for interpolation and point evaluation"""

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_reproduces_polynomials(self, degree):
        space = lagrange_space(build_uniform(3, 4), degree)
        f = lambda p: (p[:, 0] + 2 * p[:, 1]) ** degree  # noqa: E731
        pts = np.array([[0.31, 0.77], [0.55, 0.12], [0.9, 0.9], [0.0, 0.5]])

        u = interpolate_field(f, space)

        assert np.allclose(u.evaluate(pts), f(pts), atol=1e-12)

    def test_degree_raise_is_exact(self):
        mesh = build_uniform(4, 4)
        u = interpolate_field(lambda p: p[:, 0] * p[:, 1], lagrange_space(mesh, 2))

        lifted = interpolate(u, lagrange_space(mesh, 3))
        back = interpolate(lifted, lagrange_space(mesh, 2))

        assert np.allclose(back.coefficients, u.coefficients, atol=1e-13)

    def test_cross_mesh_interpolation(self):
        coarse = build_uniform(2, 2)
        fine = build_uniform(6, 6)
        u = interpolate_field(lambda p: 1.0 + p[:, 0] - p[:, 1], lagrange_space(coarse, 1))

        v = interpolate(u, lagrange_space(fine, 1))

        x = v.space.dof_coordinates
        assert np.allclose(v.coefficients, 1.0 + x[:, 0] - x[:, 1], atol=1e-12)

    def test_mask_zeroes_non_free_dofs(self):
        mesh = build_uniform(4, 4)
        space = lagrange_space(mesh, 1)
        mask = space.restrict(mesh.triangles_inside(Rect(0.0, 0.0, 0.5, 1.0)))

        u = interpolate_field(1.0, space, mask=mask)

        assert u.coefficients.sum() == 3.0

    def test_point_outside_mesh(self):
        u = lagrange_space(build_uniform(2, 2), 1).zero()

        with pytest.raises(FemError):
            u.evaluate([[1.5, 0.5]])


class TestForms:
    """Test cases for bilinear forms and residuals"""

    def test_poisson_matrix_is_symmetric(self):
        space = lagrange_space(build_uniform(4, 4), 2)
        A = BilinearForm(space, space, build_problem("poisson")).assemble()

        assert abs(A - A.T).max() < 1e-12

    def test_adjoint_form_is_transpose(self):
        space = lagrange_space(build_uniform(4, 4), 2)
        problem = build_problem("convdiff")

        A = BilinearForm(space, space, problem).assemble()
        A_adj = BilinearForm(space, space, problem, adjoint=True).assemble()

        assert abs(A - A.T).max() > 0.1
        assert abs(A_adj - A.T).max() < 1e-10

    def test_constants_are_in_the_kernel(self):
        space = lagrange_space(build_uniform(3, 3), 3)
        A = BilinearForm(space, space, build_problem("convdiff")).assemble()

        assert np.abs(A @ np.ones(space.ndofs)).max() < 1e-10

    def test_mixed_degree_form(self):
        mesh = build_uniform(4, 4)
        u = interpolate_field(lambda p: p[:, 0], lagrange_space(mesh, 1))
        v = interpolate_field(lambda p: p[:, 0], lagrange_space(mesh, 3))

        # a(x, x) = |grad x|^2 over the unit square
        assert apply_form(u, v, build_problem("poisson")) == pytest.approx(1.0, abs=1e-12)

    def test_load_sums_to_integral(self):
        space = lagrange_space(build_uniform(5, 5), 2)

        load = assemble_load(space, lambda p: p[:, 0] * p[:, 1])

        assert load.sum() == pytest.approx(0.25, abs=1e-12)

    def test_galerkin_orthogonality(self):
        mesh = build_uniform(6, 6)
        problem = build_problem("poisson")
        u = solve_global(problem, mesh, 1)
        sub = lagrange_space(mesh, 1).restrict(None)
        v = interpolate_field(lambda p: np.sin(3 * p[:, 0]) + p[:, 1], lagrange_space(mesh, 1), mask=sub)

        assert abs(weak_residual(u, v, problem)) < 1e-10

    def test_global_poisson_qoi(self):
        mesh = build_uniform(10, 10)
        rect = Rect(0.6, 0.6, 0.8, 0.8)

        u = solve_global(build_problem("poisson"), mesh, 2)

        assert qoi_value(u, indicator(rect)) == pytest.approx(exact_poisson_qoi(rect), abs=1e-3)
