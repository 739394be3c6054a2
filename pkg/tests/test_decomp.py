"""
Tests for decomp module
"""

import os
import sys

import numpy as np
import pytest

# Add src to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from schwarz_adjoint.decomp import (
    DecompositionError,
    QoiData,
    build_grid,
    chi,
    decomposition_from_rects,
)
from schwarz_adjoint.fem import indicator, mesh_geometry
from schwarz_adjoint.geometry import Rect
from schwarz_adjoint.mesh import build_uniform, refine_region


def _quadrature_points(mesh):
    pts, _ = mesh_geometry(mesh).quadrature(np.arange(mesh.num_triangles))
    return pts.reshape(-1, 2)


class TestBuildGrid:
    """Test cases for overlapping subdomain grids"""

    def test_two_by_one(self):
        mesh = build_uniform(20, 20)

        decomp = build_grid(2, 1, 0.1, mesh)

        assert decomp.p == 2
        assert decomp.rects[0].as_tuple() == pytest.approx((0.0, 0.0, 0.6, 1.0))
        assert decomp.rects[1].as_tuple() == pytest.approx((0.4, 0.0, 1.0, 1.0))
        assert decomp.overlap(0, 1).shape[0] == 4 * 20 * 2
        assert decomp.order == (0, 1)

    def test_interior_sides(self):
        decomp = build_grid(2, 2, 0.2, build_uniform(10, 10))

        first = decomp.subdomains[0]
        assert first.label == 1
        assert len(first.interior_sides) == 2
        assert decomp.rects[3].as_tuple() == pytest.approx((0.3, 0.3, 1.0, 1.0))

    def test_single_subdomain(self):
        decomp = build_grid(1, 1, 0.0, build_uniform(4, 4))

        assert decomp.p == 1
        assert decomp.subdomains[0].interior_sides == ()
        assert decomp.overlap(0, 0).shape[0] == 32

    def test_column_sweep_order(self):
        decomp = build_grid(2, 2, 0.1, build_uniform(10, 10), sweep_order="column")

        assert decomp.order == (0, 2, 1, 3)

    def test_explicit_sweep_order(self):
        decomp = build_grid(4, 1, 0.1, build_uniform(20, 20), sweep_order=[3, 2, 1, 0])

        assert decomp.order == (3, 2, 1, 0)

    def test_bad_sweep_order(self):
        with pytest.raises(DecompositionError):
            build_grid(2, 1, 0.1, build_uniform(20, 20), sweep_order=[0, 0])

    def test_overlap_must_be_positive(self):
        with pytest.raises(DecompositionError):
            build_grid(2, 1, 0.0, build_uniform(20, 20))

    def test_overlap_larger_than_cell(self):
        with pytest.raises(DecompositionError):
            build_grid(4, 1, 0.3, build_uniform(20, 20))

    def test_misaligned_overlap(self):
        with pytest.raises(DecompositionError):
            build_grid(2, 1, 0.07, build_uniform(20, 20))


class TestDecompositionFromRects:
    """Test cases for arbitrary rectangle decompositions"""

    def test_refined_mesh_keeps_rectangles(self):
        coarse = build_grid(2, 2, 0.2, build_uniform(10, 10))
        mesh = refine_region(coarse.mesh, coarse.rects[3])

        decomp = decomposition_from_rects(mesh, coarse.rects, coarse.order, coarse.beta, coarse.shape)

        assert decomp.p == 4
        assert decomp.shape == (2, 2)
        covered = np.zeros(mesh.num_triangles, dtype=bool)
        for sub in decomp.subdomains:
            covered[sub.elements] = True
        assert covered.all()

    def test_uncovered_elements(self):
        mesh = build_uniform(10, 10)

        with pytest.raises(DecompositionError):
            decomposition_from_rects(mesh, [Rect(0.0, 0.0, 0.5, 1.0), Rect(0.6, 0.0, 1.0, 1.0)])

    def test_subdomain_without_overlap(self):
        mesh = build_uniform(10, 10)

        with pytest.raises(DecompositionError):
            decomposition_from_rects(mesh, [Rect(0.0, 0.0, 0.5, 1.0), Rect(0.5, 0.0, 1.0, 1.0)])


class TestPartitionOfUnity:
    """Test cases for the distance-based weights chi_i"""

    @pytest.mark.parametrize("px,py,beta", [(2, 1, 0.1), (4, 1, 0.1), (4, 4, 0.1), (2, 2, 0.05)])
    def test_sums_to_one_at_quadrature_points(self, px, py, beta):
        mesh = build_uniform(20, 20)
        decomp = build_grid(px, py, beta, mesh)

        weights = chi(decomp, _quadrature_points(mesh))

        assert np.all(weights >= 0.0)
        assert np.abs(weights.sum(axis=1) - 1.0).max() < 1e-13

    def test_zero_outside_subdomain(self):
        decomp = build_grid(2, 1, 0.1, build_uniform(20, 20))

        weights = chi(decomp, np.array([[0.2, 0.5], [0.8, 0.5], [0.5, 0.5]]))

        assert weights[0].tolist() == [1.0, 0.0]
        assert weights[1].tolist() == [0.0, 1.0]
        assert weights[2] == pytest.approx([0.5, 0.5])

    def test_single_subdomain_is_one(self):
        decomp = build_grid(1, 1, 0.0, build_uniform(4, 4))

        weights = chi(decomp, np.array([[0.1, 0.1], [0.5, 0.5], [1.0, 1.0]]))

        assert weights.tolist() == [[1.0], [1.0], [1.0]]

    def test_qoi_pieces_sum_to_psi(self):
        mesh = build_uniform(20, 20)
        decomp = build_grid(2, 2, 0.1, mesh)
        psi = indicator(Rect(0.4, 0.4, 0.8, 0.8))
        qoi = QoiData(psi, decomp)
        pts = _quadrature_points(mesh)

        total = sum(piece(pts) for piece in qoi.pieces())

        assert np.abs(total - psi(pts)).max() < 1e-13
