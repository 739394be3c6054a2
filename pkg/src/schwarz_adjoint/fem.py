"""
Lagrange finite elements of degree 1-3 on triangle meshes.

Every function is stored as a coefficient vector over the whole mesh space of
its degree. Subdomain spaces are element subsets plus a free-DOF index set;
functions living on a subdomain are simply zero outside it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from schwarz_adjoint.mesh import Mesh

logger = logging.getLogger(__name__)

SUPPORTED_DEGREES = (1, 2, 3)

Field = Callable[[np.ndarray], np.ndarray]


class FemError(Exception):
    """Raised when spaces, meshes or evaluation points are incompatible."""


# Symmetric 12-point rule on the reference triangle, exact for degree 6.
# Barycentric orbits and weights normalised to sum to one.
_ORBITS = (
    (0.116786275726379, (0.501426509658179, 0.249286745170910, 0.249286745170910)),
    (0.050844906370207, (0.873821971016996, 0.063089014491502, 0.063089014491502)),
    (0.082851075618374, (0.053145049844817, 0.310352451033784, 0.636502499121399)),
)


def _quadrature_rule() -> Tuple[np.ndarray, np.ndarray]:
    points = []
    weights = []
    for weight, (a, b, c) in _ORBITS:
        perms = {(a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)}
        for l1, l2, l3 in sorted(perms):
            points.append((l2, l3))
            weights.append(weight)
    return np.array(points), np.array(weights)


QUAD_POINTS, QUAD_WEIGHTS = _quadrature_rule()


@dataclass(frozen=True)
class Problem:
    """Model problem -div(k grad u) + b.grad u = f with u = 0 on the boundary."""

    name: str
    source: Field
    convection: Tuple[float, float] = (0.0, 0.0)
    diffusion: float = 1.0
    exact: Optional[Field] = None

    @property
    def is_symmetric(self) -> bool:
        return self.convection[0] == 0.0 and self.convection[1] == 0.0


@dataclass(frozen=True)
class ReferenceElement:
    """Nodal Lagrange basis on the triangle (0,0), (1,0), (0,1).

    Node order: three vertices, ``degree - 1`` nodes on each local edge
    ``k -> k+1`` walking away from vertex ``k``, then the interior node.
    """

    degree: int
    nodes: np.ndarray
    monomials: Tuple[Tuple[int, int], ...]
    coefficients: np.ndarray

    @property
    def num_nodes(self) -> int:
        return int(self.nodes.shape[0])

    def _monomial_values(self, points: np.ndarray) -> np.ndarray:
        x, y = points[:, 0:1], points[:, 1:2]
        return np.hstack([x**a * y**b for a, b in self.monomials])

    def _monomial_gradients(self, points: np.ndarray) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        out = np.zeros((points.shape[0], len(self.monomials), 2))
        for m, (a, b) in enumerate(self.monomials):
            if a > 0:
                out[:, m, 0] = a * x ** (a - 1) * y**b
            if b > 0:
                out[:, m, 1] = b * x**a * y ** (b - 1)
        return out

    def values(self, points: np.ndarray) -> np.ndarray:
        """Basis values, shape ``(len(points), num_nodes)``."""
        return self._monomial_values(np.atleast_2d(points)) @ self.coefficients

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """Reference gradients, shape ``(len(points), num_nodes, 2)``."""
        grads = self._monomial_gradients(np.atleast_2d(points))
        return np.einsum("qmi,mj->qji", grads, self.coefficients)


@lru_cache(maxsize=None)
def reference_element(degree: int) -> ReferenceElement:
    if degree not in SUPPORTED_DEGREES:
        raise FemError(f"Unsupported polynomial degree {degree}; expected one of {SUPPORTED_DEGREES}")
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    nodes = [c for c in corners]
    for k in range(3):
        a, b = corners[k], corners[(k + 1) % 3]
        for s in range(degree - 1):
            nodes.append(a + (s + 1) / degree * (b - a))
    if degree == 3:
        nodes.append(np.array([1.0 / 3.0, 1.0 / 3.0]))
    nodes_arr = np.array(nodes)
    monomials = tuple((a, t - a) for t in range(degree + 1) for a in range(t, -1, -1))
    monomial_basis = ReferenceElement(degree, nodes_arr, monomials, np.eye(len(monomials)))
    vandermonde = monomial_basis._monomial_values(nodes_arr)
    coefficients = np.linalg.inv(vandermonde)
    return ReferenceElement(degree, nodes_arr, monomials, coefficients)


def _as_elements(mesh: Mesh, elements) -> np.ndarray:
    if elements is None:
        return np.arange(mesh.num_triangles)
    return np.asarray(elements, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class MeshGeometry:
    """Affine element maps and quadrature points of a mesh."""

    mesh: Mesh

    @cached_property
    def origins(self) -> np.ndarray:
        return self.mesh.vertices[self.mesh.triangles[:, 0]]

    @cached_property
    def jacobians(self) -> np.ndarray:
        p = self.mesh.vertices[self.mesh.triangles]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)

    @cached_property
    def inverse_transposed(self) -> np.ndarray:
        return np.transpose(np.linalg.inv(self.jacobians), (0, 2, 1))

    @cached_property
    def areas(self) -> np.ndarray:
        return self.mesh.signed_areas

    @cached_property
    def metric(self) -> np.ndarray:
        """``J^{-1} J^{-T}`` per element, mapping reference gradient pairs to dot products."""
        jit = self.inverse_transposed
        return np.einsum("tai,taj->tij", jit, jit)

    def quadrature(self, elements: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Physical quadrature points ``(n, q, 2)`` and weights ``(n, q)``."""
        pts = self.origins[elements, None, :] + np.einsum(
            "tai,qi->tqa", self.jacobians[elements], QUAD_POINTS
        )
        weights = self.areas[elements, None] * QUAD_WEIGHTS[None, :]
        return pts, weights


@lru_cache(maxsize=16)
def mesh_geometry(mesh: Mesh) -> MeshGeometry:
    return MeshGeometry(mesh)


class FeSpace:
    """Continuous Lagrange space of a given degree over a whole mesh."""

    def __init__(self, mesh: Mesh, degree: int):
        self.mesh = mesh
        self.degree = int(degree)
        self.reference = reference_element(self.degree)
        self.geometry = mesh_geometry(mesh)
        self.cell_dofs, self.ndofs = self._number_dofs()
        self.quad_values = self.reference.values(QUAD_POINTS)
        self.quad_gradients = self.reference.gradients(QUAD_POINTS)

    def __repr__(self) -> str:
        return f"FeSpace(P{self.degree}, ndofs={self.ndofs})"

    def _number_dofs(self) -> Tuple[np.ndarray, int]:
        mesh = self.mesh
        d = self.degree
        tri = mesh.triangles
        n_vert = mesh.num_vertices
        n_edge = mesh.edges.shape[0]
        cells = np.empty((mesh.num_triangles, self.reference.num_nodes), dtype=np.int64)
        cells[:, :3] = tri
        col = 3
        for k in range(3):
            a = tri[:, k]
            b = tri[:, (k + 1) % 3]
            e = mesh.triangle_edges[:, k]
            for s in range(d - 1):
                along = np.where(a < b, s, d - 2 - s)
                cells[:, col] = n_vert + e * (d - 1) + along
                col += 1
        ndofs = n_vert + n_edge * (d - 1)
        if d == 3:
            cells[:, col] = ndofs + np.arange(mesh.num_triangles)
            ndofs += mesh.num_triangles
        return cells, int(ndofs)

    @cached_property
    def dof_coordinates(self) -> np.ndarray:
        geo = self.geometry
        local = self.geometry.origins[:, None, :] + np.einsum(
            "tai,ni->tna", geo.jacobians, self.reference.nodes
        )
        coords = np.zeros((self.ndofs, 2))
        coords[self.cell_dofs.ravel()] = local.reshape(-1, 2)
        return coords

    def edge_dofs(self, edges: np.ndarray) -> np.ndarray:
        """All DOFs lying on the given edges, endpoints included."""
        edges = np.asarray(edges, dtype=np.int64)
        vert = self.mesh.edges[edges].ravel()
        inner = (
            self.mesh.num_vertices
            + edges[:, None] * (self.degree - 1)
            + np.arange(self.degree - 1)[None, :]
        ).ravel()
        return np.unique(np.concatenate([vert, inner]))

    def restrict(self, elements=None) -> "SubSpace":
        """Homogeneous Dirichlet subspace on an element subset."""
        elems = np.unique(_as_elements(self.mesh, elements))
        support = np.unique(self.cell_dofs[elems].ravel())
        counts = np.bincount(
            self.mesh.triangle_edges[elems].ravel(), minlength=self.mesh.edges.shape[0]
        )
        boundary = self.edge_dofs(np.flatnonzero(counts == 1))
        free = np.setdiff1d(support, boundary, assume_unique=True)
        return SubSpace(self, elems, support, free, boundary)

    def zero(self) -> "FeFunction":
        return FeFunction(self, np.zeros(self.ndofs))

    def function(self, coefficients) -> "FeFunction":
        coeffs = np.asarray(coefficients, dtype=float)
        if coeffs.shape != (self.ndofs,):
            raise FemError(f"Expected {self.ndofs} coefficients, got shape {coeffs.shape}")
        return FeFunction(self, coeffs)


@lru_cache(maxsize=32)
def lagrange_space(mesh: Mesh, degree: int) -> FeSpace:
    """Shared space instance per (mesh, degree)."""
    return FeSpace(mesh, degree)


@dataclass(frozen=True, eq=False)
class SubSpace:
    """Element subset of a space with its free (interior) DOFs."""

    space: FeSpace
    elements: np.ndarray
    support: np.ndarray
    free: np.ndarray
    boundary: np.ndarray

    @property
    def num_free(self) -> int:
        return int(self.free.shape[0])

    @cached_property
    def support_mask(self) -> np.ndarray:
        mask = np.zeros(self.space.ndofs, dtype=bool)
        mask[self.support] = True
        return mask

    def extend(self, local: np.ndarray) -> np.ndarray:
        """Extension by zero of free-DOF values to the full space."""
        out = np.zeros(self.space.ndofs)
        out[self.free] = local
        return out

    def mask_free(self, coefficients: np.ndarray) -> np.ndarray:
        out = np.zeros(self.space.ndofs)
        out[self.free] = coefficients[self.free]
        return out

    def mask_support(self, coefficients: np.ndarray) -> np.ndarray:
        return np.where(self.support_mask, coefficients, 0.0)


@dataclass(frozen=True, eq=False)
class FeFunction:
    space: FeSpace
    coefficients: np.ndarray

    def __add__(self, other: "FeFunction") -> "FeFunction":
        _check_same_space(self.space, other.space)
        return FeFunction(self.space, self.coefficients + other.coefficients)

    def __sub__(self, other: "FeFunction") -> "FeFunction":
        _check_same_space(self.space, other.space)
        return FeFunction(self.space, self.coefficients - other.coefficients)

    def __mul__(self, scale: float) -> "FeFunction":
        return FeFunction(self.space, float(scale) * self.coefficients)

    __rmul__ = __mul__

    def local_coefficients(self, elements: np.ndarray) -> np.ndarray:
        return self.coefficients[self.space.cell_dofs[elements]]

    def quadrature_values(self, elements: np.ndarray) -> np.ndarray:
        return self.local_coefficients(elements) @ self.space.quad_values.T

    def evaluate(self, points) -> np.ndarray:
        """Point values, locating the containing triangle of every point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        owners, ref = locate_points(self.space.mesh, pts)
        basis = self.space.reference.values(ref)
        return np.einsum("nr,nr->n", self.local_coefficients(owners), basis)


def _check_same_space(a: FeSpace, b: FeSpace) -> None:
    if a is not b and (a.mesh is not b.mesh or a.degree != b.degree):
        raise FemError(f"Functions live on different spaces: {a!r} vs {b!r}")


def _check_same_mesh(a: FeSpace, b: FeSpace) -> None:
    if a.mesh is not b.mesh:
        raise FemError("Trial and test spaces are defined on different meshes")


@lru_cache(maxsize=16)
def _centroid_tree(mesh: Mesh) -> cKDTree:
    return cKDTree(mesh.centroids)


def _barycentric_reference(mesh: Mesh, elements: np.ndarray, pts: np.ndarray) -> np.ndarray:
    geo = mesh_geometry(mesh)
    inv = np.linalg.inv(geo.jacobians[elements])
    return np.einsum("nij,nj->ni", inv, pts - geo.origins[elements])


def locate_points(mesh: Mesh, points: np.ndarray, tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """Containing triangle and reference coordinates of every point."""
    n = points.shape[0]
    owners = np.full(n, -1, dtype=np.int64)
    ref = np.zeros((n, 2))
    k = min(8, mesh.num_triangles)
    _, near = _centroid_tree(mesh).query(points, k=k)
    near = np.asarray(near).reshape(n, k)
    for col in range(k):
        todo = np.flatnonzero(owners < 0)
        if todo.size == 0:
            break
        cand = near[todo, col]
        xi = _barycentric_reference(mesh, cand, points[todo])
        ok = (xi[:, 0] >= -tol) & (xi[:, 1] >= -tol) & (xi.sum(axis=1) <= 1.0 + tol)
        owners[todo[ok]] = cand[ok]
        ref[todo[ok]] = xi[ok]
    for idx in np.flatnonzero(owners < 0):
        all_tri = np.arange(mesh.num_triangles)
        xi = _barycentric_reference(mesh, all_tri, np.repeat(points[idx : idx + 1], mesh.num_triangles, axis=0))
        ok = np.flatnonzero((xi[:, 0] >= -tol) & (xi[:, 1] >= -tol) & (xi.sum(axis=1) <= 1.0 + tol))
        if ok.size == 0:
            raise FemError(f"Point {points[idx].tolist()} lies outside the mesh")
        owners[idx] = ok[0]
        ref[idx] = xi[ok[0]]
    return owners, ref


class BilinearForm:
    """Element matrices of a(u, v) for a trial/test space pair.

    Entry ``[t, r, c]`` is the contribution of element ``t`` to
    ``a(trial_c, test_r)``. With ``adjoint=True`` the convection term acts on
    the test function instead, so assembled systems solve ``a(v, phi) = rhs``.
    """

    def __init__(self, trial: FeSpace, test: FeSpace, problem: Problem, adjoint: bool = False):
        _check_same_mesh(trial, test)
        self.trial = trial
        self.test = test
        self.problem = problem
        self.adjoint = adjoint
        w = QUAD_WEIGHTS
        self._stiffness = np.einsum(
            "q,qri,qcj->rcij", w, test.quad_gradients, trial.quad_gradients
        )
        if adjoint:
            self._convection = np.einsum("q,qri,qc->rci", w, test.quad_gradients, trial.quad_values)
        else:
            self._convection = np.einsum("q,qr,qci->rci", w, test.quad_values, trial.quad_gradients)

    def element_matrices(self, elements: np.ndarray) -> np.ndarray:
        geo = self.test.geometry
        areas = geo.areas[elements]
        mats = self.problem.diffusion * np.einsum(
            "tij,rcij->trc", geo.metric[elements], self._stiffness
        )
        if not self.problem.is_symmetric:
            b = np.asarray(self.problem.convection, dtype=float)
            b_ref = np.einsum("a,tai->ti", b, geo.inverse_transposed[elements])
            mats = mats + np.einsum("ti,rci->trc", b_ref, self._convection)
        return mats * areas[:, None, None]

    def assemble(self, elements=None) -> sp.csr_matrix:
        elems = _as_elements(self.test.mesh, elements)
        mats = self.element_matrices(elems)
        rows = np.repeat(self.test.cell_dofs[elems][:, :, None], mats.shape[2], axis=2)
        cols = np.repeat(self.trial.cell_dofs[elems][:, None, :], mats.shape[1], axis=1)
        matrix = sp.coo_matrix(
            (mats.ravel(), (rows.ravel(), cols.ravel())),
            shape=(self.test.ndofs, self.trial.ndofs),
        )
        return matrix.tocsr()

    def apply(self, u: FeFunction, elements=None) -> np.ndarray:
        """Vector ``r -> a(u, test_r)`` (or ``a(test_r, u)`` for the adjoint form)."""
        _check_same_space(u.space, self.trial)
        elems = _as_elements(self.test.mesh, elements)
        local = np.einsum("trc,tc->tr", self.element_matrices(elems), u.local_coefficients(elems))
        return np.bincount(
            self.test.cell_dofs[elems].ravel(), weights=local.ravel(), minlength=self.test.ndofs
        )

    def evaluate(self, u: FeFunction, v: FeFunction, elements=None) -> float:
        _check_same_space(v.space, self.test)
        return float(self.apply(u, elements) @ v.coefficients)


def assemble_operator(
    trial: FeSpace,
    test: FeSpace,
    problem: Problem,
    region=None,
    adjoint_flag: bool = False,
) -> sp.csr_matrix:
    return BilinearForm(trial, test, problem, adjoint=adjoint_flag).assemble(region)


def _quadrature_field(g, space: FeSpace, elements: np.ndarray) -> np.ndarray:
    pts, _ = space.geometry.quadrature(elements)
    return evaluate_field(g, pts)


def evaluate_field(g, pts: np.ndarray) -> np.ndarray:
    """Values of a scalar, callable or FeFunction at points shaped ``(..., 2)``."""
    shape = pts.shape[:-1]
    if g is None:
        return np.zeros(shape)
    if isinstance(g, FeFunction):
        return g.evaluate(pts.reshape(-1, 2)).reshape(shape)
    if callable(g):
        return np.asarray(g(pts.reshape(-1, 2)), dtype=float).reshape(shape)
    return np.full(shape, float(g))


def assemble_load(test: FeSpace, g, region=None) -> np.ndarray:
    elems = _as_elements(test.mesh, region)
    if elems.size == 0:
        return np.zeros(test.ndofs)
    _, weights = test.geometry.quadrature(elems)
    values = _quadrature_field(g, test, elems)
    local = np.einsum("tq,qr->tr", values * weights, test.quad_values)
    return np.bincount(test.cell_dofs[elems].ravel(), weights=local.ravel(), minlength=test.ndofs)


def _values_on_elements(u, mesh: Mesh, elems: np.ndarray, pts: np.ndarray) -> np.ndarray:
    if isinstance(u, FeFunction):
        if u.space.mesh is not mesh:
            raise FemError("Function is defined on a different mesh than the region")
        return u.quadrature_values(elems)
    return evaluate_field(u, pts)


def inner_product(u, w, mesh: Mesh, region=None) -> float:
    """Quadrature value of the integral of ``u * w`` over the region's elements."""
    elems = _as_elements(mesh, region)
    if elems.size == 0:
        return 0.0
    pts, weights = mesh_geometry(mesh).quadrature(elems)
    uv = _values_on_elements(u, mesh, elems, pts)
    wv = _values_on_elements(w, mesh, elems, pts)
    return float(np.sum(uv * wv * weights))


@lru_cache(maxsize=None)
def _transfer_matrix(source_degree: int, target_degree: int) -> np.ndarray:
    target_nodes = reference_element(target_degree).nodes
    return reference_element(source_degree).values(target_nodes)


def interpolate(source: FeFunction, target: FeSpace, mask: Optional[SubSpace] = None) -> FeFunction:
    """Nodal interpolant of ``source`` in ``target``.

    When ``mask`` is given, coefficients outside its free DOFs are set to zero.
    """
    if source.space.mesh is target.mesh:
        transfer = _transfer_matrix(source.space.degree, target.degree)
        local = source.local_coefficients(np.arange(target.mesh.num_triangles)) @ transfer.T
        coeffs = np.zeros(target.ndofs)
        coeffs[target.cell_dofs.ravel()] = local.ravel()
    else:
        coeffs = source.evaluate(target.dof_coordinates)
    if mask is not None:
        if mask.space is not target:
            raise FemError("Interpolation mask belongs to a different space")
        coeffs = mask.mask_free(coeffs)
    return FeFunction(target, coeffs)


def interpolate_field(g, target: FeSpace, mask: Optional[SubSpace] = None) -> FeFunction:
    coeffs = evaluate_field(g, target.dof_coordinates)
    if mask is not None:
        coeffs = mask.mask_free(coeffs)
    return FeFunction(target, coeffs)


def apply_form(u: FeFunction, v: FeFunction, problem: Problem, region=None) -> float:
    """a(u, v) over the region, for u and v of possibly different degrees."""
    return BilinearForm(u.space, v.space, problem).evaluate(u, v, region)


def weak_residual(u: FeFunction, v: FeFunction, problem: Problem, region=None) -> float:
    """R(u, v) = (f, v) - a(u, v) restricted to the region."""
    load = inner_product(problem.source, v, v.space.mesh, region)
    return load - apply_form(u, v, problem, region)


def indicator(rect) -> Field:
    """Characteristic function of an axis-aligned rectangle."""

    def _indicator(points: np.ndarray) -> np.ndarray:
        return rect.contains_points(points, tol=0.0).astype(float)

    return _indicator
