"""
Structured triangulations of rectangles with conforming local refinement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

import numpy as np

from schwarz_adjoint.geometry import GEOM_TOL, UNIT_SQUARE, Rect

logger = logging.getLogger(__name__)


class MeshError(Exception):
    """Raised when a mesh cannot be built or refined as requested."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation of an axis-aligned rectangle.

    ``triangles`` hold counterclockwise vertex triples. Local edge ``k`` of a
    triangle joins its vertices ``k`` and ``(k + 1) % 3``.

    Green closure pairs are recorded so a later refinement can undo them:
    ``green_parents[g]`` is ``(p0, p1, p2, m)``, the parent triangle and the
    midpoint of its edge ``p0 p1``; ``green_siblings[g]`` are the indices of
    ``(p0, m, p2)`` and ``(m, p1, p2)`` in that order.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    domain: Rect = field(default=UNIT_SQUARE)
    green_parents: Optional[np.ndarray] = None
    green_siblings: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64))
        parents = np.zeros((0, 4)) if self.green_parents is None else self.green_parents
        siblings = np.zeros((0, 2)) if self.green_siblings is None else self.green_siblings
        object.__setattr__(self, "green_parents", np.asarray(parents, dtype=np.int64).reshape(-1, 4))
        object.__setattr__(self, "green_siblings", np.asarray(siblings, dtype=np.int64).reshape(-1, 2))
        if self.green_parents.shape[0] != self.green_siblings.shape[0]:
            raise MeshError("green_parents and green_siblings must have the same length")
        for arr in (self.vertices, self.triangles, self.green_parents, self.green_siblings):
            arr.setflags(write=False)

    def __str__(self) -> str:
        return f"Triangular mesh with {self.num_vertices} vertices and {self.num_triangles} triangles."

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def num_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def _edge_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        tri = self.triangles
        local = np.stack(
            [tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]], axis=1
        ).reshape(-1, 2)
        local = np.sort(local, axis=1)
        edges, inverse = np.unique(local, axis=0, return_inverse=True)
        triangle_edges = np.asarray(inverse).reshape(-1, 3)

        flat = triangle_edges.ravel()
        owners = np.repeat(np.arange(tri.shape[0]), 3)
        order = np.argsort(flat, kind="stable")
        sorted_edges = flat[order]
        sorted_owners = owners[order]
        first = np.ones(sorted_edges.shape[0], dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        edge_triangles = np.full((edges.shape[0], 2), -1, dtype=np.int64)
        edge_triangles[sorted_edges[first], 0] = sorted_owners[first]
        edge_triangles[sorted_edges[~first], 1] = sorted_owners[~first]
        return edges, triangle_edges, edge_triangles

    @property
    def edges(self) -> np.ndarray:
        """Sorted vertex pairs, one row per edge."""
        return self._edge_tables[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """Edge index of local edge k for every triangle."""
        return self._edge_tables[1]

    @property
    def edge_triangles(self) -> np.ndarray:
        """Up to two adjacent triangles per edge, ``-1`` when absent."""
        return self._edge_tables[2]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_triangles[:, 1] < 0)

    @cached_property
    def boundary_vertex_flags(self) -> np.ndarray:
        flags = np.zeros(self.num_vertices, dtype=bool)
        flags[self.edges[self.boundary_edges].ravel()] = True
        return flags

    def total_area(self) -> float:
        return float(self.signed_areas.sum())

    def is_conforming(self) -> bool:
        """True when every edge with a single neighbour lies on the domain boundary.

        A hanging vertex leaves an interior edge with only one adjacent triangle,
        so this scan detects non-conformity without pairwise vertex tests.
        """
        pts = self.vertices[self.edges[self.boundary_edges]]
        on_side = np.zeros(pts.shape[0], dtype=bool)
        d = self.domain
        for coord, value in ((0, d.x0), (0, d.x1), (1, d.y0), (1, d.y1)):
            on_side |= (np.abs(pts[:, 0, coord] - value) <= GEOM_TOL) & (
                np.abs(pts[:, 1, coord] - value) <= GEOM_TOL
            )
        return bool(on_side.all())

    def triangles_inside(self, rect: Rect) -> np.ndarray:
        """Indices of triangles whose centroid lies in ``rect``."""
        c = self.centroids
        mask = (
            (c[:, 0] > rect.x0)
            & (c[:, 0] < rect.x1)
            & (c[:, 1] > rect.y0)
            & (c[:, 1] < rect.y1)
        )
        return np.flatnonzero(mask)

    def check_invariants(self) -> None:
        """Raise MeshError if orientation, tiling or conformity is violated."""
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.flatnonzero(self.signed_areas <= 0.0)[0])
            raise MeshError(f"Triangle {bad} has non-positive signed area")
        if abs(self.total_area() - self.domain.area) > 1e-12 * self.domain.area:
            raise MeshError(
                f"Triangles cover area {self.total_area()!r}, domain area is {self.domain.area!r}"
            )
        if not self.is_conforming():
            raise MeshError("Mesh has hanging vertices")


def build_uniform(nx: int, ny: int, rect: Rect = UNIT_SQUARE) -> Mesh:
    """Uniform ``nx`` by ``ny`` grid, each cell split bottom-left to top-right."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"Cell counts must be positive integers, got nx={nx}, ny={ny}")
    if rect.is_degenerate():
        raise MeshError(f"Degenerate mesh rectangle {rect}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(rect.x0, rect.x1, nx + 1)
    ys = np.linspace(rect.y0, rect.y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v11 = v10 + nx + 1
    v01 = v00 + nx + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(vertices, triangles, rect)


def _separated(mesh: Mesh, rect: Rect) -> np.ndarray:
    """Per triangle: True if its interior and ``rect``'s interior are disjoint."""
    p = mesh.vertices[mesh.triangles]
    sep = (
        (p[:, :, 0].max(axis=1) <= rect.x0 + GEOM_TOL)
        | (p[:, :, 0].min(axis=1) >= rect.x1 - GEOM_TOL)
        | (p[:, :, 1].max(axis=1) <= rect.y0 + GEOM_TOL)
        | (p[:, :, 1].min(axis=1) >= rect.y1 - GEOM_TOL)
    )
    corners = np.array(
        [[rect.x0, rect.y0], [rect.x1, rect.y0], [rect.x1, rect.y1], [rect.x0, rect.y1]]
    )
    for k in range(3):
        a = p[:, k]
        b = p[:, (k + 1) % 3]
        normal = np.column_stack([b[:, 1] - a[:, 1], a[:, 0] - b[:, 0]])
        scale = np.linalg.norm(normal, axis=1)
        dist = np.einsum("td,ctd->tc", normal, corners[:, None, :] - a[None, :, :])
        sep |= dist.min(axis=1) >= -GEOM_TOL * scale
    return sep


def _contained(mesh: Mesh, rect: Rect) -> np.ndarray:
    inside = rect.contains_points(mesh.vertices)
    return inside[mesh.triangles].all(axis=1)


def element_region_consistency(mesh: Mesh, rects: Iterable[Rect]) -> bool:
    """True iff every triangle meeting a rectangle's interior lies inside it."""
    for rect in rects:
        if np.any(~_separated(mesh, rect) & ~_contained(mesh, rect)):
            return False
    return True


class _TriangleSink:
    """Collects refined triangles together with their green closure pairs."""

    def __init__(self):
        self.triangles: List[Tuple[int, int, int]] = []
        self.green_parents: List[Tuple[int, int, int, int]] = []
        self.green_siblings: List[Tuple[int, int]] = []

    def plain(self, a: int, b: int, c: int) -> None:
        self.triangles.append((a, b, c))

    def green(self, a: int, b: int, c: int, m: int) -> None:
        """Bisect ``(a, b, c)`` at ``m``, the midpoint of edge ``a b``."""
        first = len(self.triangles)
        self.triangles.extend([(a, m, c), (m, b, c)])
        self.green_parents.append((a, b, c, m))
        self.green_siblings.append((first, first + 1))

    def closed(self, a: int, b: int, c: int, m: int) -> None:
        if m >= 0:
            self.green(a, b, c, m)
        else:
            self.plain(a, b, c)

    def build(self, vertices: np.ndarray, domain: Rect) -> Mesh:
        return Mesh(
            vertices,
            np.array(self.triangles, dtype=np.int64),
            domain,
            green_parents=np.array(self.green_parents, dtype=np.int64).reshape(-1, 4),
            green_siblings=np.array(self.green_siblings, dtype=np.int64).reshape(-1, 2),
        )


def refine_region(mesh: Mesh, region: Rect) -> Mesh:
    """Red-refine triangles inside ``region`` and close with green bisection.

    Triangles outside the region that end up with two or more split edges are
    promoted to red, which can split further edges; the marking is repeated
    until stable, after which every remaining neighbour has at most one split
    edge and is bisected towards its opposite vertex.

    A green pair is never bisected again. When either half lies in the region
    or would receive a split edge, the pair is merged back into its parent and
    the parent is red-refined; halves of the parent's bisected edge that are
    split from outside close the affected child with a fresh green pair.
    """
    clipped = region.intersection(mesh.domain)
    if clipped is None:
        return mesh
    if not element_region_consistency(mesh, [clipped]):
        raise MeshError(f"Refinement region {region} is not aligned with mesh edges")

    inside = np.zeros(mesh.num_triangles, dtype=bool)
    inside[mesh.triangles_inside(clipped)] = True
    if not inside.any():
        return mesh

    siblings = mesh.green_siblings
    group = np.full(mesh.num_triangles, -1, dtype=np.int64)
    group[siblings[:, 0]] = np.arange(siblings.shape[0])
    group[siblings[:, 1]] = np.arange(siblings.shape[0])
    is_green = group >= 0

    red = inside & ~is_green
    reopen = np.zeros(siblings.shape[0], dtype=bool)
    reopen[group[inside & is_green]] = True

    tri_edges = mesh.triangle_edges
    marked = np.zeros(mesh.edges.shape[0], dtype=bool)
    while True:
        marked[tri_edges[red].ravel()] = True
        # outer edges of a reopened parent: (p2, p0) on the first half, (p1, p2) on the second
        marked[tri_edges[siblings[reopen, 0], 2]] = True
        marked[tri_edges[siblings[reopen, 1], 1]] = True
        counts = marked[tri_edges].sum(axis=1)
        touched = is_green & (counts > 0)
        touched[is_green] &= ~reopen[group[is_green]]
        promote = ~is_green & ~red & (counts >= 2)
        if not touched.any() and not promote.any():
            break
        reopen[group[touched]] = True
        red |= promote

    midpoint_index = np.full(mesh.edges.shape[0], -1, dtype=np.int64)
    split = np.flatnonzero(marked)
    midpoint_index[split] = mesh.num_vertices + np.arange(split.shape[0])
    ends = mesh.vertices[mesh.edges[split]]
    vertices = np.vstack([mesh.vertices, ends.mean(axis=1)])

    def mid(t: int, k: int) -> int:
        return int(midpoint_index[tri_edges[t, k]])

    sink = _TriangleSink()
    for t in range(mesh.num_triangles):
        g = int(group[t])
        if g >= 0:
            first, second = (int(s) for s in siblings[g])
            if t != first:
                continue
            p0, p1, p2, m = (int(v) for v in mesh.green_parents[g])
            if not reopen[g]:
                sink.green(p0, p1, p2, m)
                continue
            m12, m20 = mid(second, 1), mid(first, 2)
            sink.closed(p0, m, m20, mid(first, 0))
            sink.closed(m, p1, m12, mid(second, 0))
            sink.plain(m20, m12, p2)
            sink.plain(m, m12, m20)
            continue

        a, b, c = (int(v) for v in mesh.triangles[t])
        mab, mbc, mca = mid(t, 0), mid(t, 1), mid(t, 2)
        if red[t]:
            sink.plain(a, mab, mca)
            sink.plain(mab, b, mbc)
            sink.plain(mca, mbc, c)
            sink.plain(mab, mbc, mca)
        elif mab >= 0:
            sink.green(a, b, c, mab)
        elif mbc >= 0:
            sink.green(b, c, a, mbc)
        elif mca >= 0:
            sink.green(c, a, b, mca)
        else:
            sink.plain(a, b, c)

    refined = sink.build(vertices, mesh.domain)
    logger.debug(
        "Refined %d red triangles and %d reopened green pairs in %s: %d -> %d vertices",
        int(red.sum()),
        int(reopen.sum()),
        clipped,
        mesh.num_vertices,
        refined.num_vertices,
    )
    return refined


def refine_uniform(mesh: Mesh, times: int = 1) -> Mesh:
    """Red-refine the whole mesh ``times`` times."""
    for _ in range(times):
        mesh = refine_region(mesh, mesh.domain)
    return mesh


def format_mesh(mesh: Mesh) -> str:
    lines = [f"vertices {mesh.num_vertices} triangles {mesh.num_triangles}"]
    lines.extend(f"{x!r} {y!r}" for x, y in mesh.vertices.tolist())
    lines.extend(f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist())
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, out_path: str | Path) -> Path:
    path = Path(out_path).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_mesh(mesh), encoding="utf-8")
    return path


def read_mesh(path: str | Path, domain: Rect = UNIT_SQUARE) -> Mesh:
    """Parse the plain-text dump written by :func:`write_mesh`."""
    lines = Path(path).expanduser().read_text(encoding="utf-8").split("\n")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "vertices" or header[2] != "triangles":
        raise MeshError(f"Malformed mesh header in {path}: {lines[0]!r}")
    n, m = int(header[1]), int(header[3])
    body = [line.split() for line in lines[1 : 1 + n + m]]
    if len(body) != n + m:
        raise MeshError(f"Mesh file {path} is truncated")
    vertices = np.array([[float(x) for x in row] for row in body[:n]])
    triangles = np.array([[int(v) for v in row] for row in body[n:]], dtype=np.int64)
    return Mesh(vertices, triangles, domain)
