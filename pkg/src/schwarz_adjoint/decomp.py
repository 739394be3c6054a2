"""
Overlapping rectangular subdomain grids and the distance-based partition of unity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from schwarz_adjoint.fem import Field
from schwarz_adjoint.geometry import GEOM_TOL, Rect, Segment, distance_to_segments
from schwarz_adjoint.mesh import Mesh, element_region_consistency

logger = logging.getLogger(__name__)

SweepOrder = Union[str, Sequence[int]]


class DecompositionError(Exception):
    """Raised when a subdomain grid is inconsistent with the mesh or overlap."""


@dataclass(frozen=True, eq=False)
class Subdomain:
    index: int
    rect: Rect
    elements: np.ndarray
    interior_sides: Tuple[Segment, ...]

    @property
    def label(self) -> int:
        """One-based subdomain number used in reports."""
        return self.index + 1


@dataclass(frozen=True, eq=False)
class Decomposition:
    mesh: Mesh
    subdomains: Tuple[Subdomain, ...]
    order: Tuple[int, ...]
    beta: float
    shape: Tuple[int, int]
    overlaps: Dict[Tuple[int, int], np.ndarray] = field(repr=False)

    @property
    def p(self) -> int:
        return len(self.subdomains)

    @property
    def rects(self) -> List[Rect]:
        return [s.rect for s in self.subdomains]

    def overlap(self, i: int, j: int) -> np.ndarray:
        """Elements of the overlap of subdomains ``i`` and ``j`` (zero-based)."""
        return self.overlaps[(i, j)]

    def describe(self) -> str:
        parts = [f"Omega_{s.label}={s.rect}" for s in self.subdomains]
        return f"{self.shape[0]}x{self.shape[1]} grid, beta={self.beta:g}: " + ", ".join(parts)


def _sweep_order(order: SweepOrder, px: int, py: int) -> Tuple[int, ...]:
    p = px * py
    if isinstance(order, str):
        key = order.strip().lower()
        if key == "row":
            return tuple(range(p))
        if key == "column":
            return tuple(n * px + m for m in range(px) for n in range(py))
        raise DecompositionError(f"Unknown sweep order '{order}'; expected 'row', 'column' or a list")
    explicit = tuple(int(i) for i in order)
    if sorted(explicit) != list(range(p)):
        raise DecompositionError(f"Sweep order {list(explicit)} is not a permutation of 0..{p - 1}")
    return explicit


def build_grid(
    px: int,
    py: int,
    beta: float,
    mesh: Mesh,
    sweep_order: SweepOrder = "row",
) -> Decomposition:
    """Overlapping ``px`` by ``py`` grid of subdomains on the mesh domain.

    Base cells are cut at equally spaced lines; every cell is then widened by
    ``beta`` across each partition line it touches. Subdomains are numbered
    row-major, x first, starting at the bottom-left cell.
    """
    if int(px) != px or int(py) != py or px < 1 or py < 1:
        raise DecompositionError(f"Subdomain counts must be positive integers, got {px}x{py}")
    px, py = int(px), int(py)
    beta = float(beta)
    if beta < 0:
        raise DecompositionError(f"Overlap beta must be non-negative, got {beta}")
    domain = mesh.domain
    width = domain.width / px
    height = domain.height / py
    if px > 1 and beta > width + GEOM_TOL:
        raise DecompositionError(f"Overlap beta={beta} exceeds the base cell width {width:g}")
    if py > 1 and beta > height + GEOM_TOL:
        raise DecompositionError(f"Overlap beta={beta} exceeds the base cell height {height:g}")
    if px * py > 1 and beta <= GEOM_TOL:
        raise DecompositionError("Subdomains must overlap: beta must be positive when p > 1")

    rects: List[Rect] = []
    for n in range(py):
        for m in range(px):
            x0 = domain.x0 + m * width - (beta if m > 0 else 0.0)
            x1 = domain.x0 + (m + 1) * width + (beta if m < px - 1 else 0.0)
            y0 = domain.y0 + n * height - (beta if n > 0 else 0.0)
            y1 = domain.y0 + (n + 1) * height + (beta if n < py - 1 else 0.0)
            rects.append(Rect(x0, y0, x1, y1))

    if not element_region_consistency(mesh, rects):
        raise DecompositionError(
            f"Subdomain boundaries for beta={beta} are not aligned with mesh lines"
        )
    return decomposition_from_rects(mesh, rects, sweep_order=_sweep_order(sweep_order, px, py), beta=beta, shape=(px, py))


def decomposition_from_rects(
    mesh: Mesh,
    rects: Sequence[Rect],
    sweep_order: Optional[Sequence[int]] = None,
    beta: float = 0.0,
    shape: Optional[Tuple[int, int]] = None,
) -> Decomposition:
    """Decomposition for arbitrary aligned rectangles covering the mesh."""
    subdomains = []
    for idx, rect in enumerate(rects):
        elements = mesh.triangles_inside(rect)
        if elements.size == 0:
            raise DecompositionError(f"Subdomain {idx + 1} ({rect}) contains no elements")
        subdomains.append(
            Subdomain(idx, rect, elements, tuple(rect.interior_sides(mesh.domain)))
        )

    covered = np.zeros(mesh.num_triangles, dtype=bool)
    for sub in subdomains:
        covered[sub.elements] = True
    if not covered.all():
        raise DecompositionError(
            f"{int((~covered).sum())} elements are not covered by any subdomain"
        )

    overlaps: Dict[Tuple[int, int], np.ndarray] = {}
    for a in subdomains:
        for b in subdomains:
            if b.index < a.index:
                overlaps[(a.index, b.index)] = overlaps[(b.index, a.index)]
                continue
            overlaps[(a.index, b.index)] = np.intersect1d(a.elements, b.elements)

    if len(subdomains) > 1:
        for sub in subdomains:
            if not any(overlaps[(sub.index, j)].size for j in range(len(subdomains)) if j != sub.index):
                raise DecompositionError(f"Subdomain {sub.label} does not overlap any other subdomain")

    order = tuple(sweep_order) if sweep_order is not None else tuple(range(len(rects)))
    decomp = Decomposition(
        mesh=mesh,
        subdomains=tuple(subdomains),
        order=order,
        beta=beta,
        shape=shape or (len(rects), 1),
        overlaps=overlaps,
    )
    logger.debug("Built decomposition %s", decomp.describe())
    return decomp


def chi(decomp: Decomposition, points) -> np.ndarray:
    """Partition-of-unity weights, one column per subdomain.

    ``d_i`` is the distance to the interior boundary of subdomain ``i`` for
    points in its closure and zero elsewhere; weights are ``d_i / sum(d)``.
    Where every covering distance vanishes the weight is split equally.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p = decomp.p
    inside = np.zeros((pts.shape[0], p), dtype=bool)
    dist = np.zeros((pts.shape[0], p))
    for sub in decomp.subdomains:
        mask = sub.rect.contains_points(pts)
        inside[:, sub.index] = mask
        dist[mask, sub.index] = distance_to_segments(pts[mask], sub.interior_sides)

    unbounded = np.isinf(dist)
    weights = np.zeros_like(dist)
    has_inf = unbounded.any(axis=1)
    weights[has_inf] = unbounded[has_inf] / unbounded[has_inf].sum(axis=1, keepdims=True)

    finite = ~has_inf
    totals = dist[finite].sum(axis=1)
    regular = totals > 0
    rows = np.flatnonzero(finite)
    weights[rows[regular]] = dist[rows[regular]] / totals[regular, None]
    degenerate = rows[~regular]
    if degenerate.size:
        cover = inside[degenerate].astype(float)
        weights[degenerate] = cover / np.maximum(cover.sum(axis=1, keepdims=True), 1.0)
    return weights


@dataclass(frozen=True, eq=False)
class QoiData:
    """QoI weight psi and its partition-of-unity pieces psi_j = chi_j psi."""

    psi: Field
    decomp: Decomposition
    rect: Optional[Rect] = None

    def piece(self, j: int) -> Field:
        def _localized(points: np.ndarray) -> np.ndarray:
            return chi(self.decomp, points)[:, j] * self.psi(points)

        return _localized

    def pieces(self) -> List[Field]:
        return [self.piece(j) for j in range(self.decomp.p)]
