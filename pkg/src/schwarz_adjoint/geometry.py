"""
Axis-aligned rectangle helpers shared by the mesh, decomposition and QoI code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

# Coordinates closer than this are treated as lying on the same line.
GEOM_TOL = 1e-10

Segment = Tuple[Tuple[float, float], Tuple[float, float]]


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "Rect":
        if len(values) != 4:
            raise ValueError(
                f"Rectangle needs 4 numbers (x0, y0, x1, y1), got {len(values)}"
            )
        x0, y0, x1, y1 = (float(v) for v in values)
        return cls(x0, y0, x1, y1)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def is_degenerate(self) -> bool:
        return self.width <= GEOM_TOL or self.height <= GEOM_TOL

    def contains_points(self, points: np.ndarray, tol: float = GEOM_TOL) -> np.ndarray:
        """Return a mask of points inside (or on the boundary of) the rectangle."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (
            (pts[:, 0] >= self.x0 - tol)
            & (pts[:, 0] <= self.x1 + tol)
            & (pts[:, 1] >= self.y0 - tol)
            & (pts[:, 1] <= self.y1 + tol)
        )

    def contains_rect(self, other: "Rect", tol: float = GEOM_TOL) -> bool:
        """Return True if this rectangle fully contains ``other``."""
        return (
            self.x0 <= other.x0 + tol
            and self.y0 <= other.y0 + tol
            and self.x1 >= other.x1 - tol
            and self.y1 >= other.y1 - tol
        )

    def intersection(self, other: "Rect") -> "Rect | None":
        x0, y0 = max(self.x0, other.x0), max(self.y0, other.y0)
        x1, y1 = min(self.x1, other.x1), min(self.y1, other.y1)
        if x1 - x0 <= GEOM_TOL or y1 - y0 <= GEOM_TOL:
            return None
        return Rect(x0, y0, x1, y1)

    def sides(self) -> List[Segment]:
        """Return the four sides counterclockwise from the bottom edge."""
        return [
            ((self.x0, self.y0), (self.x1, self.y0)),
            ((self.x1, self.y0), (self.x1, self.y1)),
            ((self.x1, self.y1), (self.x0, self.y1)),
            ((self.x0, self.y1), (self.x0, self.y0)),
        ]

    def interior_sides(self, domain: "Rect") -> List[Segment]:
        """Sides of this rectangle that are not contained in the boundary of ``domain``."""
        kept: List[Segment] = []
        for (ax, ay), (bx, by) in self.sides():
            if ax == bx and (
                abs(ax - domain.x0) <= GEOM_TOL or abs(ax - domain.x1) <= GEOM_TOL
            ):
                continue
            if ay == by and (
                abs(ay - domain.y0) <= GEOM_TOL or abs(ay - domain.y1) <= GEOM_TOL
            ):
                continue
            kept.append(((ax, ay), (bx, by)))
        return kept

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    def __str__(self) -> str:
        return f"[{self.x0:g},{self.x1:g}]x[{self.y0:g},{self.y1:g}]"


UNIT_SQUARE = Rect(0.0, 0.0, 1.0, 1.0)


def distance_to_segments(points: np.ndarray, segments: Iterable[Segment]) -> np.ndarray:
    """Euclidean distance from each point to the union of the given segments.

    Returns ``inf`` for every point when no segments are given.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    best = np.full(pts.shape[0], np.inf)
    for (ax, ay), (bx, by) in segments:
        a = np.array([ax, ay])
        ab = np.array([bx - ax, by - ay])
        length2 = float(ab @ ab)
        if length2 == 0.0:
            t = np.zeros(pts.shape[0])
        else:
            t = np.clip(((pts - a) @ ab) / length2, 0.0, 1.0)
        nearest = a + t[:, None] * ab
        best = np.minimum(best, np.linalg.norm(pts - nearest, axis=1))
    return best


def is_on_grid(value: float, spacing: float, origin: float = 0.0) -> bool:
    """Return True if ``value`` is an integer multiple of ``spacing`` from ``origin``."""
    ratio = (value - origin) / spacing
    return abs(ratio - round(ratio)) <= 1e-8
