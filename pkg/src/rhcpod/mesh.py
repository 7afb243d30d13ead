"""Uniform triangulation of the unit square and actuator geometry."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Uniform right-triangle mesh on (0,1)^2.

    Each of the n_side x n_side square cells is split along its lower-left
    to upper-right diagonal.  Attributes index the full node set; the
    interior map restricts to the (n_side-1)^2 Dirichlet-free unknowns.
    """

    n_side: int
    nodes: np.ndarray = field(repr=False)       # (n_nodes, 2)
    triangles: np.ndarray = field(repr=False)   # (n_tri, 3) node indices
    interior: np.ndarray = field(repr=False)    # interior node ids
    full_to_interior: np.ndarray = field(repr=False)  # -1 for boundary nodes

    @property
    def n_interior(self):
        return len(self.interior)

    @property
    def h(self):
        """Maximal triangle diameter (the cell diagonal)."""
        return np.sqrt(2.0) / self.n_side

    def interior_coords(self):
        return self.nodes[self.interior]


def build_mesh(n_side: int) -> Mesh:
    """Triangulate (0,1)^2 into 2*n_side^2 right triangles."""
    if n_side < 2:
        raise ValueError("n_side must be at least 2")
    xs = np.linspace(0.0, 1.0, n_side + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    tris = np.empty((2 * n_side * n_side, 3), dtype=np.int64)
    k = 0
    for iy in range(n_side):
        for ix in range(n_side):
            n00 = iy * (n_side + 1) + ix
            n10 = n00 + 1
            n01 = n00 + (n_side + 1)
            n11 = n01 + 1
            tris[k] = (n00, n10, n11)
            tris[k + 1] = (n00, n11, n01)
            k += 2

    on_boundary = (
        (nodes[:, 0] == 0.0)
        | (nodes[:, 0] == 1.0)
        | (nodes[:, 1] == 0.0)
        | (nodes[:, 1] == 1.0)
    )
    interior = np.where(~on_boundary)[0]
    full_to_interior = -np.ones(len(nodes), dtype=np.int64)
    full_to_interior[interior] = np.arange(len(interior))
    return Mesh(n_side, nodes, tris, interior, full_to_interior)


@dataclass(frozen=True)
class ActuatorLayout:
    """Pairwise disjoint open axis-aligned rectangles inside (0,1)^2."""

    rectangles: tuple  # of (x0, y0, x1, y1)

    def __post_init__(self):
        if len(self.rectangles) < 1:
            raise ValueError("layout needs at least one rectangle")
        for r in self.rectangles:
            x0, y0, x1, y1 = r
            if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
                raise ValueError(f"rectangle {r} is degenerate or outside (0,1)^2")
        rects = self.rectangles
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                if _overlap(rects[i], rects[j]):
                    raise ValueError(f"rectangles {i} and {j} overlap")

    @property
    def n_actuators(self):
        return len(self.rectangles)

    @property
    def total_area(self):
        return sum((x1 - x0) * (y1 - y0) for x0, y0, x1, y1 in self.rectangles)

    def summary(self):
        return (
            f"{self.n_actuators} actuators covering "
            f"{100.0 * self.total_area:.1f}% of the domain"
        )


def _overlap(a, b):
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def default_layout() -> ActuatorLayout:
    """Thirteen squares of side 0.1 covering 13% of the domain.

    A 3x3 grid centered at {0.2, 0.5, 0.8}^2 interleaved with a 2x2 grid at
    {0.35, 0.65}^2.  The published figure's exact coordinates are not
    available; this deterministic pattern preserves the actuator count and
    coverage fraction and can be overridden per run.
    """
    centers = [(cx, cy) for cy in (0.2, 0.5, 0.8) for cx in (0.2, 0.5, 0.8)]
    centers += [(cx, cy) for cy in (0.35, 0.65) for cx in (0.35, 0.65)]
    half = 0.05
    rects = tuple(
        (cx - half, cy - half, cx + half, cy + half) for cx, cy in centers
    )
    return ActuatorLayout(rects)
