"""P1 finite element assembly for the time-varying advection-diffusion-reaction system.

The semidiscrete system on the interior unknowns reads

    M y'(t) = A(t) y(t) + B u(t),      A(t) = -(nu*S + C(t) + D(t)),

where M and S are the exact P1 mass and stiffness matrices, C(t) is the
reaction matrix (a phi_j, phi_i), and D(t) carries the divergence-form
convection term: testing grad(b y) against phi and integrating by parts
gives -(b y, grad phi), so D(t)_ij = -(b phi_j, grad phi_i).  With zero
coefficients A(t) = -nu*S, which is dissipative.

Time-varying matrices use one-point barycentric quadrature: the coefficient
is frozen at the triangle centroid and the P1 products are integrated
exactly against that constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import ActuatorLayout, Mesh

# exact P1 products on the reference element: int phi_i phi_j = area*(1+delta_ij)/12
_MASS_LOCAL = (np.ones((3, 3)) + np.eye(3)) / 12.0


@dataclass
class _AssemblyMaps:
    """Precomputed geometry and scatter maps for fast reassembly."""

    area: np.ndarray          # (n_tri,)
    grads: np.ndarray         # (n_tri, 3, 2) gradients of the local hats
    centroids: np.ndarray     # (n_tri, 2)
    # one scatter slot per (triangle, local i, local j) with both nodes interior
    slot_tri: np.ndarray
    slot_i: np.ndarray
    slot_j: np.ndarray
    slot_entry: np.ndarray    # canonical nnz entry for each slot
    rows: np.ndarray          # canonical COO pattern, CSR-ordered
    cols: np.ndarray
    indptr: np.ndarray
    bandwidth: int


def _triangle_geometry(mesh: Mesh):
    p = mesh.nodes[mesh.triangles]
    v1 = p[:, 1] - p[:, 0]
    v2 = p[:, 2] - p[:, 0]
    det = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    if np.any(det <= 0):
        raise ValueError("mesh contains a non-positively-oriented triangle")
    area = 0.5 * det
    gx = np.stack(
        [p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]],
        axis=1,
    )
    gy = np.stack(
        [p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]],
        axis=1,
    )
    grads = np.stack([gx, gy], axis=2) / det[:, None, None]
    centroids = p.mean(axis=1)
    return area, grads, centroids


def _build_maps(mesh: Mesh) -> _AssemblyMaps:
    area, grads, centroids = _triangle_geometry(mesh)
    idx = mesh.full_to_interior[mesh.triangles]  # (n_tri, 3)

    tri, li, lj = [], [], []
    for i in range(3):
        for j in range(3):
            ok = (idx[:, i] >= 0) & (idx[:, j] >= 0)
            tri.append(np.where(ok)[0])
            li.append(np.full(ok.sum(), i))
            lj.append(np.full(ok.sum(), j))
    tri = np.concatenate(tri)
    li = np.concatenate(li)
    lj = np.concatenate(lj)
    r = idx[tri, li]
    c = idx[tri, lj]

    m = mesh.n_interior
    keys = r * m + c
    uniq, inv = np.unique(keys, return_inverse=True)
    rows = (uniq // m).astype(np.int64)
    cols = (uniq % m).astype(np.int64)
    # unique keys sorted row-major equal the CSR layout exactly
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    bandwidth = int(np.abs(rows - cols).max())
    return _AssemblyMaps(
        area, grads, centroids, tri, li, lj, inv, rows, cols, indptr, bandwidth
    )


@dataclass
class FemModel:
    """Assembled FE operators plus the coefficient callbacks.

    a_fn(t, pts) must return the reaction coefficient at the (n,2) points;
    b_fn(t, pts) the (n,2) convection field.  Matrices are immutable after
    assembly and safe to share read-only; the per-time-node operator cache
    lives in timestepping.OperatorCache.
    """

    mesh: Mesh
    nu: float
    a_fn: object
    b_fn: object
    M: sp.csr_matrix = field(repr=False)
    S: sp.csr_matrix = field(repr=False)
    B: np.ndarray = field(repr=False)
    layout: ActuatorLayout
    maps: _AssemblyMaps = field(repr=False)

    @property
    def m(self):
        return self.mesh.n_interior

    @property
    def n_controls(self):
        return self.B.shape[1]

    def mass_norm(self, v):
        return float(np.sqrt(v @ (self.M @ v)))

    def interpolate(self, f):
        """Nodal interpolation of f(pts) onto the interior unknowns."""
        return np.asarray(f(self.mesh.interior_coords()), dtype=float)


def assemble_static(mesh: Mesh, nu: float, maps: _AssemblyMaps | None = None):
    """Exact P1 mass and stiffness matrices on the interior unknowns."""
    maps = maps or _build_maps(mesh)
    tri, li, lj = maps.slot_tri, maps.slot_i, maps.slot_j
    mv = maps.area[tri] * _MASS_LOCAL[li, lj]
    sv = maps.area[tri] * np.einsum(
        "nd,nd->n", maps.grads[tri, li], maps.grads[tri, lj]
    )
    M = _scatter(maps, mesh.n_interior, mv)
    S = _scatter(maps, mesh.n_interior, sv)
    return M, S


def _scatter(maps: _AssemblyMaps, m: int, contrib):
    data = np.zeros(len(maps.rows))
    np.add.at(data, maps.slot_entry, contrib)
    return sp.csr_matrix((data, maps.cols, maps.indptr), shape=(m, m))


def assemble_timevarying(model: FemModel, t: float):
    """Reaction matrix C(t) and divergence-form convection matrix D(t).

    Both share the sparsity pattern of M.  Signs are chosen so the system
    matrix is A(t) = -(nu*S + C(t) + D(t)).
    """
    cv, dv = _timevarying_data(model, t)
    m = model.m
    return _scatter(model.maps, m, cv), _scatter(model.maps, m, dv)


def _timevarying_data(model: FemModel, t: float):
    maps = model.maps
    tri, li, lj = maps.slot_tri, maps.slot_i, maps.slot_j
    ac = np.asarray(model.a_fn(t, maps.centroids), dtype=float)
    bc = np.asarray(model.b_fn(t, maps.centroids), dtype=float)
    if not (np.all(np.isfinite(ac)) and np.all(np.isfinite(bc))):
        raise ValueError(f"non-finite coefficient value at t={t}")
    cv = ac[tri] * maps.area[tri] * _MASS_LOCAL[li, lj]
    # -(b phi_j, grad phi_i): int_T phi_j = area/3, grad phi_i constant
    dv = -maps.area[tri] / 3.0 * np.einsum("nd,nd->n", maps.grads[tri, li], bc[tri])
    return cv, dv


def system_matrix(model: FemModel, t: float):
    """A(t) = -(nu*S + C(t) + D(t)); equals -nu*S for zero coefficients."""
    C, D = assemble_timevarying(model, t)
    return (-model.nu * model.S - C - D).tocsr()


def system_data(model: FemModel, t: float, nu_s_data):
    """Canonical-pattern data vector of A(t), for cached reassembly."""
    cv, dv = _timevarying_data(model, t)
    data = np.zeros(len(model.maps.rows))
    np.add.at(data, model.maps.slot_entry, cv + dv)
    return -nu_s_data - data


def assemble_control(mesh: Mesh, layout: ActuatorLayout, maps=None):
    """Control matrix B[j, i] = integral of hat function j over rectangle i.

    Computed exactly: each rectangle is clipped against each triangle and
    the affine basis functions are integrated over the clipped polygon.
    """
    maps = maps or _build_maps(mesh)
    m = mesh.n_interior
    B = np.zeros((m, layout.n_actuators))
    p = mesh.nodes[mesh.triangles]
    idx = mesh.full_to_interior[mesh.triangles]
    for i, rect in enumerate(layout.rectangles):
        x0, y0, x1, y1 = rect
        # only triangles whose bbox meets the rectangle can contribute
        tmin = p.min(axis=1)
        tmax = p.max(axis=1)
        cand = np.where(
            (tmax[:, 0] > x0) & (tmin[:, 0] < x1) & (tmax[:, 1] > y0) & (tmin[:, 1] < y1)
        )[0]
        for t in cand:
            poly = _clip_triangle(p[t], rect)
            if len(poly) < 3:
                continue
            vals = _integrate_hats(poly, p[t], maps.grads[t])
            for loc in range(3):
                r = idx[t, loc]
                if r >= 0:
                    B[r, i] += vals[loc]
    return B


def _clip_triangle(tri_pts, rect):
    """Sutherland-Hodgman clip of a triangle by an axis-aligned rectangle."""
    x0, y0, x1, y1 = rect
    poly = [tuple(q) for q in tri_pts]
    for axis, bound, keep_leq in (
        (0, x0, False),
        (0, x1, True),
        (1, y0, False),
        (1, y1, True),
    ):
        if not poly:
            break
        out = []
        n = len(poly)
        for k in range(n):
            a = poly[k]
            b = poly[(k + 1) % n]
            ain = a[axis] <= bound if keep_leq else a[axis] >= bound
            bin_ = b[axis] <= bound if keep_leq else b[axis] >= bound
            if ain:
                out.append(a)
            if ain != bin_:
                s = (bound - a[axis]) / (b[axis] - a[axis])
                out.append(
                    (a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]))
                )
        poly = out
    return poly


def _integrate_hats(poly, tri_pts, grads):
    """Exact integrals of the three local hats over a convex polygon.

    The polygon is fan-triangulated; an affine function integrates over a
    triangle to area times the mean of its vertex values.
    """
    verts = np.asarray(poly)
    # hat values at polygon vertices via the affine extension from tri_pts[0]
    lam = np.empty((len(verts), 3))
    base = np.array([1.0, 0.0, 0.0])
    for loc in range(3):
        lam[:, loc] = base[loc] + (verts - tri_pts[0]) @ grads[loc]
    totals = np.zeros(3)
    for k in range(1, len(verts) - 1):
        tri = (0, k, k + 1)
        q = verts[list(tri)]
        a2 = (q[1, 0] - q[0, 0]) * (q[2, 1] - q[0, 1]) - (q[1, 1] - q[0, 1]) * (
            q[2, 0] - q[0, 0]
        )
        totals += abs(a2) / 2.0 * lam[list(tri)].mean(axis=0)
    return totals


def build_fem_model(
    n_side: int,
    nu: float,
    layout: ActuatorLayout | None = None,
    a_fn=None,
    b_fn=None,
) -> FemModel:
    """Assemble the full model; coefficients default to the shipped benchmark."""
    layout = layout or _default_layout()
    a_fn = a_fn or default_reaction
    b_fn = b_fn or default_convection
    mesh = build_mesh_cached(n_side)
    maps = _build_maps(mesh)
    M, S = assemble_static(mesh, nu, maps)
    B = assemble_control(mesh, layout, maps)
    return FemModel(mesh, nu, a_fn, b_fn, M, S, B, layout, maps)


def _default_layout():
    from .mesh import default_layout

    return default_layout()


def build_mesh_cached(n_side: int) -> Mesh:
    from .mesh import build_mesh

    return build_mesh(n_side)


# Benchmark problem data: an exponentially unstable reaction dominating the
# diffusion, a mildly rotating convection field, and a single-bump start.

def default_reaction(t, pts):
    return -2.0 - 0.8 * np.abs(np.sin(t + pts[:, 0]))


def default_convection(t, pts):
    return np.column_stack(
        [
            0.1 * np.cos(t) - 0.01 * (pts[:, 0] + pts[:, 1]),
            0.2 * pts[:, 0] * pts[:, 1] * np.cos(t),
        ]
    )


def default_initial_state(pts):
    return 3.0 * np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
