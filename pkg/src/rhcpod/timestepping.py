"""Crank-Nicolson state integration, the exact discrete adjoint, and the cost.

The state scheme on a window grid (t_0, ..., t_n), t_k = t_0 + k*dt, is

    (M - dt/2*A(t_{k+1})) y^{k+1} = (M + dt/2*A(t_k)) y^k
                                    + dt/2*B*(u^k + u^{k+1}),

with controls stored at the nodes.  The adjoint below is the algebraic
transpose of this recursion driven by the trapezoidal cost quadrature, so
that B^T p is the exact gradient of the smooth cost part in the
trapezoid-weighted inner product (discretize-then-optimize).

Step systems are solved with LAPACK banded LU on the fly; assembled A(t)
operators are cached per absolute time node (windows revisit nodes since
the sampling time is a multiple of dt).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import NumericsError
from .fem import FemModel, system_data
from .trajectory import TimeGrid, Trajectory, trapezoid_weights


class OperatorCache:
    """Assembled A(t) data per absolute node index (t = index*dt).

    Reads may be concurrent; insertion is single-writer per node. The data
    vectors live on the model's fixed canonical sparsity pattern.
    """

    def __init__(self, model: FemModel, dt: float):
        self.model = model
        self.dt = dt
        self._nu_s_data = model.nu * model.S.data
        self._store = {}

    def a_data(self, node: int):
        data = self._store.get(node)
        if data is None:
            data = system_data(self.model, node * self.dt, self._nu_s_data)
            self._store[node] = data
        return data


class FullOrderSystem:
    """Banded-solver view of a FemModel at a fixed step size."""

    def __init__(self, model: FemModel, dt: float):
        self.model = model
        self.dt = dt
        self.cache = OperatorCache(model, dt)
        maps = model.maps
        m = model.m
        self.dim = m
        self.S = model.S
        self.B = model.B
        self.mass = model.M
        bw = maps.bandwidth
        self._l = self._u = bw
        self._rows = maps.rows
        self._cols = maps.cols
        self._band_fwd = bw + maps.rows - maps.cols
        self._band_adj = bw + maps.cols - maps.rows
        self._ab = np.zeros((2 * bw + 1, m))
        self._m_data = model.M.data
        self._tpl = sp.csr_matrix(
            (np.zeros(len(maps.rows)), maps.cols.copy(), maps.indptr.copy()),
            shape=(m, m),
        )

    def _a(self, node):
        return self.cache.a_data(node)

    def a_apply(self, node, X, transpose=False):
        """A(node) @ X (A' with transpose=True); reuses the shared template."""
        self._tpl.data[:] = self._a(node)
        return (self._tpl.T if transpose else self._tpl) @ X

    def matvec_F(self, node, v):
        """(M + dt/2*A(node)) @ v."""
        self._tpl.data[:] = self._m_data + 0.5 * self.dt * self._a(node)
        return self._tpl @ v

    def matvec_F_T(self, node, v):
        self._tpl.data[:] = self._m_data + 0.5 * self.dt * self._a(node)
        return self._tpl.T @ v

    def solve_E(self, node, rhs):
        """Solve (M - dt/2*A(node)) x = rhs."""
        self._ab.fill(0.0)
        self._ab[self._band_fwd, self._cols] = (
            self._m_data - 0.5 * self.dt * self._a(node)
        )
        return sla.solve_banded(
            (self._l, self._u), self._ab, rhs, check_finite=False
        )

    def solve_E_T(self, node, rhs):
        self._ab.fill(0.0)
        self._ab[self._band_adj, self._rows] = (
            self._m_data - 0.5 * self.dt * self._a(node)
        )
        return sla.solve_banded(
            (self._l, self._u), self._ab, rhs, check_finite=False
        )


def get_system(model, dt: float):
    """System view for a FemModel / ReducedModel, cached per step size."""
    if hasattr(model, "solve_E"):
        if abs(model.dt - dt) > 1e-12:
            raise ValueError("system step size does not match the grid")
        return model
    store = getattr(model, "_systems", None)
    if store is None:
        store = {}
        object.__setattr__(model, "_systems", store)
    key = round(dt, 15)
    if key not in store:
        store[key] = model._make_system(dt) if hasattr(model, "_make_system") else FullOrderSystem(model, dt)
    return store[key]


def integrate_state(model, grid: TimeGrid, u: Trajectory, y0) -> Trajectory:
    """March the Crank-Nicolson state recursion over the window."""
    sys_ = get_system(model, grid.dt)
    y0 = np.asarray(y0, dtype=float)
    if u.values.shape[1] != grid.n_nodes:
        raise ValueError("control trajectory does not match the grid")
    vals = np.empty((sys_.dim, grid.n_nodes))
    vals[:, 0] = y0
    y = y0
    B = sys_.B
    half_dt = 0.5 * grid.dt
    for k in range(grid.n_steps):
        node = grid.node_index(k)
        rhs = sys_.matvec_F(node, y) + half_dt * (B @ (u.values[:, k] + u.values[:, k + 1]))
        y = sys_.solve_E(node + 1, rhs)
        vals[:, k + 1] = y
    if not np.all(np.isfinite(vals)):
        raise NumericsError("state integration produced non-finite values")
    return Trajectory(grid, vals)


def integrate_adjoint(model, grid: TimeGrid, y: Trajectory) -> Trajectory:
    """Exact discrete adjoint of the state recursion under the trapezoidal cost.

    Backward transposed steps with sources c_j*S*y_j (c_j the trapezoid
    weights) produce multipliers nu_1..nu_n; the returned node trajectory
    averages consecutive multipliers so that B^T p is the exact weighted
    gradient of the smooth cost part.  Its terminal column is O(dt), the
    discrete counterpart of the vanishing continuous terminal condition.
    """
    sys_ = get_system(model, grid.dt)
    n = grid.n_steps
    c = trapezoid_weights(grid)
    S = sys_.S
    nus = np.empty((sys_.dim, n + 1))  # nus[:, j] = nu_j, slot 0 unused
    nu_next = np.zeros(sys_.dim)
    for j in range(n, 0, -1):
        node = grid.node_index(j)
        rhs = sys_.matvec_F_T(node, nu_next) + c[j] * (S @ y.values[:, j])
        nu_next = sys_.solve_E_T(node, rhs)
        nus[:, j] = nu_next
    vals = np.empty((sys_.dim, n + 1))
    vals[:, 0] = nus[:, 1]
    if n >= 2:
        vals[:, 1:n] = 0.5 * (nus[:, 1:n] + nus[:, 2 : n + 1])
    vals[:, n] = nus[:, n]
    if not np.all(np.isfinite(vals)):
        raise NumericsError("adjoint integration produced non-finite values")
    return Trajectory(grid, vals)


def eval_cost(model, grid: TimeGrid, y: Trajectory, u: Trajectory, beta: float):
    """Trapezoidal cost J = 1/2 int y'Sy dt + beta/2 int |u|_1^2 dt.

    Returns (J, F_part, G_part).
    """
    sys_ = get_system(model, grid.dt)
    c = trapezoid_weights(grid)
    sy = sys_.S @ y.values
    f_part = 0.5 * float(np.sum(c * np.einsum("ij,ij->j", y.values, sy)))
    g_part = 0.5 * beta * float(np.sum(c * np.abs(u.values).sum(axis=0) ** 2))
    return f_part + g_part, f_part, g_part


def mass_norm_series(model, y: Trajectory):
    """|y(t_k)|_M for every node of the trajectory."""
    M = model.mass if hasattr(model, "mass") else model.M
    Mv = M @ y.values
    return np.sqrt(np.maximum(0.0, np.einsum("ij,ij->j", y.values, Mv)))
