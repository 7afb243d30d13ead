"""Weighted POD bases from optimization snapshots and Galerkin reduction.

A basis of rank ell is extracted from the thin SVD of the weighted
snapshot matrix ``Yhat = L' Y D^{1/2}`` where ``W = L L'`` is the Cholesky
factor of the spatial weight (mass or stiffness) and D holds the temporal
quadrature weights.  Columns of ``Psi = L^{-T} Psihat`` are W-orthonormal
and the familiar tail identity holds: the weighted reconstruction error of
the snapshots equals the sum of the discarded squared singular values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .fem import FemModel
from .trajectory import TimeGrid, trapezoid_weights


@dataclass
class SnapshotSet:
    """State or adjoint snapshots with strictly positive temporal weights."""

    columns: np.ndarray = field(repr=False)   # (m, n_snap)
    weights: np.ndarray = field(repr=False)   # (n_snap,)
    w_id: str = "mass"

    def __post_init__(self):
        if self.columns.ndim != 2:
            raise ValueError("snapshot columns must form a matrix")
        if self.weights.shape != (self.columns.shape[1],):
            raise ValueError("one weight per snapshot column required")
        if np.any(self.weights <= 0):
            raise ValueError("snapshot weights must be strictly positive")

    @property
    def n_snapshots(self):
        return self.columns.shape[1]


def snapshots_from_log(snapshot_log, grid: TimeGrid, which: str, w_id="mass"):
    """Stack every logged iterate's trajectory; trapezoidal weights per sweep."""
    pick = 0 if which == "state" else 1
    cols = np.concatenate([pair[pick] for pair in snapshot_log], axis=1)
    w = np.tile(trapezoid_weights(grid), len(snapshot_log))
    return SnapshotSet(cols, w, w_id)


@dataclass
class PodBasis:
    Psi: np.ndarray = field(repr=False)     # (m, ell), W-orthonormal columns
    sigma: np.ndarray = field(repr=False)   # all singular values, descending
    ell: int
    tol: float
    w_id: str = "mass"

    @property
    def rank(self):
        return len(self.sigma)


def compute_pod_basis(snaps: SnapshotSet, W, tol: float, max_rank=None) -> PodBasis:
    """Truncated W-weighted POD of a snapshot set.

    The truncation rank is the smallest ell with sigma_{ell+1} <= tol
    (sigma beyond the numerical rank counts as zero); at least one mode is
    always kept.
    """
    Wd = W.toarray() if sp.issparse(W) else np.asarray(W, dtype=float)
    try:
        L = np.linalg.cholesky(Wd)
    except np.linalg.LinAlgError as exc:
        raise ValueError("POD weight matrix must be symmetric positive definite") from exc

    Yhat = L.T @ (snaps.columns * np.sqrt(snaps.weights)[None, :])
    Psihat, sigma, _ = sla.svd(Yhat, full_matrices=False, check_finite=False)

    nrank = int(np.sum(sigma > sigma[0] * max(Yhat.shape) * np.finfo(float).eps)) if sigma[0] > 0 else 0
    nrank = max(nrank, 1)
    sig_next = np.append(sigma[:nrank], 0.0)  # sig_next[l] = sigma_{l+1}
    if tol >= sigma[0]:
        warnings.warn("POD tolerance exceeds the leading singular value; keeping one mode")
        ell = 1
    else:
        ell = int(np.argmax(sig_next[1:] <= tol)) + 1
    if max_rank is not None:
        ell = min(ell, int(max_rank))
    ell = min(ell, nrank)

    Psi = sla.solve_triangular(L.T, Psihat[:, :ell], lower=False, check_finite=False)
    return PodBasis(Psi, sigma, ell, tol, snaps.w_id)


def reconstruction_error(snaps: SnapshotSet, basis: PodBasis, W, ell=None):
    """Weighted mean-square snapshot error of the rank-ell reconstruction."""
    ell = basis.ell if ell is None else ell
    Psi = basis.Psi[:, :ell]
    WZ = W @ snaps.columns
    coeff = Psi.T @ WZ
    resid = snaps.columns - Psi @ coeff
    Wr = W @ resid
    return float(np.sum(snaps.weights * np.einsum("ij,ij->j", resid, Wr)))


@dataclass
class ReducedModel:
    """Galerkin projections of the full operators onto the POD bases.

    State-space quantities are ell_y-dimensional; the adjoint-side
    projections with the adjoint basis are kept for diagnostics and for
    the projected-adjoint gradient mode.  Reduced A(t) matrices are cached
    per absolute time node and shared across receding horizon windows.
    """

    fom: FemModel
    basis_y: PodBasis
    basis_p: PodBasis
    M_r: np.ndarray = field(repr=False)
    S_r: np.ndarray = field(repr=False)
    B_r: np.ndarray = field(repr=False)
    M_p: np.ndarray = field(repr=False)
    S_py: np.ndarray = field(repr=False)
    B_p: np.ndarray = field(repr=False)

    def __post_init__(self):
        self._a_cache = {}
        self._ap_cache = {}

    @property
    def ell_y(self):
        return self.basis_y.ell

    @property
    def ell_p(self):
        return self.basis_p.ell

    def reduced_a(self, node: int, dt: float):
        """Psi_y' A(t) Psi_y at t = node*dt (cached)."""
        mat = self._a_cache.get(node)
        if mat is None:
            from .timestepping import get_system

            sys_ = get_system(self.fom, dt)
            mat = self.basis_y.Psi.T @ sys_.a_apply(node, self.basis_y.Psi)
            self._a_cache[node] = mat
        return mat

    def reduced_a_adjoint(self, node: int, dt: float):
        """Psi_p' A(t)' Psi_p at t = node*dt (cached)."""
        mat = self._ap_cache.get(node)
        if mat is None:
            from .timestepping import get_system

            sys_ = get_system(self.fom, dt)
            mat = self.basis_p.Psi.T @ sys_.a_apply(node, self.basis_p.Psi, transpose=True)
            self._ap_cache[node] = mat
        return mat

    def reduce_state(self, y):
        """M-orthogonal projection coefficients Psi_y' M y of a full state."""
        return self.basis_y.Psi.T @ (self.fom.M @ y)

    def lift_state(self, y_r):
        return self.basis_y.Psi @ y_r

    def lift_adjoint(self, p_r):
        return self.basis_p.Psi @ p_r

    def _make_system(self, dt: float):
        return ReducedSystem(self, dt)

    def write_basis(self, path_psi, path_sigma, which="state"):
        basis = self.basis_y if which == "state" else self.basis_p
        np.savetxt(path_psi, basis.Psi, delimiter=",")
        np.savetxt(path_sigma, basis.sigma, delimiter=",")


def reduce_operators(model: FemModel, basis_y: PodBasis, basis_p: PodBasis) -> ReducedModel:
    """Project mass, stiffness, and control operators onto the bases."""
    if basis_y.Psi.shape[0] != model.m or basis_p.Psi.shape[0] != model.m:
        raise ValueError("bases and model live on different meshes")
    Py, Pp = basis_y.Psi, basis_p.Psi
    return ReducedModel(
        fom=model,
        basis_y=basis_y,
        basis_p=basis_p,
        M_r=Py.T @ (model.M @ Py),
        S_r=Py.T @ (model.S @ Py),
        B_r=Py.T @ model.B,
        M_p=Pp.T @ (model.M @ Pp),
        S_py=Pp.T @ (model.S @ Py),
        B_p=Pp.T @ model.B,
    )


class ReducedSystem:
    """Dense stepping view of a ReducedModel at a fixed step size.

    E(t)^{-1} = (M_r - dt/2*A_r(t))^{-1} is formed once per node; forward
    and transposed solves are then single GEMVs.
    """

    def __init__(self, rm: ReducedModel, dt: float):
        self.rm = rm
        self.dt = dt
        self.dim = rm.ell_y
        self.S = rm.S_r
        self.B = rm.B_r
        self.mass = rm.M_r
        self._einv = {}

    def _a(self, node):
        return self.rm.reduced_a(node, self.dt)

    def _e_inv(self, node):
        mat = self._einv.get(node)
        if mat is None:
            mat = np.linalg.inv(self.mass - 0.5 * self.dt * self._a(node))
            self._einv[node] = mat
        return mat

    def matvec_F(self, node, v):
        return self.mass @ v + 0.5 * self.dt * (self._a(node) @ v)

    def matvec_F_T(self, node, v):
        return self.mass.T @ v + 0.5 * self.dt * (self._a(node).T @ v)

    def solve_E(self, node, rhs):
        return self._e_inv(node) @ rhs

    def solve_E_T(self, node, rhs):
        return self._e_inv(node).T @ rhs
