"""Uniform time grids and node-indexed time series."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with n_steps intervals of size dt starting at t0."""

    t0: float
    n_steps: int
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")

    @property
    def horizon(self):
        return self.n_steps * self.dt

    @property
    def n_nodes(self):
        return self.n_steps + 1

    def times(self):
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def node_index(self, k):
        """Absolute node index of local node k, for caches keyed by t = j*dt.

        Valid when t0 is itself a grid-aligned multiple of dt, which holds
        for every window the receding horizon driver creates.
        """
        return int(round(self.t0 / self.dt)) + k


@dataclass
class Trajectory:
    """Matrix of one column per time node (rows = state dim or actuator count)."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("trajectory values must be 2-D")
        if self.values.shape[1] != self.grid.n_nodes:
            raise ValueError(
                f"trajectory has {self.values.shape[1]} columns, "
                f"grid has {self.grid.n_nodes} nodes"
            )

    @property
    def n_rows(self):
        return self.values.shape[0]

    def copy(self):
        return Trajectory(self.grid, self.values.copy())

    def column(self, k):
        return self.values[:, k]

    @classmethod
    def zeros(cls, grid: TimeGrid, n_rows: int):
        return cls(grid, np.zeros((n_rows, grid.n_nodes)))

    def write_csv(self, path, prefix="v"):
        """CSV export: time in the first column, one named column per row."""
        times = self.grid.times()
        header = "t," + ",".join(f"{prefix}_{i + 1}" for i in range(self.n_rows))
        data = np.column_stack([times, self.values.T])
        np.savetxt(path, data, delimiter=",", header=header, comments="")


def trapezoid_weights(grid: TimeGrid):
    """Temporal quadrature weights (dt at interior nodes, dt/2 at endpoints)."""
    w = np.full(grid.n_nodes, grid.dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def weighted_norm(traj: Trajectory):
    """Discrete L2(t0, t0+T; R^rows) norm with trapezoidal weights."""
    w = trapezoid_weights(traj.grid)
    return float(np.sqrt(np.sum(w * np.sum(traj.values**2, axis=0))))


def weighted_inner(a: Trajectory, b: Trajectory):
    """Trapezoid-weighted inner product of two trajectories on one grid."""
    w = trapezoid_weights(a.grid)
    return float(np.sum(w * np.sum(a.values * b.values, axis=0)))
