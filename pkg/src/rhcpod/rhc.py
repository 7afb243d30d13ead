"""Full-order receding horizon loop, uncontrolled reference run, and metrics.

Each sampling interval solves one open-loop problem from the currently
reached state, keeps the first delta-segment of the computed control, and
advances the full-order state with exactly the stored control nodes.  The
stored closed-loop trajectory therefore coincides bitwise with a single
re-integration of the stored control, and the state is continuous at the
sampling instants by construction.  At a sampling instant the stored
control node carries the left window's endpoint value (the node control is
single-valued; consecutive windows agree there up to optimizer tolerance).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, build_model
from .errors import NumericsError
from .fbs import solve_open_loop
from .fem import FemModel, default_initial_state
from .timestepping import eval_cost, integrate_state, mass_norm_series
from .trajectory import TimeGrid, Trajectory, trapezoid_weights


@dataclass
class WindowStat:
    index: int
    t_start: float
    J: float
    iterations: int
    seconds: float
    status: str


@dataclass
class RhcResult:
    config: RunConfig
    mode: str
    model: FemModel = field(repr=False)
    y_rh: Trajectory = field(repr=False)
    u_rh: Trajectory = field(repr=False)
    per_window: list
    norm_series: np.ndarray = field(repr=False)
    l2_norm: float
    terminal_norm: float
    total_cost: float
    zeta: float
    decay_c: float
    active_counts: np.ndarray = field(repr=False)
    ell_y: int | None = None
    ell_p: int | None = None
    basis_seconds: float = 0.0
    sigma_y: np.ndarray | None = field(default=None, repr=False)
    sigma_p: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean_window_seconds(self):
        if not self.per_window:
            return 0.0
        return float(np.mean([w.seconds for w in self.per_window]))

    @property
    def mean_reduced_window_seconds(self):
        """Mean over the windows solved on the reduced model (k >= 1)."""
        tail = [w.seconds for w in self.per_window if w.index >= 1]
        return float(np.mean(tail)) if tail else 0.0

    @property
    def first_window_seconds(self):
        return self.per_window[0].seconds if self.per_window else 0.0

    def write_outputs(self, outdir):
        import os

        os.makedirs(outdir, exist_ok=True)
        times = self.y_rh.grid.times()
        _write_csv(
            os.path.join(outdir, "state_norms.csv"),
            "t,norm_M",
            np.column_stack([times, self.norm_series]),
        )
        _write_csv(
            os.path.join(outdir, "controls.csv"),
            "t," + ",".join(f"u_{i + 1}" for i in range(self.u_rh.n_rows)),
            np.column_stack([times, self.u_rh.values.T]),
        )
        _write_csv(
            os.path.join(outdir, "windows.csv"),
            "k,t_k,J,iters,seconds",
            [
                (w.index, w.t_start, w.J, w.iterations, w.seconds)
                for w in self.per_window
            ],
        )
        _write_csv(
            os.path.join(outdir, "summary.csv"),
            "l2_norm,terminal_norm,total_cost,zeta,mean_window_seconds",
            [
                (
                    self.l2_norm,
                    self.terminal_norm,
                    self.total_cost,
                    self.zeta,
                    self.mean_window_seconds,
                )
            ],
        )
        if self.mode == "pod" and self.sigma_y is not None:
            rows = [("ell_y", 0, self.ell_y), ("ell_p", 0, self.ell_p)]
            rows += [("sigma_y", i, s) for i, s in enumerate(self.sigma_y)]
            rows += [("sigma_p", i, s) for i, s in enumerate(self.sigma_p)]
            _write_csv(
                os.path.join(outdir, "basis_info.csv"), "quantity,index,value", rows
            )


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{v:.6g}"


def fit_decay_rate(times, norms, t_start=1.0):
    """Least-squares fit log|y(t)| ~ log(c) - (zeta/2) t past the transient.

    Returns (zeta, c); zeta > 0 certifies observed exponential decay.
    Returns None when the trajectory is identically zero on the window.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    mask = (times >= t_start) & (norms > 0.0)
    if mask.sum() < 2:
        return None
    slope, intercept = np.polyfit(times[mask], np.log(norms[mask]), 1)
    return -2.0 * slope, float(np.exp(intercept))


def warm_start(u_prev, wgrid: TimeGrid, n_delta: int, n_controls: int) -> Trajectory:
    """Shift the previous window's control by the sampling offset, zero tail."""
    vals = np.zeros((n_controls, wgrid.n_nodes))
    if u_prev is not None:
        tail = u_prev[:, n_delta:]
        keep = min(tail.shape[1], wgrid.n_nodes)
        vals[:, :keep] = tail[:, :keep]
    return Trajectory(wgrid, vals)


def compute_metrics(result_args, model, config, y_vals, u_vals, full_grid):
    y_rh = Trajectory(full_grid, y_vals)
    u_rh = Trajectory(full_grid, u_vals)
    norms = mass_norm_series(model, y_rh)
    w = trapezoid_weights(full_grid)
    if config.norm == "mass":
        spatial_sq = norms**2
    else:
        spatial_sq = np.einsum("ij,ij->j", y_vals, y_vals)
    l2 = float(np.sqrt(np.sum(w * spatial_sq)))
    terminal = float(norms[-1])
    total_cost, _, _ = eval_cost(model, full_grid, y_rh, u_rh, config.beta)
    fit = fit_decay_rate(full_grid.times(), norms)
    zeta, c = fit if fit is not None else (float("nan"), float("nan"))
    active = np.count_nonzero(u_vals, axis=0)
    return RhcResult(
        config=config,
        model=model,
        y_rh=y_rh,
        u_rh=u_rh,
        norm_series=norms,
        l2_norm=l2,
        terminal_norm=terminal,
        total_cost=total_cost,
        zeta=zeta,
        decay_c=c,
        active_counts=active,
        **result_args,
    )


def initial_state(model: FemModel):
    return model.interpolate(default_initial_state)


def run_uncontrolled(config: RunConfig, model: FemModel | None = None) -> RhcResult:
    """Forward integration with zero control over (0, T_inf)."""
    model = model or build_model(config)
    n_steps = int(round(config.T_inf / config.dt))
    grid = TimeGrid(0.0, n_steps, config.dt)
    u = Trajectory.zeros(grid, model.n_controls)
    y = integrate_state(model, grid, u, initial_state(model))
    return compute_metrics(
        dict(mode="uncontrolled", per_window=[]),
        model,
        config,
        y.values,
        u.values,
        grid,
    )


def run_rhc_fom(config: RunConfig, model: FemModel | None = None) -> RhcResult:
    """Receding horizon loop on the full-order model."""
    model = model or build_model(config)
    n_delta = int(round(config.delta / config.dt))
    n_T = int(round(config.T / config.dt))
    n_windows = int(round(config.T_inf / config.delta))
    N = model.n_controls

    full_grid = TimeGrid(0.0, n_delta * n_windows, config.dt)
    y_vals = np.empty((model.m, full_grid.n_nodes))
    u_vals = np.zeros((N, full_grid.n_nodes))
    y_cur = initial_state(model)
    y_vals[:, 0] = y_cur

    per_window = []
    u_prev = None
    for k in range(n_windows):
        t_k = k * config.delta
        wgrid = TimeGrid(t_k, n_T, config.dt)
        u_init = warm_start(u_prev, wgrid, n_delta, N)
        tic = time.perf_counter()
        sol = solve_open_loop(
            model,
            wgrid,
            y_cur,
            u_init,
            config.beta,
            config.fbs,
            prox_opts=config.prox_opts(),
            verbose=config.verbose,
        )
        y_cur = _apply_window(
            model, config, sol.u_opt.values, k, n_delta, y_cur, y_vals, u_vals
        )
        seconds = time.perf_counter() - tic
        per_window.append(
            WindowStat(k, t_k, sol.J_value, sol.iterations, seconds, sol.status)
        )
        u_prev = sol.u_opt.values
    return compute_metrics(
        dict(mode="fom", per_window=per_window), model, config, y_vals, u_vals, full_grid
    )


def _apply_window(model, config, u_opt_vals, k, n_delta, y_cur, y_vals, u_vals):
    """Adopt the window's delta-segment of control and advance the state.

    The stored control node at the window start keeps the previous
    window's value; re-integrating the stored control reproduces the
    stored state exactly.
    """
    j0 = k * n_delta
    if k == 0:
        u_vals[:, 0] = u_opt_vals[:, 0]
    u_vals[:, j0 + 1 : j0 + n_delta + 1] = u_opt_vals[:, 1 : n_delta + 1]
    seg_grid = TimeGrid(k * config.delta, n_delta, config.dt)
    seg = integrate_state(
        model,
        seg_grid,
        Trajectory(seg_grid, u_vals[:, j0 : j0 + n_delta + 1]),
        y_cur,
    )
    y_vals[:, j0 + 1 : j0 + n_delta + 1] = seg.values[:, 1:]
    return seg.values[:, -1].copy()


def reintegration_error(result: RhcResult) -> float:
    """Relative L2 gap between the stored state and one re-simulation."""
    y2 = integrate_state(
        result.model, result.y_rh.grid, result.u_rh, result.y_rh.values[:, 0]
    )
    w = trapezoid_weights(result.y_rh.grid)
    diff = result.y_rh.values - y2.values
    num = np.sqrt(np.sum(w * np.einsum("ij,ij->j", diff, diff)))
    den = np.sqrt(np.sum(w * np.einsum("ij,ij->j", result.y_rh.values, result.y_rh.values)))
    return float(num / den) if den > 0 else float(num)
