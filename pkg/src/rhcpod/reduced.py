"""POD-accelerated receding horizon loop and full-vs-reduced error reports.

The first window is solved on the full-order model with snapshot logging;
POD bases for state and adjoint are extracted from all logged iterates.
Every subsequent window solves the reduced open-loop problem (reduced
initial value Psi_y' M y, the M-orthogonal projection coefficients) and
then propagates the full-order state over the sampling interval with the
computed control, so the closed-loop state is always full-order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, build_model
from .errors import NumericsError
from .fbs import solve_open_loop
from .fem import FemModel
from .pod import compute_pod_basis, reduce_operators, snapshots_from_log
from .rhc import (
    RhcResult,
    WindowStat,
    _apply_window,
    compute_metrics,
    initial_state,
    warm_start,
)
from .timestepping import mass_norm_series
from .trajectory import TimeGrid, Trajectory


def run_rhc_pod(config: RunConfig, model: FemModel | None = None) -> RhcResult:
    """Receding horizon loop with reduced-order window solves (training first)."""
    model = model or build_model(config)
    n_delta = int(round(config.delta / config.dt))
    n_T = int(round(config.T / config.dt))
    n_train = int(round(config.T_train / config.dt))
    n_windows = int(round(config.T_inf / config.delta))
    N = model.n_controls

    full_grid = TimeGrid(0.0, n_delta * n_windows, config.dt)
    y_vals = np.empty((model.m, full_grid.n_nodes))
    u_vals = np.zeros((N, full_grid.n_nodes))
    y_cur = initial_state(model)
    y_vals[:, 0] = y_cur

    # training window: full-order solve over (0, T_train), all iterates logged
    train_grid = TimeGrid(0.0, n_train, config.dt)
    tic = time.perf_counter()
    sol0 = solve_open_loop(
        model,
        train_grid,
        y_cur,
        Trajectory.zeros(train_grid, N),
        config.beta,
        config.fbs,
        prox_opts=config.prox_opts(),
        log_snapshots=True,
        verbose=config.verbose,
    )
    y_cur = _apply_window(model, config, sol0.u_opt.values, 0, n_delta, y_cur, y_vals, u_vals)
    first_seconds = time.perf_counter() - tic
    per_window = [
        WindowStat(0, 0.0, sol0.J_value, sol0.iterations, first_seconds, sol0.status)
    ]

    tic = time.perf_counter()
    W = model.M if config.pod_weight == "mass" else model.S
    snaps_y = snapshots_from_log(sol0.snapshot_log, train_grid, "state", config.pod_weight)
    snaps_p = snapshots_from_log(sol0.snapshot_log, train_grid, "adjoint", config.pod_weight)
    basis_y = compute_pod_basis(snaps_y, W, config.pod_tol)
    basis_p = compute_pod_basis(snaps_p, W, config.pod_tol)
    rom = reduce_operators(model, basis_y, basis_p)
    basis_seconds = time.perf_counter() - tic

    u_prev = sol0.u_opt.values
    for k in range(1, n_windows):
        t_k = k * config.delta
        wgrid = TimeGrid(t_k, n_T, config.dt)
        u_init = warm_start(u_prev, wgrid, n_delta, N)
        tic = time.perf_counter()
        try:
            rsol = solve_open_loop(
                rom,
                wgrid,
                rom.reduce_state(y_cur),
                u_init,
                config.beta,
                config.fbs,
                prox_opts=config.prox_opts(),
                verbose=config.verbose,
            )
        except NumericsError as exc:
            raise NumericsError(f"reduced window {k} (t = {t_k}): {exc}") from exc
        y_cur = _apply_window(
            model, config, rsol.u_opt.values, k, n_delta, y_cur, y_vals, u_vals
        )
        seconds = time.perf_counter() - tic
        per_window.append(
            WindowStat(k, t_k, rsol.J_value, rsol.iterations, seconds, rsol.status)
        )
        u_prev = rsol.u_opt.values

    return compute_metrics(
        dict(
            mode="pod",
            per_window=per_window,
            ell_y=rom.ell_y,
            ell_p=rom.ell_p,
            basis_seconds=basis_seconds,
            sigma_y=basis_y.sigma,
            sigma_p=basis_p.sigma,
        ),
        model,
        config,
        y_vals,
        u_vals,
        full_grid,
    )


@dataclass
class ErrorSeries:
    """Node-wise gap between a full-order and a reduced closed loop."""

    times: np.ndarray = field(repr=False)
    state_error: np.ndarray = field(repr=False)    # |y_fom - y_rom|_M per node
    control_error: np.ndarray = field(repr=False)  # (N, nodes) absolute gaps

    def write_outputs(self, outdir):
        import os

        os.makedirs(outdir, exist_ok=True)
        np.savetxt(
            os.path.join(outdir, "rom_state_error.csv"),
            np.column_stack([self.times, self.state_error]),
            delimiter=",",
            header="t,state_error_M",
            comments="",
        )
        n = self.control_error.shape[0]
        np.savetxt(
            os.path.join(outdir, "rom_control_error.csv"),
            np.column_stack([self.times, self.control_error.T]),
            delimiter=",",
            header="t," + ",".join(f"err_{i + 1}" for i in range(n)),
            comments="",
        )


def rom_error_report(fom: RhcResult, rom: RhcResult) -> ErrorSeries:
    """State and control error series between matching FOM and POD runs."""
    gf, gr = fom.y_rh.grid, rom.y_rh.grid
    if (gf.t0, gf.n_steps, gf.dt) != (gr.t0, gr.n_steps, gr.dt):
        raise ValueError("results live on different grids")
    diff = Trajectory(gf, fom.y_rh.values - rom.y_rh.values)
    state_err = mass_norm_series(fom.model, diff)
    ctrl_err = np.abs(fom.u_rh.values - rom.u_rh.values)
    return ErrorSeries(gf.times(), state_err, ctrl_err)
