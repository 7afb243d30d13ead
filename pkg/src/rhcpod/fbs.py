"""Forward-backward splitting for one finite-horizon open-loop problem.

Iterates u+ = prox_{alpha*G}(u - alpha*B'p) with Barzilai-Borwein trial
steps and a nonmonotone backtracking line search on the composite
objective.  One state solve per line-search trial, one adjoint solve per
accepted iterate; the trial state is reused as the next iterate's state.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .prox import ProxParams, prox_trajectory
from .timestepping import eval_cost, get_system, integrate_adjoint, integrate_state
from .trajectory import TimeGrid, Trajectory, weighted_inner, weighted_norm


@dataclass
class FbsSettings:
    rel_tol: float = 1e-4       # stop when |u+ - u| / |u+| drops below
    max_iter: int = 500
    ls_window: int = 5          # nonmonotone reference memory
    ls_shrink: float = 0.5
    ls_c: float = 1e-4          # sufficient-decrease constant
    step_init: float = 1.0
    step_min: float = 1e-8
    step_max: float = 1e8

    def __post_init__(self):
        if not (0.0 < self.ls_shrink < 1.0 and 0.0 < self.ls_c < 1.0):
            raise ValueError("line-search constants out of range")
        if self.step_min >= self.step_max:
            raise ValueError("step_min must be below step_max")


@dataclass
class OpenLoopSolution:
    u_opt: Trajectory
    y_opt: Trajectory
    p_opt: Trajectory
    J_value: float
    iterations: int
    fixed_point_residual: float
    wall_time: float
    status: str = "converged"   # converged | max_iter | stalled
    objective_history: list = field(default_factory=list, repr=False)
    snapshot_log: list | None = field(default=None, repr=False)

    @property
    def converged(self):
        return self.status == "converged"


def gradient_smooth(model, grid: TimeGrid, u: Trajectory, y_init):
    """Smooth-part gradient B'p together with the state and adjoint solves."""
    sys_ = get_system(model, grid.dt)
    y = integrate_state(model, grid, u, y_init)
    p = integrate_adjoint(model, grid, y)
    grad = Trajectory(grid, sys_.B.T @ p.values)
    return grad, y, p


def fixed_point_residual(model, grid, u, p, beta, prox_opts=None):
    """|u - prox_G(u - B'p)| / max(1, |u|) at the reference step 1."""
    sys_ = get_system(model, grid.dt)
    params = ProxParams(1.0, beta, **(prox_opts or {}))
    step = Trajectory(grid, u.values - sys_.B.T @ p.values)
    pu = prox_trajectory(step, params)
    num = weighted_norm(Trajectory(grid, u.values - pu.values))
    return num / max(1.0, weighted_norm(u))


def solve_open_loop(
    model,
    grid: TimeGrid,
    y_init,
    u_init: Trajectory,
    beta: float,
    settings: FbsSettings | None = None,
    prox_opts: dict | None = None,
    log_snapshots: bool = False,
    verbose: bool = False,
) -> OpenLoopSolution:
    """Minimize 1/2 int y'Sy + beta/2 int |u|_1^2 over the window."""
    settings = settings or FbsSettings()
    prox_opts = prox_opts or {}
    t_start = time.perf_counter()

    snapshots = [] if log_snapshots else None
    u = u_init.copy()
    grad, y, p = gradient_smooth(model, grid, u, y_init)
    J, _, _ = eval_cost(model, grid, y, u, beta)
    if snapshots is not None:
        snapshots.append((y.values.copy(), p.values.copy()))

    hist = deque([J], maxlen=settings.ls_window)
    history = [J]
    bb_s = bb_gdiff = None
    status = "max_iter"
    iterations = 0

    for it in range(1, settings.max_iter + 1):
        alpha = settings.step_init
        if bb_s is not None:
            denom = weighted_inner(bb_s, bb_gdiff)
            if denom > 0.0:
                alpha = weighted_inner(bb_s, bb_s) / denom
            alpha = min(max(alpha, settings.step_min), settings.step_max)

        ref = max(hist)
        stalled = False
        while True:
            params = ProxParams(alpha, beta, **prox_opts)
            u_new = prox_trajectory(
                Trajectory(grid, u.values - alpha * grad.values), params
            )
            y_new = integrate_state(model, grid, u_new, y_init)
            J_new, _, _ = eval_cost(model, grid, y_new, u_new, beta)
            diff = Trajectory(grid, u_new.values - u.values)
            dn2 = weighted_inner(diff, diff)
            if J_new <= ref - settings.ls_c / alpha * dn2:
                break
            alpha *= settings.ls_shrink
            if alpha < settings.step_min:
                stalled = True
                break
        if stalled:
            status = "stalled"
            iterations = it
            break

        # one adjoint solve per accepted iterate; the trial state is reused
        p_new = integrate_adjoint(model, grid, y_new)
        grad_new = Trajectory(grid, get_system(model, grid.dt).B.T @ p_new.values)
        if snapshots is not None:
            snapshots.append((y_new.values.copy(), p_new.values.copy()))
        bb_s = diff
        bb_gdiff = Trajectory(grid, grad_new.values - grad.values)

        du = np.sqrt(dn2)
        un = weighted_norm(u_new)
        u, y, p, grad, J = u_new, y_new, p_new, grad_new, J_new
        hist.append(J)
        history.append(J)
        iterations = it
        if verbose:
            res = du / un if un > 0 else 0.0
            print(f"{it:4d} {J:.12e} {alpha:.6e} {res:.6e}")
        if du == 0.0 or (un > 0 and du / un <= settings.rel_tol):
            status = "converged"
            break

    res = fixed_point_residual(model, grid, u, p, beta, prox_opts)
    return OpenLoopSolution(
        u_opt=u,
        y_opt=y,
        p_opt=p,
        J_value=J,
        iterations=iterations,
        fixed_point_residual=res,
        wall_time=time.perf_counter() - t_start,
        status=status,
        objective_history=history,
        snapshot_log=snapshots,
    )
