"""Benchmark harness: run a list of configurations and emit result tables."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, build_model
from .rhc import _write_csv, run_rhc_fom, run_uncontrolled
from .reduced import run_rhc_pod


@dataclass
class BenchRow:
    name: str
    mode: str
    T_train: float | None
    T: float
    status: str = "ok"
    l2_norm: float = float("nan")
    total_cost: float = float("nan")
    terminal_norm: float = float("nan")
    total_seconds: float = float("nan")
    first_window_seconds: float = float("nan")
    mean_later_seconds: float = float("nan")


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    results: dict = field(default_factory=dict)

    def write_outputs(self, outdir):
        import os

        os.makedirs(outdir, exist_ok=True)
        _write_csv(
            os.path.join(outdir, "table1.csv"),
            "model,T_train,T,l2_norm,total_cost,terminal_norm,total_seconds,status",
            [
                (
                    r.mode,
                    "" if r.T_train is None else r.T_train,
                    r.T,
                    r.l2_norm,
                    r.total_cost,
                    r.terminal_norm,
                    r.total_seconds,
                    r.status,
                )
                for r in self.rows
            ],
        )
        _write_csv(
            os.path.join(outdir, "table2.csv"),
            "model,T_train,T,first_window_seconds,mean_later_window_seconds,status",
            [
                (
                    r.mode,
                    "" if r.T_train is None else r.T_train,
                    r.T,
                    r.first_window_seconds,
                    r.mean_later_seconds,
                    r.status,
                )
                for r in self.rows
            ],
        )


_RUNNERS = {
    "fom": run_rhc_fom,
    "pod": run_rhc_pod,
    "uncontrolled": run_uncontrolled,
}


def run_benchmark(configs: list) -> BenchReport:
    """Run (name, RunConfig) pairs in order; failures become status rows.

    Models are shared between configurations with identical discretization
    so operator caches amortize across the sweep, as inside a single run.
    """
    if not configs:
        raise ValueError("run_benchmark needs at least one configuration")
    report = BenchReport()
    models = {}
    for name, config in configs:
        key = (config.n_side, config.nu, config.layout.rectangles)
        model = models.get(key)
        if model is None:
            model = build_model(config)
            models[key] = model
        row = BenchRow(
            name=name,
            mode=config.mode,
            T_train=config.T_train if config.mode == "pod" else None,
            T=config.T,
        )
        tic = time.perf_counter()
        try:
            result = _RUNNERS[config.mode](config, model=model)
        except Exception as exc:  # record and continue with the next config
            row.status = f"failed: {type(exc).__name__}"
            report.rows.append(row)
            continue
        row.total_seconds = time.perf_counter() - tic
        row.l2_norm = result.l2_norm
        row.total_cost = result.total_cost
        row.terminal_norm = result.terminal_norm
        if result.per_window:
            row.first_window_seconds = result.first_window_seconds
            later = [w.seconds for w in result.per_window if w.index >= 1]
            row.mean_later_seconds = float(np.mean(later)) if later else float("nan")
        if any(w.status != "converged" for w in result.per_window):
            row.status = "ok (unconverged windows)"
        report.rows.append(row)
        report.results[name] = result
    return report
