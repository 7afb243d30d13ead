"""Run configuration: parsing, validation, serialization.

The format is line-oriented ``key = value`` under ``[section]`` headers
with ``#`` comments.  Unknown sections or keys are hard errors with line
numbers; missing keys fall back to the benchmark defaults.  Actuator
rectangles are given as repeated ``rect = x0 y0 x1 y1`` lines in the
``[actuators]`` section; with none present the shipped 13-square layout is
used.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .fbs import FbsSettings
from .mesh import ActuatorLayout, default_layout


def _parse_bool(s: str) -> bool:
    return s.lower() in ("1", "true", "yes")


# (section, key) -> (attribute, converter, default string, help)
KEY_REGISTRY = {
    ("mesh", "n_side"): ("n_side", int, "32", "cells per axis of the unit square"),
    ("rhc", "nu"): ("nu", float, "0.1", "diffusion coefficient"),
    ("rhc", "beta"): ("beta", float, "5.0", "control cost weight"),
    ("rhc", "delta"): ("delta", float, "0.25", "sampling time"),
    ("rhc", "T"): ("T", float, "2.0", "prediction horizon"),
    ("rhc", "T_inf"): ("T_inf", float, "10.0", "final computation time"),
    ("rhc", "dt"): ("dt", float, "0.0125", "time step (1/80)"),
    ("rhc", "mode"): ("mode", str, "fom", "fom | pod | uncontrolled"),
    ("rhc", "norm"): ("norm", str, "mass", "spatial norm in l2 metric: mass | euclidean"),
    ("rhc", "rel_tol"): ("rel_tol", float, "1e-4", "optimizer stopping tolerance"),
    ("rhc", "max_iter"): ("max_iter", int, "500", "optimizer iteration cap"),
    ("rhc", "ls_window"): ("ls_window", int, "5", "nonmonotone memory length"),
    ("rhc", "ls_shrink"): ("ls_shrink", float, "0.5", "backtracking factor"),
    ("rhc", "ls_c"): ("ls_c", float, "1e-4", "sufficient-decrease constant"),
    ("rhc", "step_init"): ("step_init", float, "1.0", "initial step size"),
    ("rhc", "step_min"): ("step_min", float, "1e-8", "step size lower clamp"),
    ("rhc", "step_max"): ("step_max", float, "1e8", "step size upper clamp"),
    ("rhc", "seed"): ("seed", int, "0", "random seed for test utilities"),
    ("rhc", "verbose"): ("verbose", _parse_bool, "0", "per-iteration optimizer log"),
    ("rhc", "out"): ("out_dir", str, ".", "output directory"),
    ("prox", "bisect_tol"): ("prox_bisect_tol", float, "1e-10", "bisection interval tolerance"),
    ("prox", "max_iter"): ("prox_max_iter", int, "200", "bisection iteration cap"),
    ("pod", "tol"): ("pod_tol", float, "1e-7", "singular value truncation tolerance"),
    ("pod", "T_train"): ("pod_T_train", float, "", "training horizon (default: T)"),
    ("pod", "weight"): ("pod_weight", str, "mass", "POD inner product: mass | stiffness"),
}


@dataclass
class RunConfig:
    n_side: int = 32
    nu: float = 0.1
    beta: float = 5.0
    delta: float = 0.25
    T: float = 2.0
    T_inf: float = 10.0
    dt: float = 0.0125
    mode: str = "fom"
    norm: str = "mass"
    rel_tol: float = 1e-4
    max_iter: int = 500
    ls_window: int = 5
    ls_shrink: float = 0.5
    ls_c: float = 1e-4
    step_init: float = 1.0
    step_min: float = 1e-8
    step_max: float = 1e8
    seed: int = 0
    verbose: bool = False
    out_dir: str = "."
    prox_bisect_tol: float = 1e-10
    prox_max_iter: int = 200
    pod_tol: float = 1e-7
    pod_T_train: float | None = None
    pod_weight: str = "mass"
    layout: ActuatorLayout = field(default_factory=default_layout)

    @property
    def fbs(self) -> FbsSettings:
        return FbsSettings(
            rel_tol=self.rel_tol,
            max_iter=self.max_iter,
            ls_window=self.ls_window,
            ls_shrink=self.ls_shrink,
            ls_c=self.ls_c,
            step_init=self.step_init,
            step_min=self.step_min,
            step_max=self.step_max,
        )

    def prox_opts(self):
        return {"bisect_tol": self.prox_bisect_tol, "max_bisect": self.prox_max_iter}

    @property
    def T_train(self):
        return self.T if self.pod_T_train is None else self.pod_T_train

    def validate(self):
        if self.n_side < 2:
            raise ConfigError("n_side must be at least 2")
        for key in ("nu", "beta", "dt", "delta", "T", "T_inf"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive")
        if self.T < self.delta:
            raise ConfigError("T must be at least delta")
        _check_multiple(self.delta, self.dt, "delta/dt")
        _check_multiple(self.T, self.dt, "T/dt")
        _check_multiple(self.T_inf, self.delta, "T_inf/delta")
        if self.mode not in ("fom", "pod", "uncontrolled"):
            raise ConfigError(f"unknown mode '{self.mode}'")
        if self.norm not in ("mass", "euclidean"):
            raise ConfigError(f"unknown norm '{self.norm}'")
        if self.pod_weight not in ("mass", "stiffness"):
            raise ConfigError(f"unknown pod weight '{self.pod_weight}'")
        if self.mode == "pod":
            if self.T_train < self.delta:
                raise ConfigError("pod T_train must be at least delta")
            _check_multiple(self.T_train, self.dt, "T_train/dt")
        return self


def _check_multiple(value, unit, label):
    ratio = value / unit
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, abs(ratio)):
        raise ConfigError(f"{label} not integral ({label.split('/')[0]} = {value})")


def parse_config(text: str) -> RunConfig:
    """Parse a configuration document into a validated RunConfig."""
    values = {}
    rects = []
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("mesh", "rhc", "prox", "pod", "actuators"):
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if section == "actuators":
            if key != "rect":
                raise ConfigError(f"line {lineno}: unknown key '{key}' in [actuators]")
            parts = value.split()
            if len(parts) != 4:
                raise ConfigError(f"line {lineno}: rect needs 'x0 y0 x1 y1'")
            try:
                rects.append(tuple(float(p) for p in parts))
            except ValueError:
                raise ConfigError(f"line {lineno}: rect coordinates must be numbers")
            continue
        entry = KEY_REGISTRY.get((section, key))
        if entry is None:
            raise ConfigError(f"line {lineno}: unknown key '{key}' in [{section}]")
        if (section, key) in seen:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        seen.add((section, key))
        attr, conv, _, _ = entry
        try:
            values[attr] = conv(value)
        except (ValueError, TypeError):
            raise ConfigError(f"line {lineno}: cannot parse value for '{key}'")

    if rects:
        try:
            values["layout"] = ActuatorLayout(tuple(rects))
        except ValueError as exc:
            raise ConfigError(f"[actuators]: {exc}")
    config = RunConfig(**values)
    return config.validate()


def serialize_config(config: RunConfig) -> str:
    """Emit a document that parses back to an equal configuration."""
    by_section = {}
    for (section, key), (attr, _, _, _) in KEY_REGISTRY.items():
        val = getattr(config, attr)
        if attr == "pod_T_train" and val is None:
            continue
        if attr == "verbose":
            val = 1 if val else 0
        by_section.setdefault(section, []).append((key, val))
    lines = []
    for section in ("mesh", "rhc", "prox", "pod"):
        lines.append(f"[{section}]")
        for key, val in by_section.get(section, []):
            lines.append(f"{key} = {val}")
        lines.append("")
    lines.append("[actuators]")
    for x0, y0, x1, y1 in config.layout.rectangles:
        lines.append(f"rect = {x0} {y0} {x1} {y1}")
    lines.append("")
    return "\n".join(lines)


def build_model(config: RunConfig):
    from .fem import build_fem_model

    return build_fem_model(config.n_side, config.nu, config.layout)


def describe_keys() -> str:
    """Help text enumerating every config key with its default."""
    out = []
    last = None
    for (section, key), (_, _, default, help_) in KEY_REGISTRY.items():
        if section != last:
            out.append(f"[{section}]")
            last = section
        shown = default if default != "" else "(= T)"
        out.append(f"  {key:<12} default {shown:<8} {help_}")
    out.append("[actuators]")
    out.append("  rect         repeated 'x0 y0 x1 y1' lines (default: 13-square layout)")
    return "\n".join(out)
