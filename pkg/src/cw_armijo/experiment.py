"""Run configuration files, problem specs, and trajectory/summary export."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import jsonschema
import numpy as np

from . import diagnostics
from .core import BlockPartition, HyperParams
from .expr import to_objective
from .objectives import Objective, builtin
from .optimizers import CycleDetection, OrderPolicy, RunConfig, Trajectory



class ConfigError(Exception):
    """A configuration failed validation; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def load_schema(name: str) -> dict:
    return json.loads(resources.files("cw_armijo.schemas").joinpath(name).read_text())


def validate_config(cfg: Mapping[str, Any]) -> None:
    validator = jsonschema.Draft202012Validator(load_schema("config.schema.json"))
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
        raise ConfigError(err.message, path)


def load_config_file(path: str | Path) -> dict:
    """Read a JSON config; parse errors carry line and column."""
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno}, column {exc.colno}",
                          str(path)) from None
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be a JSON object", "$")
    return cfg


@dataclass(frozen=True)
class Problem:
    """Picklable description of an objective: a built-in name or an expression."""

    function: str | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    expr: str | None = None
    dims: tuple[int, ...] | None = None
    fd_step: float = 1e-6

    def build(self) -> Objective:
        if self.expr is not None:
            partition = BlockPartition(self.dims) if self.dims else None
            return to_objective(self.expr, partition, self.fd_step)
        return builtin(self.function, dict(self.params))

    @property
    def name(self) -> str:
        return "expr" if self.expr is not None else self.function

    def describe(self, obj: Objective) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            "expr": self.expr,
            "dims": list(obj.partition.dims),
        }


def problem_from_config(cfg: Mapping[str, Any]) -> Problem:
    dims = tuple(cfg["dims"]) if cfg.get("dims") else None
    return Problem(cfg.get("function"), dict(cfg.get("params") or {}), cfg.get("expr"), dims,
                   float(cfg.get("fd_step", 1e-6)))


def run_config_from_dict(cfg: Mapping[str, Any], k: int) -> RunConfig:
    defaults = RunConfig()
    hp = HyperParams(
        alpha=float(cfg.get("alpha", defaults.hp.alpha)),
        beta=float(cfg.get("beta", defaults.hp.beta)),
        delta0=float(cfg.get("delta0", defaults.hp.delta0)),
        max_grid_depth=int(cfg.get("max_grid_depth", defaults.hp.max_grid_depth)),
        base_uses_alpha=cfg.get("base_alpha", "on") == "on",
    )
    cycle = cfg.get("cycle_detection")
    return RunConfig(
        method=cfg.get("method", defaults.method),
        hp=hp,
        standard_rate=cfg.get("standard_rate"),
        order_policy=OrderPolicy.parse(cfg.get("order", "adaptive"), k),
        max_iterations=int(cfg.get("max_iterations", defaults.max_iterations)),
        grad_tolerance=float(cfg.get("grad_tolerance", defaults.grad_tolerance)),
        divergence_value_threshold=float(
            cfg.get("divergence_value_threshold", defaults.divergence_value_threshold)),
        divergence_norm_threshold=float(
            cfg.get("divergence_norm_threshold", defaults.divergence_norm_threshold)),
        cycle_detection=None if cycle is None else CycleDetection(**cycle),
        region_mode=cfg.get("region_mode", defaults.region_mode),
    )


def _num(v: float) -> str:
    """Shortest decimal string that parses back to the same 64-bit float."""
    return repr(float(v))


def _json_num(v: float) -> float | None:
    v = float(v)
    return v if math.isfinite(v) else None


def trajectory_rows(traj: Trajectory) -> tuple[list[str], list[list[str]]]:
    m = traj.objective.partition.total
    k = traj.objective.partition.k
    header = (["iter"] + [f"z_{j + 1}" for j in range(m)] + ["f", "grad_norm"]
              + [f"delta_{i + 1}" for i in range(k)] + ["order"])
    rows = []
    for n, z in enumerate(traj.iterates):
        rates = traj.rates[n] if n < len(traj.rates) else None
        row = [str(n)] + [_num(v) for v in z] + [_num(traj.f_values[n]), _num(traj.grad_norms[n])]
        row += [_num(r) for r in rates] if rates is not None else [""] * k
        row.append(traj.order_label(n))
        rows.append(row)
    return header, rows


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    header, rows = trajectory_rows(traj)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_trajectory_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Load iterates, f values, gradient norms and rates written by ``write_trajectory_csv``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    zcols = [i for i, h in enumerate(header) if h.startswith("z_")]
    dcols = [i for i, h in enumerate(header) if h.startswith("delta_")]
    fcol, gcol = header.index("f"), header.index("grad_norm")
    return {
        "iter": np.array([int(r[0]) for r in rows]),
        "z": np.array([[float(r[i]) for i in zcols] for r in rows]).reshape(len(rows), len(zcols)),
        "f": np.array([float(r[fcol]) for r in rows]),
        "grad_norm": np.array([float(r[gcol]) for r in rows]),
        "delta": np.array([[float(r[i]) if r[i] else math.nan for i in dcols] for r in rows]),
        "order": [r[header.index("order")] for r in rows],
    }


def summary_dict(traj: Trajectory, problem: Problem, z0: Sequence[float]) -> dict:
    return {
        "status": str(traj.status),
        "period": traj.period,
        "message": traj.message,
        "iterations": traj.iterations,
        "final_point": [float(v) for v in traj.final_point],
        "final_f": _json_num(traj.f_values[-1]),
        "final_grad_norm": _json_num(traj.grad_norms[-1]),
        "z0": [float(v) for v in z0],
        "problem": problem.describe(traj.objective),
        "hyperparameters": traj.config.describe(),
        "diagnostics": _finite_tree(diagnostics.summarize(traj)),
    }


def _finite_tree(value):
    if isinstance(value, dict):
        return {k: _finite_tree(v) for k, v in value.items()}
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_summary(summary: Mapping[str, Any], path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def validate_summary(summary: Mapping[str, Any]) -> None:
    jsonschema.validate(summary, load_schema("summary.schema.json"),
                        cls=jsonschema.Draft202012Validator)
