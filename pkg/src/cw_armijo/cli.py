"""Command-line front end: ``cw-armijo {list-functions,run,compare,sweep,reproduce-paper}``."""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from .core import CwArmijoError, HyperParams
from .experiment import (
    ConfigError,
    Problem,
    load_config_file,
    problem_from_config,
    run_config_from_dict,
    summary_dict,
    validate_config,
    write_summary,
    write_trajectory_csv,
)
from .objectives import BUILTINS, builtin
from .optimizers import OrderPolicy, RunConfig, Status, run

EXIT_OK, EXIT_CONFIG, EXIT_ANOMALY = 0, 1, 2

SWEEP_HEADER = ["alpha", "beta", "delta0", "method", "order", "status", "iterations",
                "final_f", "final_grad_norm"]
COMPARE_HEADER = ["method", "status", "iterations", "final_f", "final_grad_norm"]


def _floats(values: Sequence[str] | None) -> list[float] | None:
    if values is None:
        return None
    out = []
    for item in values:
        out.extend(float(v) for v in item.split(",") if v.strip())
    return out


def _csv_list(text: str | None, cast=float) -> list | None:
    if text is None:
        return None
    return [cast(v) for v in text.split(",") if v.strip()]


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("problem")
    g.add_argument("--function", help="built-in objective name (see list-functions)")
    g.add_argument("--params", help='JSON object of objective parameters, e.g. \'{"a": 2}\'')
    g.add_argument("--expr", help="objective as an expression in x, y or x1..xm")
    g.add_argument("--dims", help="block sizes for --expr, comma separated (default: one per variable)")
    g.add_argument("--x0", nargs="+", metavar="V",
                   help="start point, space or comma separated (use --x0=-1,2 for a leading minus)")


def _add_hp_flags(p: argparse.ArgumentParser, with_method: bool = True) -> None:
    g = p.add_argument_group("optimizer")
    if with_method:
        g.add_argument("--method", choices=["standard", "backtracking", "coordinatewise"])
        g.add_argument("--order", choices=["x-first", "y-first", "adaptive"])
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--delta0", type=float)
    g.add_argument("--max-grid-depth", type=int)
    g.add_argument("--base-alpha", choices=["on", "off"],
                   help="include alpha in the base-rate inequality (default on)")
    g.add_argument("--standard-rate", type=float, help="fixed step for Standard GD (default delta0)")
    g.add_argument("--max-iter", type=int, dest="max_iterations")
    g.add_argument("--grad-tol", type=float, dest="grad_tolerance")
    g.add_argument("--diverge-value", type=float, dest="divergence_value_threshold")
    g.add_argument("--diverge-norm", type=float, dest="divergence_norm_threshold")
    g.add_argument("--region-mode", choices=["none", "from_objective"])
    g.add_argument("--cycle-detection", action="store_true", default=None,
                   help="stop on short cycles (period <= 2, relative tolerance 1e-9)")


_OVERRIDE_KEYS = ["method", "order", "alpha", "beta", "delta0", "max_grid_depth", "base_alpha",
                  "standard_rate", "max_iterations", "grad_tolerance",
                  "divergence_value_threshold", "divergence_norm_threshold", "region_mode"]


def _config_from_args(args: argparse.Namespace, base: dict | None = None) -> dict:
    cfg = dict(base or {})
    if getattr(args, "function", None) is not None:
        cfg.pop("expr", None)
        cfg["function"] = args.function
    if getattr(args, "expr", None) is not None:
        cfg.pop("function", None)
        cfg["expr"] = args.expr
    if getattr(args, "params", None) is not None:
        try:
            cfg["params"] = json.loads(args.params)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg} at column {exc.colno}", "--params") from None
    if getattr(args, "dims", None) is not None:
        cfg["dims"] = _csv_list(args.dims, int)
    if getattr(args, "x0", None) is not None:
        try:
            cfg["z0"] = _floats(args.x0)
        except ValueError as exc:
            raise ConfigError(str(exc), "--x0") from None
    for key in _OVERRIDE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "cycle_detection", None):
        cfg["cycle_detection"] = {"max_period": 2, "tol": 1e-9}
    if getattr(args, "expect_diverge", None):
        cfg["expect_diverge"] = True
    return cfg


def _prepare(cfg: dict):
    validate_config(cfg)
    problem = problem_from_config(cfg)
    try:
        obj = problem.build()
        config = run_config_from_dict(cfg, obj.partition.k)
    except CwArmijoError as exc:
        raise ConfigError(str(exc), "$.expr" if problem.expr else "$.function") from None
    if len(cfg["z0"]) != obj.partition.total:
        raise ConfigError(f"expected {obj.partition.total} coordinates, got {len(cfg['z0'])}", "$.z0")
    return problem, obj, config


def cmd_list_functions(args: argparse.Namespace) -> int:
    for name, (factory, signature, formula) in BUILTINS.items():
        if name == "separable":
            dims, minimum = "one block per component", "sum of component minima"
        else:
            obj = factory()
            dims = f"blocks {obj.partition.dims}"
            minimum = obj.metadata.get("minimum", "")
        print(f"{signature:<24} {formula:<32} [{dims}] {minimum}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    try:
        base = load_config_file(args.config) if args.config else {}
        cfg = _config_from_args(args, base)
        problem, obj, config = _prepare(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traj = run(obj, cfg["z0"], config)
    write_trajectory_csv(traj, out / "trajectory.csv")
    summary = summary_dict(traj, problem, cfg["z0"])
    write_summary(summary, out / "summary.json")
    print(f"{traj.status_label()} after {traj.iterations} iterations; "
          f"final point {[float(v) for v in traj.final_point]}, f = {traj.f_values[-1]!r}")
    if traj.status is Status.CONVERGED_GRAD_TOL:
        return EXIT_OK
    if cfg.get("expect_diverge") and traj.status in (Status.DIVERGED_VALUE, Status.DIVERGED_NORM):
        return EXIT_OK
    return EXIT_ANOMALY


def compare_configs(config: RunConfig, k: int) -> list[tuple[str, RunConfig]]:
    def variant(method, order="adaptive"):
        return RunConfig(method, config.hp, config.standard_rate, OrderPolicy.parse(order, k),
                         config.max_iterations, config.grad_tolerance,
                         config.divergence_value_threshold, config.divergence_norm_threshold,
                         config.cycle_detection, config.region_mode)

    return [
        ("standard", variant("standard")),
        ("backtracking", variant("backtracking")),
        ("coordinatewise(x-first)", variant("coordinatewise", "x-first")),
        ("coordinatewise(y-first)", variant("coordinatewise", "y-first")),
    ]


def _fmt(v: float) -> str:
    return repr(float(v))


def compare(obj, z0, config: RunConfig) -> list[dict]:
    rows = []
    for label, cfg in compare_configs(config, obj.partition.k):
        traj = run(obj, z0, cfg)
        rows.append({
            "method": label,
            "status": traj.status_label(),
            "iterations": traj.iterations,
            "final_f": traj.f_values[-1],
            "final_grad_norm": traj.grad_norms[-1],
            "final_point": [float(v) for v in traj.final_point],
        })
    return rows


def format_table(rows: list[dict], columns: Sequence[str]) -> str:
    cells = [[str(c) for c in columns]]
    for r in rows:
        cells.append([f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c]) for c in columns])
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        cfg = _config_from_args(args)
        problem, obj, config = _prepare(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = compare(obj, cfg["z0"], config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_HEADER)
        for r in rows:
            w.writerow([r["method"], r["status"], r["iterations"], _fmt(r["final_f"]),
                        _fmt(r["final_grad_norm"])])
    print(format_table(rows, COMPARE_HEADER))
    return EXIT_OK


def _sweep_cell(cell: tuple) -> list[str]:
    problem, z0, base_cfg, alpha, beta, delta0, method, order = cell
    obj = problem.build()
    cfg = dict(base_cfg, alpha=alpha, beta=beta, delta0=delta0, method=method,
               order=order if method == "coordinatewise" else "adaptive")
    traj = run(obj, z0, run_config_from_dict(cfg, obj.partition.k))
    return [_fmt(alpha), _fmt(beta), _fmt(delta0), method, order if method == "coordinatewise" else "-",
            traj.status_label(), str(traj.iterations), _fmt(traj.f_values[-1]),
            _fmt(traj.grad_norms[-1])]


def sweep_cells(problem: Problem, z0, base_cfg: dict, alphas, betas, deltas, methods, orders):
    cells = []
    for alpha, beta, delta0 in itertools.product(alphas, betas, deltas):
        for method in methods:
            for order in (orders if method == "coordinatewise" else ["-"]):
                cells.append((problem, list(z0), base_cfg, alpha, beta, delta0, method, order))
    return cells


def sweep_workers() -> int:
    env = os.environ.get("CW_ARMIJO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(cells: list[tuple], workers: int | None = None) -> list[list[str]]:
    workers = min(workers or sweep_workers(), max(1, len(cells)))
    if workers <= 1:
        rows = [_sweep_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    method_rank = {"standard": 0, "backtracking": 1, "coordinatewise": 2}
    rows.sort(key=lambda r: (float(r[0]), float(r[1]), float(r[2]), method_rank.get(r[3], 9), r[4]))
    return rows


def write_sweep_csv(rows: list[list[str]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        w.writerows(rows)


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        cfg = _config_from_args(args)
        problem, obj, _ = _prepare(cfg)
        alphas = _csv_list(args.alphas)
        betas = _csv_list(args.betas)
        deltas = _csv_list(args.delta0s)
        methods = _csv_list(args.methods, str)
        orders = _csv_list(args.orders, str)
        for hp in itertools.product(alphas, betas, deltas):
            HyperParams(*hp)
        bad = [m for m in methods if m not in ("standard", "backtracking", "coordinatewise")]
        bad += [o for o in orders if o not in ("x-first", "y-first", "adaptive")]
        if bad:
            raise ConfigError(f"unknown method/order {bad}", "--methods/--orders")
    except (ConfigError, CwArmijoError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    base_cfg = {k: v for k, v in cfg.items()
                if k not in ("alpha", "beta", "delta0", "method", "order", "z0")}
    cells = sweep_cells(problem, cfg["z0"], base_cfg, alphas, betas, deltas, methods, orders)
    rows = run_sweep(cells)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out / "sweep.csv")
    print(f"{len(rows)} runs written to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_reproduce_paper(args: argparse.Namespace) -> int:
    from .reproduce import reproduce

    report = reproduce(Path(args.out), sweep=not args.no_sweep)
    print(report)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors: exit 1, keeping 2 for anomalous runs."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="cw-armijo",
        description="Standard, Backtracking and Coordinate-wise Backtracking gradient descent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-functions", help="list built-in objectives")
    p.set_defaults(func=cmd_list_functions)

    p = sub.add_parser("run", help="run one optimizer and write trajectory.csv and summary.json")
    p.add_argument("--config", help="JSON config file; flags override its fields")
    _add_problem_flags(p)
    _add_hp_flags(p)
    p.add_argument("--expect-diverge", action="store_true", default=None,
                   help="exit 0 when the run diverges (divergence is the expected outcome)")
    p.add_argument("--out", default="cw_out", help="output directory (default: cw_out)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run all four methods from one start point")
    _add_problem_flags(p)
    _add_hp_flags(p, with_method=False)
    p.add_argument("--out", default="cw_out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="iteration counts over a hyperparameter grid")
    _add_problem_flags(p)
    _add_hp_flags(p, with_method=False)
    p.add_argument("--alphas", default="0.25,0.5")
    p.add_argument("--betas", default="0.5,0.7")
    p.add_argument("--delta0s", default="1,2")
    p.add_argument("--methods", default="backtracking,coordinatewise")
    p.add_argument("--orders", default="x-first,y-first")
    p.add_argument("--out", default="cw_out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce-paper", help="rerun the worked examples and write a report")
    p.add_argument("--out", default="cw_report")
    p.add_argument("--no-sweep", action="store_true",
                   help="skip the 8-setting Rosenbrock grid (about 15 s)")
    p.set_defaults(func=cmd_reproduce_paper)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
