"""Standard GD, Backtracking GD and Coordinate-wise Backtracking GD loops."""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    BlockGradient,
    BlockVector,
    CwArmijoError,
    ExhaustedGrid,
    HyperParams,
    InvalidParameter,
    LearningRates,
    NonFiniteValue,
    RegionViolation,
    cap,
    squared_norm,
)
from .linesearch import base_backtracking, cw_backtracking, ordering_heuristic
from .objectives import Objective

METHODS = ("standard", "backtracking", "coordinatewise")


class Status(str, enum.Enum):
    CONVERGED_GRAD_TOL = "ConvergedGradTol"
    MAX_ITERATIONS = "MaxIterations"
    DIVERGED_VALUE = "DivergedValue"
    DIVERGED_NORM = "DivergedNorm"
    NUMERICAL_OVERFLOW = "NumericalOverflow"
    CYCLE_DETECTED = "CycleDetected"
    EXHAUSTED_GRID = "ExhaustedGrid"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class OrderPolicy:
    """``static`` with a fixed permutation, or ``adaptive`` (secant Lipschitz)."""

    kind: str = "adaptive"
    order: tuple[int, ...] | None = None

    @classmethod
    def parse(cls, text: str, k: int) -> "OrderPolicy":
        if text == "adaptive":
            return cls("adaptive")
        if text == "x-first":
            return cls("static", tuple(range(k)))
        if text == "y-first":
            return cls("static", tuple(reversed(range(k))))
        raise InvalidParameter(f"order must be x-first, y-first or adaptive, got {text!r}")

    def fallback(self, k: int) -> tuple[int, ...]:
        return self.order if self.order is not None else tuple(range(k))

    def label(self) -> str:
        if self.kind == "adaptive":
            return "adaptive"
        return "x-first" if list(self.order) == sorted(self.order) else "y-first"


@dataclass(frozen=True)
class CycleDetection:
    max_period: int = 2
    tol: float = 1e-9

    def __post_init__(self):
        if self.max_period < 2:
            raise InvalidParameter("max_period must be at least 2")
        if not self.tol > 0:
            raise InvalidParameter("cycle tolerance must be positive")


@dataclass(frozen=True)
class RunConfig:
    method: str = "coordinatewise"
    hp: HyperParams = field(default_factory=HyperParams)
    standard_rate: float | None = None
    order_policy: OrderPolicy = field(default_factory=OrderPolicy)
    max_iterations: int = 100_000
    grad_tolerance: float = 1e-8
    divergence_value_threshold: float = -1e8
    divergence_norm_threshold: float = 1e8
    cycle_detection: CycleDetection | None = None
    region_mode: str = "none"

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameter(f"method must be one of {METHODS}, got {self.method!r}")
        if self.standard_rate is not None and not self.standard_rate > 0:
            raise InvalidParameter("standard_rate must be positive")
        if self.max_iterations < 1:
            raise InvalidParameter("max_iterations must be positive")
        if not self.grad_tolerance > 0:
            raise InvalidParameter("grad_tolerance must be positive")
        if not self.divergence_norm_threshold > 0:
            raise InvalidParameter("divergence_norm_threshold must be positive")
        if self.region_mode not in ("none", "from_objective"):
            raise InvalidParameter("region_mode must be 'none' or 'from_objective'")

    @property
    def rate(self) -> float:
        """Fixed step of Standard GD; delta0 unless set explicitly."""
        return self.hp.delta0 if self.standard_rate is None else self.standard_rate

    def describe(self) -> dict:
        return {
            "method": self.method,
            **self.hp.as_dict(),
            "standard_rate": self.rate,
            "order": self.order_policy.label(),
            "max_iterations": self.max_iterations,
            "grad_tolerance": self.grad_tolerance,
            "divergence_value_threshold": self.divergence_value_threshold,
            "divergence_norm_threshold": self.divergence_norm_threshold,
            "cycle_detection": None if self.cycle_detection is None else {
                "max_period": self.cycle_detection.max_period,
                "tol": self.cycle_detection.tol,
            },
            "region_mode": self.region_mode,
        }


@dataclass
class Trajectory:
    """Iterates z_0..z_n with per-step audit data.

    ``rates[i]`` and ``orders[i]`` describe the step taken from ``iterates[i]``;
    the last record has no step, so those lists are one shorter than
    ``iterates``.
    """

    objective: Objective
    config: RunConfig
    iterates: list[np.ndarray] = field(default_factory=list)
    f_values: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    rates: list[tuple[float, ...]] = field(default_factory=list)
    base_rates: list[float] = field(default_factory=list)
    grid_indices: list[tuple[int, ...]] = field(default_factory=list)
    orders: list[tuple[int, ...]] = field(default_factory=list)
    status: Status | None = None
    period: int | None = None
    message: str = ""
    wall_time: float = 0.0

    @property
    def method(self) -> str:
        return self.config.method

    @property
    def iterations(self) -> int:
        return len(self.iterates) - 1

    @property
    def final_point(self) -> np.ndarray:
        return self.iterates[-1]

    def point(self, n: int) -> BlockVector:
        return BlockVector(self.objective.partition, self.iterates[n])

    def status_label(self) -> str:
        if self.status is Status.CYCLE_DETECTED:
            return f"{self.status}({self.period})"
        return str(self.status)

    def order_label(self, n: int) -> str:
        if n >= len(self.orders):
            return ""
        part = self.objective.partition
        return ">".join(part.block_label(i) for i in self.orders[n])


def step_standard(obj: Objective, z: BlockVector, rate: float,
                  g: BlockGradient | None = None) -> BlockVector:
    """z - rate * grad f(z)."""
    if g is None:
        g = obj.gradient(z)
    with np.errstate(over="ignore", invalid="ignore"):
        new = z.flat - rate * g.flat
    if not np.all(np.isfinite(new)):
        raise NonFiniteValue(f"standard step from {z!r} overflowed")
    return BlockVector(z.partition, new)


def _cap_for(obj: Objective, z: BlockVector, g: BlockGradient, region_mode: str) -> float:
    if region_mode == "from_objective":
        return cap(obj.region, z, g)
    return math.inf


def step_backtracking(obj: Objective, z: BlockVector, hp: HyperParams, region_mode: str = "none",
                      g: BlockGradient | None = None, f0: float | None = None
                      ) -> tuple[BlockVector, float, int]:
    """One Backtracking GD step; returns the new point, the rate and its grid index."""
    if g is None:
        g = obj.gradient(z)
    delta, n = base_backtracking(obj, z, g, hp, _cap_for(obj, z, g, region_mode), f0)
    return BlockVector(z.partition, z.flat - delta * g.flat), delta, n


def step_cw(obj: Objective, z: BlockVector, hp: HyperParams, order: Sequence[int],
            region_mode: str = "none", g: BlockGradient | None = None, f0: float | None = None
            ) -> tuple[BlockVector, LearningRates]:
    """One Coordinate-wise Backtracking GD step with a given block order."""
    if g is None:
        g = obj.gradient(z)
    rates = cw_backtracking(obj, z, g, hp, order, _cap_for(obj, z, g, region_mode), f0)
    new = z.flat - z.partition.expand(rates.per_block) * g.flat
    return BlockVector(z.partition, new), rates


def _is_cycle(iterates: list[np.ndarray], p: int, tol: float) -> bool:
    n = len(iterates) - 1
    if n - 1 - p < 0:
        return False
    for j in (n, n - 1):
        a, b = iterates[j], iterates[j - p]
        if np.linalg.norm(a - b) > tol * max(np.linalg.norm(a), np.linalg.norm(b), 1.0):
            return False
    return True


def _advance(traj: Trajectory, obj: Objective, z: BlockVector, g: BlockGradient, f: float,
             config: RunConfig, prev: tuple[BlockVector, BlockGradient] | None) -> BlockVector:
    """Take one step with the configured method and record its rates."""
    k = obj.partition.k
    hp = config.hp
    if config.method == "standard":
        z_new = step_standard(obj, z, config.rate, g)
        traj.rates.append((config.rate,) * k)
        traj.base_rates.append(config.rate)
        traj.grid_indices.append((-1,) * k)
        traj.orders.append(tuple(range(k)))
    elif config.method == "backtracking":
        z_new, delta, n = step_backtracking(obj, z, hp, config.region_mode, g, f)
        traj.rates.append((delta,) * k)
        traj.base_rates.append(delta)
        traj.grid_indices.append((n,) * k)
        traj.orders.append(tuple(range(k)))
    else:
        policy = config.order_policy
        if policy.kind == "adaptive":
            order = tuple(ordering_heuristic(prev, (z, g), policy.fallback(k)))
        else:
            order = policy.fallback(k)
        z_new, lr = step_cw(obj, z, hp, order, config.region_mode, g, f)
        traj.rates.append(lr.per_block)
        traj.base_rates.append(lr.base)
        traj.grid_indices.append(lr.grid_indices)
        traj.orders.append(order)
    return z_new


def run(obj: Objective, z0: BlockVector | Sequence[float], config: RunConfig | None = None) -> Trajectory:
    """Iterate from ``z0`` until a terminal status fires.

    Each iteration checks, in order: non-finite values, the gradient
    tolerance, value divergence, norm divergence, cycles, and the iteration
    budget.  Errors inside a step become terminal statuses.
    """
    config = config or RunConfig()
    if not isinstance(z0, BlockVector):
        z0 = BlockVector(obj.partition, z0)
    if z0.partition != obj.partition:
        raise InvalidParameter(f"start point blocks {z0.partition.dims} != {obj.partition.dims}")
    if config.region_mode == "from_objective" and obj.region.active and obj.region.distance(z0) <= 0:
        raise RegionViolation(f"start point {z0!r} lies in {obj.region.describe()}")

    traj = Trajectory(obj, config)
    prev: tuple[BlockVector, BlockGradient] | None = None
    t0 = time.perf_counter()

    z = z0
    while True:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                f = float(obj.fun(z.flat))
                g = obj.gradient(z)
        except CwArmijoError as exc:
            if not traj.iterates:
                raise
            # The step landed where the objective cannot be evaluated; keep the
            # trajectory at the last evaluable point.
            for records in (traj.rates, traj.base_rates, traj.grid_indices, traj.orders):
                records.pop()
            traj.status = Status.NUMERICAL_OVERFLOW
            traj.message = f"objective failed at {z!r}: {type(exc).__name__}: {exc}"
            break
        gsq = squared_norm(g)
        gnorm = math.sqrt(gsq) if math.isfinite(gsq) else math.inf
        traj.iterates.append(z.flat)
        traj.f_values.append(f)
        traj.grad_norms.append(gnorm)

        status = None
        if not (math.isfinite(f) and math.isfinite(gnorm)):
            status = Status.NUMERICAL_OVERFLOW
        elif gnorm < config.grad_tolerance or gsq == 0.0:
            status = Status.CONVERGED_GRAD_TOL
        elif f < config.divergence_value_threshold:
            status = Status.DIVERGED_VALUE
        elif z.norm() > config.divergence_norm_threshold:
            status = Status.DIVERGED_NORM
        elif config.cycle_detection is not None:
            for p in range(1, config.cycle_detection.max_period + 1):
                if _is_cycle(traj.iterates, p, config.cycle_detection.tol):
                    status, traj.period = Status.CYCLE_DETECTED, p
                    break
        if status is None and traj.iterations >= config.max_iterations:
            status = Status.MAX_ITERATIONS
        if status is not None:
            traj.status = status
            break

        try:
            with np.errstate(over="ignore", invalid="ignore"):
                z_new = _advance(traj, obj, z, g, f, config, prev)
        except ExhaustedGrid as exc:
            traj.status, traj.message = Status.EXHAUSTED_GRID, str(exc)
            break
        except NonFiniteValue as exc:
            traj.status, traj.message = Status.NUMERICAL_OVERFLOW, str(exc)
            break
        except CwArmijoError as exc:
            # Region violations and similar: the iterate left the admissible set.
            traj.status, traj.message = Status.NUMERICAL_OVERFLOW, f"{type(exc).__name__}: {exc}"
            break
        prev = (z, g)
        z = z_new

    traj.wall_time = time.perf_counter() - t0
    return traj
