"""Block-partitioned vectors, hyperparameters, exclusion regions and the step grid."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np


class CwArmijoError(Exception):
    """Base class for errors raised by this package."""


class ZeroGradientWithCap(CwArmijoError):
    pass


class ZeroGradient(CwArmijoError):
    pass


class RegionViolation(CwArmijoError):
    pass


class NonFiniteValue(CwArmijoError):
    pass


class ExhaustedGrid(CwArmijoError):
    pass


class InvalidParameter(CwArmijoError, ValueError):
    pass


class UnknownFunction(CwArmijoError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DimensionMismatch(CwArmijoError, ValueError):
    pass


@dataclass(frozen=True)
class BlockPartition:
    """Sizes (m_1, ..., m_k) of the coordinate blocks of R^m."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise InvalidParameter(f"block dimensions must be positive, got {self.dims!r}")
        object.__setattr__(self, "dims", dims)

    @property
    def k(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return sum(self.dims)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out = [0]
        for d in self.dims:
            out.append(out[-1] + d)
        return tuple(out)

    def slices(self) -> list[slice]:
        o = self.offsets
        return [slice(o[i], o[i + 1]) for i in range(self.k)]

    @cached_property
    def unit_blocks(self) -> bool:
        return all(d == 1 for d in self.dims)

    def expand(self, per_block: Sequence[float]) -> np.ndarray:
        """Repeat one value per block into one value per coordinate."""
        values = np.asarray(per_block, dtype=np.float64)
        return values if self.unit_blocks else np.repeat(values, self.dims)

    def block_label(self, i: int) -> str:
        if self.k == 2:
            return "xy"[i]
        return str(i + 1)


def _frozen_flat(partition: BlockPartition, flat) -> np.ndarray:
    arr = np.array(flat, dtype=np.float64).reshape(-1)
    if arr.size != partition.total:
        raise DimensionMismatch(
            f"expected {partition.total} coordinates for blocks {partition.dims}, got {arr.size}"
        )
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class _Blocked:
    partition: BlockPartition
    flat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "flat", _frozen_flat(self.partition, self.flat))

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[float]]):
        arrays = [np.atleast_1d(np.asarray(b, dtype=np.float64)).reshape(-1) for b in blocks]
        partition = BlockPartition(tuple(a.size for a in arrays))
        return cls(partition, np.concatenate(arrays))

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.flat[s] for s in self.partition.slices()]

    def block(self, i: int) -> np.ndarray:
        o = self.partition.offsets
        return self.flat[o[i]:o[i + 1]]

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.partition == other.partition
            and np.array_equal(self.flat, other.flat)
        )

    def __hash__(self):
        return hash((self.partition, self.flat.tobytes()))

    def __repr__(self):
        inner = ", ".join("(" + ", ".join(repr(float(v)) for v in b) + ")" for b in self.blocks)
        return f"{type(self).__name__}({inner})"


class BlockVector(_Blocked):
    """A point z = (x, y, ...) split into coordinate blocks.

    Components must be finite 64-bit floats.
    """

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isfinite(self.flat)):
            raise NonFiniteValue(f"non-finite component in {self.flat!r}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat))


class BlockGradient(_Blocked):
    """Per-block partial gradients sharing the partition of the point."""

    @cached_property
    def block_sq(self) -> tuple[float, ...]:
        return tuple(float(np.dot(b, b)) for b in self.blocks)


def block_squared_norm(g: BlockGradient, i: int) -> float:
    return g.block_sq[i]


def squared_norm(g: BlockGradient) -> float:
    """Sum of the per-block squared norms, accumulated block by block."""
    total = 0.0
    for s in g.block_sq:
        total += s
    return total


@dataclass(frozen=True)
class HyperParams:
    """Armijo constant ``alpha`` and the step grid ``beta**n * delta0``.

    ``base_uses_alpha`` selects whether the base rate search uses the same
    ``alpha``-scaled inequality as the per-block searches (default) or the
    stricter form with the factor dropped.
    """

    alpha: float = 0.5
    beta: float = 0.5
    delta0: float = 2.0
    max_grid_depth: int = 200
    base_uses_alpha: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidParameter(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise InvalidParameter(f"beta must lie in (0, 1), got {self.beta}")
        if not (self.delta0 > 0.0 and math.isfinite(self.delta0)):
            raise InvalidParameter(f"delta0 must be positive, got {self.delta0}")
        if int(self.max_grid_depth) < 1:
            raise InvalidParameter(f"max_grid_depth must be >= 1, got {self.max_grid_depth}")

    @cached_property
    def grid(self) -> tuple[float, ...]:
        values = [float(self.delta0)]
        for _ in range(int(self.max_grid_depth)):
            values.append(values[-1] * self.beta)
        return tuple(values)

    @property
    def base_alpha(self) -> float:
        return self.alpha if self.base_uses_alpha else 1.0

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "delta0": self.delta0,
            "max_grid_depth": self.max_grid_depth,
            "base_uses_alpha": self.base_uses_alpha,
        }


def candidate(hp: HyperParams, n: int) -> float:
    """Return beta**n * delta0, built by repeated multiplication."""
    if not 0 <= n <= hp.max_grid_depth:
        raise ExhaustedGrid(f"grid index {n} outside [0, {hp.max_grid_depth}]")
    return hp.grid[n]


@dataclass(frozen=True)
class ExclusionRegion:
    """Distance oracle to a closed set A where the objective is not C^1.

    ``kind`` is one of ``none``, ``coordinate-hyperplane`` or ``custom``.
    """

    kind: str = "none"
    distance_fn: Callable[[np.ndarray], float] | None = field(default=None, compare=False)
    coordinate: int | None = None

    @classmethod
    def none(cls) -> "ExclusionRegion":
        return cls()

    @classmethod
    def hyperplane(cls, coordinate: int) -> "ExclusionRegion":
        """The set {z : z_j = 0} for flat coordinate index ``coordinate``."""
        return cls("coordinate-hyperplane", coordinate=int(coordinate))

    @classmethod
    def custom(cls, distance_fn: Callable[[np.ndarray], float]) -> "ExclusionRegion":
        return cls("custom", distance_fn=distance_fn)

    @property
    def active(self) -> bool:
        return self.kind != "none"

    def distance(self, z: BlockVector | np.ndarray) -> float:
        flat = z.flat if isinstance(z, _Blocked) else np.asarray(z, dtype=np.float64)
        if self.kind == "none":
            return math.inf
        if self.kind == "coordinate-hyperplane":
            return abs(float(flat[self.coordinate]))
        if self.kind == "custom":
            return float(self.distance_fn(flat))
        raise InvalidParameter(f"unknown region kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "coordinate-hyperplane":
            return f"{{z_{self.coordinate + 1} = 0}}"
        return self.kind


def cap(region: ExclusionRegion, z: BlockVector, g: BlockGradient) -> float:
    """Upper bound r(z)/||grad f(z)|| on every step size; inf without a region."""
    if not region.active:
        return math.inf
    r = region.distance(z)
    if r <= 0.0:
        raise RegionViolation(f"point {z!r} lies in the exclusion set {region.describe()}")
    sq = squared_norm(g)
    if sq == 0.0:
        raise ZeroGradientWithCap("gradient vanishes; treat the point as critical")
    return r / math.sqrt(sq)


@dataclass(frozen=True)
class LearningRates:
    """Base rate delta(z) and the per-block rates chosen on the grid."""

    base: float
    base_index: int
    per_block: tuple[float, ...]
    grid_indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_block", tuple(float(r) for r in self.per_block))
        object.__setattr__(self, "grid_indices", tuple(int(n) for n in self.grid_indices))
        if len(self.per_block) != len(self.grid_indices):
            raise DimensionMismatch("one grid index per block rate is required")
