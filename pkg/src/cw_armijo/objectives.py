"""Objective functions with analytic block gradients.

Every built-in evaluates on flat float64 arrays internally; ``Objective.value``
and ``Objective.gradient`` wrap those for block-structured callers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .core import (
    BlockGradient,
    BlockPartition,
    BlockVector,
    DimensionMismatch,
    ExclusionRegion,
    InvalidParameter,
    RegionViolation,
    UnknownFunction,
)

FlatFn = Callable[[np.ndarray], float]
FlatGrad = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Objective:
    name: str
    partition: BlockPartition
    fun: FlatFn
    jac: FlatGrad
    region: ExclusionRegion = field(default_factory=ExclusionRegion.none)
    # Points where the analytic gradient is undefined or non-Lipschitz.
    singular_distance: FlatFn | None = None
    c1: bool = True
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def value(self, z: BlockVector) -> float:
        return float(self.fun(z.flat))

    def gradient(self, z: BlockVector) -> BlockGradient:
        return BlockGradient(self.partition, self.jac(z.flat))

    def point(self, coords: Sequence[float]) -> BlockVector:
        return BlockVector(self.partition, coords)

    def with_region(self, region: ExclusionRegion) -> "Objective":
        return Objective(self.name, self.partition, self.fun, self.jac, region,
                         self.singular_distance, self.c1, self.metadata)


def _sign(v: float) -> float:
    return 1.0 if v > 0 else (-1.0 if v < 0 else 0.0)


def _positive(params: Mapping[str, Any], key: str, default: float) -> float:
    value = float(params.get(key, default))
    if not value > 0 or not math.isfinite(value):
        raise InvalidParameter(f"parameter {key!r} must be positive, got {value}")
    return value


def _region_from(params: Mapping[str, Any]) -> ExclusionRegion:
    region = params.get("region", "none")
    if region in (None, "none"):
        return ExclusionRegion.none()
    if region in ("x=0", "hyperplane"):
        return ExclusionRegion.hyperplane(0)
    raise InvalidParameter(f"unsupported region {region!r}; use 'none' or 'x=0'")


def abs_plus_linear(a: float = 2.0, region: str = "none") -> Objective:
    """f(x, y) = a|x| + y with sign(0) taken as 0."""
    a = _positive({"a": a}, "a", 2.0)

    def fun(z):
        return a * abs(z[0]) + z[1]

    def jac(z):
        return np.array([a * _sign(z[0]), 1.0])

    return Objective(
        "abs_plus_linear", BlockPartition((1, 1)), fun, jac, _region_from({"region": region}),
        singular_distance=lambda z: abs(z[0]), c1=False,
        metadata={"params": {"a": a}, "minimum": "unbounded below; descent should run to (0, -inf)"},
    )


def relu_plus_linear(a: float = 2.0) -> Objective:
    a = _positive({"a": a}, "a", 2.0)

    def fun(z):
        return a * max(z[0], 0.0) + z[1]

    def jac(z):
        return np.array([a if z[0] > 0 else 0.0, 1.0])

    return Objective(
        "relu_plus_linear", BlockPartition((1, 1)), fun, jac,
        singular_distance=lambda z: abs(z[0]), c1=False,
        metadata={"params": {"a": a}, "minimum": "unbounded below"},
    )


def abs_1d(a: float = 1.0) -> Objective:
    a = _positive({"a": a}, "a", 1.0)
    return Objective(
        "abs_1d", BlockPartition((1,)),
        lambda z: a * abs(z[0]),
        lambda z: np.array([a * _sign(z[0])]),
        singular_distance=lambda z: abs(z[0]), c1=False,
        metadata={"params": {"a": a}, "minimum": "x = 0"},
    )


def _cube_sin(x: float) -> float:
    if x == 0.0:
        return 0.0
    return x ** 3 * math.sin(1.0 / x)


def _cube_sin_prime(x: float) -> float:
    if x == 0.0:
        return 0.0
    u = 1.0 / x
    return 3.0 * x * x * math.sin(u) - x * math.cos(u)


def cube_sin_1d() -> Objective:
    """g(x) = x^3 sin(1/x), extended by g(0) = g'(0) = 0."""
    return Objective(
        "cube_sin_1d", BlockPartition((1,)),
        lambda z: _cube_sin(z[0]),
        lambda z: np.array([_cube_sin_prime(z[0])]),
        singular_distance=lambda z: abs(z[0]),
        metadata={"minimum": "infinitely many local minima accumulating at 0; one near 0.2452"},
    )


def cube_sin_2d() -> Objective:
    obj = separable([cube_sin_1d(), cube_sin_1d()])
    return Objective(
        "cube_sin_2d", obj.partition, obj.fun, obj.jac,
        singular_distance=lambda z: float(min(abs(z[0]), abs(z[1]))),
        metadata={"minimum": "separable sum of two cube_sin_1d"},
    )


def rosenbrock() -> Objective:
    def fun(z):
        x, y = z[0], z[1]
        return (x - 1.0) ** 2 + 100.0 * (y - x * x) ** 2

    def jac(z):
        x, y = z[0], z[1]
        r = y - x * x
        return np.array([2.0 * (x - 1.0) - 400.0 * x * r, 200.0 * r])

    return Objective(
        "rosenbrock", BlockPartition((1, 1)), fun, jac,
        metadata={"minimum": "(1, 1), value 0, the only critical point"},
    )


def quadratic(c: Sequence[float] = (1.0, 1.0), dims: Sequence[int] | None = None) -> Objective:
    """Sum over blocks of c_i * ||z_i||^2 / 2."""
    c = [float(v) for v in np.atleast_1d(c)]
    if any(not v > 0 for v in c):
        raise InvalidParameter(f"quadratic scales must be positive, got {c}")
    partition = BlockPartition(tuple(dims) if dims is not None else (1,) * len(c))
    if partition.k != len(c):
        raise DimensionMismatch(f"{len(c)} scales for {partition.k} blocks")
    scale = partition.expand(c)

    def fun(z):
        return float(0.5 * np.dot(scale * z, z))

    return Objective(
        "quadratic", partition, fun, lambda z: scale * z,
        metadata={"params": {"c": c}, "minimum": "origin"},
    )


def quartic_1d(c: float = 1.0) -> Objective:
    """c * x^4 / 4."""
    c = _positive({"c": c}, "c", 1.0)
    return Objective(
        "quartic_1d", BlockPartition((1,)),
        lambda z: 0.25 * c * z[0] ** 4,
        lambda z: np.array([c * z[0] ** 3]),
        metadata={"params": {"c": c}, "minimum": "x = 0"},
    )


def linear(c: Sequence[float] = (1.0,)) -> Objective:
    c = np.array(np.atleast_1d(c), dtype=np.float64)
    c.setflags(write=False)
    return Objective(
        "linear", BlockPartition((c.size,)),
        lambda z: float(np.dot(c, z)),
        lambda z: c.copy(),
        metadata={"params": {"c": c.tolist()}, "minimum": "unbounded below"},
    )


def separable(components: Sequence[Objective]) -> Objective:
    """f(z) = sum_i g_i(z_i): one block per component."""
    if not components:
        raise InvalidParameter("separable needs at least one component")
    components = list(components)
    partition = BlockPartition(tuple(g.partition.total for g in components))
    slices = partition.slices()
    funs = [g.fun for g in components]
    jacs = [g.jac for g in components]

    def fun(z):
        total = 0.0
        for f, s in zip(funs, slices):
            total += f(z[s])
        return total

    def jac(z):
        return np.concatenate([j(z[s]) for j, s in zip(jacs, slices)])

    dists = [g.singular_distance for g in components]

    def singular_distance(z):
        return min((d(z[s]) for d, s in zip(dists, slices) if d is not None), default=math.inf)

    return Objective(
        "separable", partition, fun, jac,
        singular_distance=singular_distance if any(d is not None for d in dists) else None,
        c1=all(g.c1 for g in components),
        metadata={"components": [g.name for g in components]},
    )


BUILTINS: dict[str, tuple[Callable[..., Objective], str, str]] = {
    "abs_plus_linear": (abs_plus_linear, "abs_plus_linear(a)", "a|x| + y, a > 0 (default 2)"),
    "relu_plus_linear": (relu_plus_linear, "relu_plus_linear(a)", "a max(x, 0) + y"),
    "abs_1d": (abs_1d, "abs_1d(a)", "a|x| in one variable"),
    "cube_sin_1d": (cube_sin_1d, "cube_sin_1d", "x^3 sin(1/x)"),
    "cube_sin_2d": (cube_sin_2d, "cube_sin_2d", "x^3 sin(1/x) + y^3 sin(1/y)"),
    "rosenbrock": (rosenbrock, "rosenbrock", "(x - 1)^2 + 100 (y - x^2)^2"),
    "quadratic": (quadratic, "quadratic(c, dims)", "sum_i c_i ||z_i||^2 / 2"),
    "quartic_1d": (quartic_1d, "quartic_1d(c)", "c x^4 / 4"),
    "linear": (linear, "linear(c)", "<c, z> in one block"),
    "separable": (separable, "separable(components)", "sum of 1-block objectives, one block each"),
}


def builtin(name: str, params: Mapping[str, Any] | None = None) -> Objective:
    """Construct a built-in objective by name.

    ``separable`` takes ``components``: a list of ``{"name": ..., "params": ...}``
    mappings or ready-made objectives.
    """
    params = dict(params or {})
    if name not in BUILTINS:
        raise UnknownFunction(f"unknown function {name!r}; known: {', '.join(BUILTINS)}")
    if name == "separable":
        parts = []
        for comp in params.get("components", []):
            if isinstance(comp, Objective):
                parts.append(comp)
            else:
                parts.append(builtin(comp["name"], comp.get("params")))
        return separable(parts)
    factory = BUILTINS[name][0]
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for {name}: {exc}") from None


def fd_gradient(obj: Objective, z: BlockVector, h: float = 1e-6) -> BlockGradient:
    """Central finite differences, one coordinate at a time."""
    if not h > 0:
        raise InvalidParameter(f"step h must be positive, got {h}")
    base = np.array(z.flat)
    if obj.region.active and obj.region.distance(base) <= h:
        raise RegionViolation(f"probes of radius {h} around {z!r} reach {obj.region.describe()}")
    out = np.empty_like(base)
    for j in range(base.size):
        plus = base.copy()
        plus[j] += h
        minus = base.copy()
        minus[j] -= h
        out[j] = (obj.fun(plus) - obj.fun(minus)) / (2.0 * h)
    return BlockGradient(z.partition, out)
