"""Armijo tests and backtracking over the grid ``beta**n * delta0``.

The coordinate-wise search builds one rate per block in a chosen order.  Each
block scans the grid from the top and keeps the first candidate for which the
coordinate-wise sufficient-decrease inequality holds, with blocks already
visited holding their chosen rates and blocks not yet visited holding the base
rate.  Stopping at the base rate is always safe: that exact rate vector was
accepted by the previous step of the sweep.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import (
    BlockGradient,
    BlockVector,
    ExhaustedGrid,
    HyperParams,
    InvalidParameter,
    LearningRates,
    NonFiniteValue,
    ZeroGradient,
    squared_norm,
)
from .objectives import Objective

SECANT_MIN_DISPLACEMENT = 1e-12


def _predicted_decrease(rates: Sequence[float], block_sq: Sequence[float]) -> float:
    total = 0.0
    for r, s in zip(rates, block_sq):
        total += r * s
    return total


def _decrease_ok(obj: Objective, f0: float, trial: np.ndarray,
                 predicted: float, alpha: float) -> bool:
    f1 = float(obj.fun(trial))
    if not math.isfinite(f1):
        raise NonFiniteValue(f"objective is {f1} at trial point {trial!r}")
    return f1 - f0 <= -alpha * predicted


def _cw_ok(obj: Objective, z: BlockVector, g: BlockGradient, rates: Sequence[float],
           alpha: float, f0: float) -> bool:
    trial = z.flat - z.partition.expand(rates) * g.flat
    return _decrease_ok(obj, f0, trial, _predicted_decrease(rates, g.block_sq), alpha)


def cw_armijo_holds(obj: Objective, z: BlockVector, g: BlockGradient,
                    rates: Sequence[float], alpha: float, f0: float | None = None) -> bool:
    """Coordinate-wise sufficient decrease for one rate per block.

    ``f0`` may be passed to skip re-evaluating f(z).
    """
    if len(rates) != z.partition.k:
        raise InvalidParameter(f"need {z.partition.k} rates, got {len(rates)}")
    if any(not r > 0 for r in rates):
        raise InvalidParameter(f"rates must be positive, got {list(rates)}")
    if f0 is None:
        f0 = obj.value(z)
    return _cw_ok(obj, z, g, rates, alpha, f0)


def armijo_holds(obj: Objective, z: BlockVector, g: BlockGradient, delta: float,
                 alpha: float, f0: float | None = None) -> bool:
    """Classical Armijo test f(z - delta g) - f(z) <= -alpha delta ||g||^2.

    The right-hand side is accumulated block by block, the same way as the
    coordinate-wise test, so a uniform rate vector gets an identical verdict.
    """
    if not delta > 0:
        raise InvalidParameter(f"delta must be positive, got {delta}")
    if f0 is None:
        f0 = obj.value(z)
    trial = z.flat - delta * g.flat
    predicted = _predicted_decrease([delta] * z.partition.k, g.block_sq)
    return _decrease_ok(obj, f0, trial, predicted, alpha)


def base_backtracking(obj: Objective, z: BlockVector, g: BlockGradient, hp: HyperParams,
                      cap_value: float = math.inf, f0: float | None = None,
                      alpha: float | None = None) -> tuple[float, int]:
    """Largest grid step below ``cap_value`` satisfying Armijo's condition.

    ``alpha`` defaults to ``hp.alpha``.
    """
    if squared_norm(g) == 0.0:
        raise ZeroGradient("base backtracking called at a critical point")
    if f0 is None:
        f0 = obj.value(z)
    if alpha is None:
        alpha = hp.alpha
    for n, delta in enumerate(hp.grid):
        if delta >= cap_value:
            continue
        if armijo_holds(obj, z, g, delta, alpha, f0):
            return delta, n
    raise ExhaustedGrid(
        f"no step among {hp.max_grid_depth + 1} grid values satisfies Armijo at {z!r}"
    )


def cw_backtracking(obj: Objective, z: BlockVector, g: BlockGradient, hp: HyperParams,
                    order: Sequence[int] | None = None, cap_value: float = math.inf,
                    f0: float | None = None) -> LearningRates:
    """Per-block rates built sequentially in ``order`` on top of the base rate."""
    k = z.partition.k
    order = list(range(k)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(k)):
        raise InvalidParameter(f"order {order} is not a permutation of {k} blocks")
    if f0 is None:
        f0 = obj.value(z)
    base, base_n = base_backtracking(obj, z, g, hp, cap_value, f0, hp.base_alpha)
    rates = [base] * k
    indices = [base_n] * k
    block_sq = g.block_sq
    grid = hp.grid
    first_admissible = next(n for n, d in enumerate(grid) if d < cap_value)

    for i in order:
        if block_sq[i] == 0.0:
            # Rate multiplies a zero step; the verdict cannot depend on it.
            rates[i], indices[i] = grid[first_admissible], first_admissible
            continue
        for n in range(first_admissible, base_n):
            trial_rates = list(rates)
            trial_rates[i] = grid[n]
            if _cw_ok(obj, z, g, trial_rates, hp.alpha, f0):
                rates[i], indices[i] = grid[n], n
                break
        # Falling through leaves rates[i] at the base rate, accepted one step earlier.
    return LearningRates(base, base_n, tuple(rates), tuple(indices))


def ordering_heuristic(prev: tuple[BlockVector, BlockGradient] | None,
                       curr: tuple[BlockVector, BlockGradient],
                       fallback: Sequence[int]) -> list[int]:
    """Search blocks in decreasing order of their secant Lipschitz estimate.

    Blocks whose displacement is below ``SECANT_MIN_DISPLACEMENT`` have no
    estimate and stay at their fallback positions; the remaining blocks are
    ranked among the other positions.  Ties keep the fallback order.
    """
    fallback = list(fallback)
    if prev is None:
        return fallback
    est = lipschitz_estimates(prev, curr)
    slots = [pos for pos, i in enumerate(fallback) if not math.isnan(est[i])]
    ranked = sorted((fallback[pos] for pos in slots), key=lambda i: -est[i])
    out = list(fallback)
    for pos, i in zip(slots, ranked):
        out[pos] = i
    return out


def lipschitz_estimates(prev: tuple[BlockVector, BlockGradient],
                        curr: tuple[BlockVector, BlockGradient]) -> list[float]:
    """Secant estimates per block; NaN where the displacement is too small."""
    (z0, g0), (z1, g1) = prev, curr
    out = []
    for i in range(z1.partition.k):
        dz = float(np.linalg.norm(z1.block(i) - z0.block(i)))
        if dz > SECANT_MIN_DISPLACEMENT:
            out.append(float(np.linalg.norm(g1.block(i) - g0.block(i))) / dz)
        else:
            out.append(math.nan)
    return out
