"""Post-hoc audits of optimization trajectories.

None of these prove anything about the limit of a sequence; they check what a
finite run can show: accepted steps really satisfy the sufficient-decrease
inequality, steps shrink, the tail of the run stays in a small ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import BlockVector, CwArmijoError, HyperParams
from .objectives import Objective, fd_gradient
from .optimizers import Status, Trajectory


class MissingRates(CwArmijoError):
    pass


class TooShort(CwArmijoError):
    pass


@dataclass
class DescentAudit:
    violations: list[float] = field(default_factory=list)

    @property
    def max_violation(self) -> float:
        return max(self.violations, default=-math.inf)

    @property
    def worst_step(self) -> int | None:
        if not self.violations:
            return None
        return int(np.argmax(self.violations))

    def to_dict(self) -> dict:
        return {
            "steps": len(self.violations),
            "max_violation": None if not self.violations else self.max_violation,
            "worst_step": self.worst_step,
        }


def descent_audit(traj: Trajectory, hp: HyperParams | None = None) -> DescentAudit:
    """Recompute f(z_{n+1}) - f(z_n) + alpha * sum_i delta_i ||d_i f(z_n)||^2 per step.

    Positive entries are violations of the accepted inequality.
    """
    if traj.method == "standard" or len(traj.rates) < traj.iterations:
        raise MissingRates("trajectory has no line-search rates to audit")
    hp = hp or traj.config.hp
    obj = traj.objective
    out = DescentAudit()
    for n in range(traj.iterations):
        z = traj.point(n)
        g = obj.gradient(z)
        f0 = obj.value(z)
        f1 = float(obj.fun(traj.iterates[n + 1]))
        predicted = 0.0
        for r, s in zip(traj.rates[n], g.block_sq):
            predicted += r * s
        out.violations.append((f1 - f0) + hp.alpha * predicted)
    return out


def critical_point_check(obj: Objective, z: BlockVector | Sequence[float], tol: float) -> bool:
    if not isinstance(z, BlockVector):
        z = obj.point(z)
    return float(np.linalg.norm(obj.gradient(z).flat)) < tol


def step_norms(traj: Trajectory) -> np.ndarray:
    pts = np.asarray(traj.iterates)
    return np.linalg.norm(np.diff(pts, axis=0), axis=1)


TAIL_DECAY = 1e-3


def step_norm_trend(traj: Trajectory, vanish_tol: float | None = None) -> tuple[float, str]:
    """Largest step over the final 10% of iterations and a classification.

    ``vanishing``: the last step is below ``vanish_tol`` (default
    ``10 * grad_tolerance * delta0``, the largest step a converged run can
    take) and the largest tail step has decayed to at most ``TAIL_DECAY``
    times the largest step of the whole run.  ``diverging-value``: the run
    stopped because f fell below the divergence threshold.  Anything else is
    ``neither``, which flags an anomaly only for C^1 objectives.
    """
    if traj.iterations < 20:
        raise TooShort(f"need at least 20 iterations, got {traj.iterations}")
    cfg = traj.config
    if vanish_tol is None:
        vanish_tol = 10.0 * cfg.grad_tolerance * cfg.hp.delta0
    steps = step_norms(traj)
    tail = steps[-max(1, len(steps) // 10):]
    tail_max = float(np.max(tail))
    if traj.status is Status.DIVERGED_VALUE:
        return tail_max, "diverging-value"
    if tail[-1] < vanish_tol and tail_max <= TAIL_DECAY * float(np.max(steps)):
        return tail_max, "vanishing"
    return tail_max, "neither"


def cluster_tail_diameter(traj: Trajectory, K: int) -> float:
    """Largest pairwise distance among the last ``K`` iterates."""
    if K < 1 or K > len(traj.iterates):
        raise TooShort(f"K={K} but the trajectory holds {len(traj.iterates)} iterates")
    pts = np.asarray(traj.iterates[-K:])
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=-1)).max())


@dataclass
class GradCheckReport:
    points: list[list[float]]
    rel_errors: list[float]
    tol: float

    @property
    def failures(self) -> list[int]:
        return [i for i, e in enumerate(self.rel_errors) if not e <= self.tol]

    @property
    def max_error(self) -> float:
        return max(self.rel_errors, default=0.0)

    @property
    def ok(self) -> bool:
        return not self.failures


def gradient_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, 1): relative for large gradients, absolute near zero."""
    return float(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), 1.0))


def grad_check(obj: Objective, points: Iterable[Sequence[float]], h: float = 1e-6,
               tol: float = 1e-6) -> GradCheckReport:
    pts, errs = [], []
    for p in points:
        z = obj.point(p)
        errs.append(gradient_rel_error(obj.gradient(z).flat, fd_gradient(obj, z, h).flat))
        pts.append([float(v) for v in z.flat])
    return GradCheckReport(pts, errs, tol)


def summarize(traj: Trajectory) -> dict:
    """Diagnostics block for the run summary."""
    out: dict = {}
    try:
        out["descent_audit"] = descent_audit(traj).to_dict()
    except MissingRates:
        out["descent_audit"] = None
    try:
        tail_max, label = step_norm_trend(traj)
        out["step_norm_trend"] = {"tail_max_step": tail_max, "classification": label}
    except TooShort:
        out["step_norm_trend"] = None
    K = min(50, len(traj.iterates))
    out["cluster_tail_diameter"] = {"K": K, "diameter": cluster_tail_diameter(traj, K)}
    tol = 10.0 * traj.config.grad_tolerance
    final_g = traj.grad_norms[-1]
    out["critical_point"] = bool(math.isfinite(final_g) and final_g < tol)
    return out

