"""Candidate filtering, joint energy/loss scalarization and configuration selection.

Candidates are the configurations whose estimated loss is within ``gamma`` of
the best estimate. Among them the one minimizing
``(1 - lambda_e) * loss + lambda_e * energy / energy_scale`` is chosen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from ctxfusion.core import Configuration


@dataclass(frozen=True)
class OptimizerParams:
    gamma: float = 0.5
    lambda_e: float = 0.0
    energy_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lambda_e <= 1.0:
            raise ValueError(f"lambda_e must lie in [0, 1], got {self.lambda_e}")
        if not self.gamma >= 0.0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if not self.energy_scale > 0.0:
            raise ValueError(f"energy_scale must be positive, got {self.energy_scale}")


@dataclass(frozen=True)
class SelectionResult:
    chosen: Configuration
    best_loss_config: Configuration
    candidates: tuple[Configuration, ...]
    joint_losses: Mapping[Configuration, float]
    estimate: float = float("nan")


@dataclass(frozen=True)
class SweepPoint:
    lambda_e: float
    selection: SelectionResult
    loss: float
    energy: float


def _best_loss(estimates: Mapping[Configuration, float]) -> Configuration:
    if not estimates:
        raise ValueError("empty loss estimate table")
    return min(estimates, key=lambda c: (estimates[c], c.key))


def candidate_set(estimates: Mapping[Configuration, float], gamma: float) -> list[Configuration]:
    """Configurations with estimate ``<= best + gamma``, canonically ordered."""
    best = _best_loss(estimates)
    bound = estimates[best] + gamma
    return sorted((c for c, v in estimates.items() if v <= bound), key=lambda c: c.key)


def joint_loss(loss: float, energy: float, params: OptimizerParams) -> float:
    lam = params.lambda_e
    return (1.0 - lam) * loss + lam * (energy / params.energy_scale)


def select_configuration(
    estimates: Mapping[Configuration, float],
    energies: Mapping[Configuration, float],
    params: OptimizerParams,
) -> SelectionResult:
    best = _best_loss(estimates)
    cands = candidate_set(estimates, params.gamma)
    missing = [c for c in cands if c not in energies]
    if missing:
        raise KeyError(f"no energy for configuration {missing[0]}")
    joint = {c: joint_loss(estimates[c], energies[c], params) for c in cands}
    chosen = min(cands, key=lambda c: (joint[c], energies[c], c.key))
    return SelectionResult(chosen, best, tuple(cands), joint, estimates[chosen])


def pareto_sweep(
    estimates: Mapping[Configuration, float],
    energies: Mapping[Configuration, float],
    gamma: float,
    lambdas: Sequence[float],
    energy_scale: float = 1.0,
) -> list[SweepPoint]:
    if not lambdas:
        raise ValueError("lambda list must be non-empty")
    out = []
    for lam in lambdas:
        sel = select_configuration(estimates, energies, OptimizerParams(gamma, lam, energy_scale))
        out.append(SweepPoint(lam, sel, estimates[sel.chosen], energies[sel.chosen]))
    return out


def is_dominated(point: Configuration, pool: Sequence[Configuration], losses: Mapping, energies: Mapping) -> bool:
    """True when some member of ``pool`` beats ``point`` strictly on both loss and energy."""
    lp, ep = losses[point], energies[point]
    return any(losses[c] < lp and energies[c] < ep for c in pool)


def finite_table(estimates: Mapping[Configuration, float]) -> bool:
    return all(math.isfinite(v) for v in estimates.values())
