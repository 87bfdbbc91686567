"""Compute-platform and sensor energy accounting.

A configuration's compute cost is the sum of its unique stems, its branches
and, for ensembles of more than one branch, the fusion block. Latency is
summed the same way (sequential execution). Sensor energy per frame is
``(P_meas + P_motor) / f`` where clock gating zeroes ``P_meas`` but leaves the
motor of a rotating sensor spinning.

Calibration files are TOML::

    platform_power_w = 45.4

    [stems.camera]
    energy_j = 0.5339
    latency_s = 0.0127

    [branches.cam_left]
    stems = ["camera"]
    energy_j = 0.4111
    latency_s = 0.00887

    [fusion_block]
    energy_j = 0.5339
    latency_s = 0.0102

    [sensors.radar]
    power_w = 24.0
    motor_power_w = 2.4
    frequency_hz = 4.0
    clock_gateable = true
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ctxfusion.config import load_toml
from ctxfusion.core import Configuration

FUSION_BLOCK = "fusion_block"


def stem_id(name: str) -> str:
    return f"stem:{name}"


@dataclass(frozen=True)
class ComponentCost:
    component: str
    energy: float
    latency: float

    def __post_init__(self):
        if not (self.energy >= 0 and self.latency >= 0):
            raise ValueError(f"{self.component}: energy and latency must be non-negative")


@dataclass(frozen=True)
class EnergyProfile:
    costs: Mapping[str, ComponentCost]
    branch_stems: Mapping[str, frozenset[str]]
    platform_power: float = 45.4

    def __post_init__(self):
        if FUSION_BLOCK not in self.costs:
            raise ValueError("energy profile lacks a fusion_block entry")
        for b, stems in self.branch_stems.items():
            if b not in self.costs:
                raise ValueError(f"energy profile lacks branch {b!r}")
            for s in stems:
                if stem_id(s) not in self.costs:
                    raise ValueError(f"energy profile lacks stem {s!r} used by branch {b!r}")

    def components(self, cfg: Configuration) -> list[str]:
        missing = sorted(b for b in cfg.branches if b not in self.branch_stems)
        if missing:
            raise KeyError(f"unknown branch id {missing[0]!r} in energy profile")
        stems = sorted({s for b in cfg.branches for s in self.branch_stems[b]})
        parts = [stem_id(s) for s in stems] + sorted(cfg.branches)
        if len(cfg.branches) > 1:
            parts.append(FUSION_BLOCK)
        return parts


@dataclass(frozen=True)
class SensorPowerModel:
    name: str
    power: float
    motor_power: float
    frequency: float
    clock_gateable: bool = True

    def __post_init__(self):
        if not 0.0 <= self.motor_power <= self.power:
            raise ValueError(f"sensor {self.name}: need 0 <= motor_power <= power")
        if not self.frequency > 0:
            raise ValueError(f"sensor {self.name}: frequency must be positive")

    @property
    def measurement_power(self) -> float:
        return self.power - self.motor_power


@dataclass(frozen=True)
class Calibration:
    profile: EnergyProfile
    sensors: Mapping[str, SensorPowerModel] = field(default_factory=dict)


def config_energy(cfg: Configuration, profile: EnergyProfile) -> tuple[float, float]:
    """Return ``(energy_J, latency_s)`` of running ``cfg`` once."""
    parts = [profile.costs[c] for c in profile.components(cfg)]
    return math.fsum(p.energy for p in parts), math.fsum(p.latency for p in parts)


def sensor_energy(s: SensorPowerModel, clock_gated: bool) -> float:
    """Joules per frame for one sensor."""
    if clock_gated and not s.clock_gateable:
        raise ValueError(f"sensor {s.name} cannot be clock gated")
    meas = 0.0 if clock_gated else s.power - s.motor_power
    return (meas + s.motor_power) / s.frequency


def total_energy(
    cfg: Configuration,
    profile: EnergyProfile,
    sensors: Mapping[str, SensorPowerModel],
    gating_plan: Mapping[str, bool],
) -> float:
    """Compute energy of ``cfg`` plus every declared sensor under ``gating_plan``.

    ``gating_plan[name]`` is True when the sensor is clock gated. Sensors absent
    from the plan are treated as active.
    """
    unknown = sorted(set(gating_plan) - set(sensors))
    if unknown:
        raise KeyError(f"gating plan names undeclared sensor {unknown[0]!r}")
    e, _ = config_energy(cfg, profile)
    return e + math.fsum(sensor_energy(s, gating_plan.get(name, False)) for name, s in sensors.items())


def savings(eco: float, baseline: float) -> float:
    """Fractional energy saved relative to ``baseline`` (negative when ``eco`` costs more)."""
    return 1.0 - eco / baseline


def load_calibration(path: str | Path) -> Calibration:
    raw = load_toml(path)
    return calibration_from_dict(raw)


def calibration_from_dict(raw: Mapping) -> Calibration:
    costs: dict[str, ComponentCost] = {}
    for name, v in raw.get("stems", {}).items():
        costs[stem_id(name)] = ComponentCost(stem_id(name), float(v["energy_j"]), float(v["latency_s"]))
    branch_stems = {}
    for name, v in raw.get("branches", {}).items():
        costs[name] = ComponentCost(name, float(v["energy_j"]), float(v["latency_s"]))
        branch_stems[name] = frozenset(v["stems"])
    fb = raw.get(FUSION_BLOCK)
    if fb is None:
        raise ValueError("calibration lacks a [fusion_block] table")
    costs[FUSION_BLOCK] = ComponentCost(FUSION_BLOCK, float(fb["energy_j"]), float(fb["latency_s"]))
    profile = EnergyProfile(costs, branch_stems, float(raw.get("platform_power_w", 45.4)))
    sensors = {
        name: SensorPowerModel(
            name,
            float(v["power_w"]),
            float(v.get("motor_power_w", 0.0)),
            float(v["frequency_hz"]),
            bool(v.get("clock_gateable", True)),
        )
        for name, v in raw.get("sensors", {}).items()
    }
    return Calibration(profile, sensors)


def calibration_to_toml(cal: Calibration, header: str = "") -> str:
    lines = [f"# {ln}" if ln else "#" for ln in header.splitlines()]
    if lines:
        lines.append("")
    p = cal.profile
    lines.append(f"platform_power_w = {p.platform_power!r}")
    for cid in sorted(c for c in p.costs if c.startswith("stem:")):
        c = p.costs[cid]
        lines += ["", f"[stems.{cid[5:]}]", f"energy_j = {c.energy!r}", f"latency_s = {c.latency!r}"]
    for b in sorted(p.branch_stems):
        c = p.costs[b]
        stems = ", ".join(f'"{s}"' for s in sorted(p.branch_stems[b]))
        lines += ["", f"[branches.{b}]", f"stems = [{stems}]", f"energy_j = {c.energy!r}", f"latency_s = {c.latency!r}"]
    c = p.costs[FUSION_BLOCK]
    lines += ["", f"[{FUSION_BLOCK}]", f"energy_j = {c.energy!r}", f"latency_s = {c.latency!r}"]
    for name in sorted(cal.sensors):
        s = cal.sensors[name]
        lines += [
            "",
            f"[sensors.{name}]",
            f"power_w = {s.power!r}",
            f"motor_power_w = {s.motor_power!r}",
            f"frequency_hz = {s.frequency!r}",
            f"clock_gateable = {'true' if s.clock_gateable else 'false'}",
        ]
    return "\n".join(lines) + "\n"
