"""Fit the bundled energy calibration to reference platform measurements.

Component costs come from a minimum-norm least-squares solve over the measured
single-sensor, early-fusion and late-fusion configurations. The system is
underdetermined (stems and branches are only observed in sums), so the
minimum-norm solution is the canonical choice; it is exact and non-negative
for the reference data.

Sensor measurement frequencies are not part of the reference data. They are
fitted, together with the two early-fusion branches that the compute
measurements do not observe, by a minimax linear program over the per-context
total-energy measurements (compute plus sensors, with unused sensors clock
gated). The radar frequency is pinned to its nominal 4 Hz scan rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import linprog

from ctxfusion.core import Branch, Configuration
from ctxfusion.energymodel import (
    FUSION_BLOCK,
    Calibration,
    ComponentCost,
    EnergyProfile,
    SensorPowerModel,
    stem_id,
)

# configuration -> (energy J, latency ms) measured on the reference platform
REFERENCE_COMPUTE = {
    "cam_left": (0.945, 21.57),
    "cam_right": (0.945, 21.57),
    "radar": (0.954, 21.85),
    "lidar": (0.954, 21.85),
    "early_cam_lidar": (1.379, 31.36),
    "cam_left+cam_right+lidar+radar": (3.798, 84.32),
}

# average total energy per frame (J): all-sensor late fusion and the context-adaptive plan
REFERENCE_LATE_TOTAL = 13.27
REFERENCE_ADAPTIVE_TOTAL = {
    "city": 5.45,
    "fog": 13.96,
    "junction": 2.87,
    "motorway": 2.87,
    "night": 12.10,
    "rain": 13.29,
    "rural": 3.81,
    "snow": 13.96,
}
REFERENCE_ADAPTIVE_OVERALL = 6.45
REFERENCE_SAVINGS_PCT = {
    "city": 58.91,
    "fog": -5.15,
    "junction": 78.40,
    "motorway": 78.40,
    "night": 8.81,
    "rain": -0.09,
    "rural": 71.28,
    "snow": -5.15,
    "overall": 51.41,
}

SENSOR_POWER = {
    # name: (total W, motor W)
    "camera_left": (1.9, 0.0),
    "camera_right": (1.9, 0.0),
    "lidar": (12.0, 2.4),
    "radar": (24.0, 2.4),
}
RADAR_FREQUENCY_HZ = 4.0
PLATFORM_POWER_W = 45.4


@dataclass(frozen=True)
class ComputeFit:
    profile: EnergyProfile
    residual_energy: float
    residual_latency_ms: float


def observed_branches() -> list[str]:
    return sorted({b for cfg in REFERENCE_COMPUTE for b in Configuration.parse(cfg).branches})


def fit_compute_profile(branches: Mapping[str, Branch]) -> ComputeFit:
    """Least-squares component costs for the branches observed in ``REFERENCE_COMPUTE``.

    Branches not observed get zero cost here; :func:`fit_sensor_calibration`
    fills them in.
    """
    observed = observed_branches()
    stems = sorted({s for b in observed for s in branches[b].stems})
    unknowns = [stem_id(s) for s in stems] + observed + [FUSION_BLOCK]
    col = {u: i for i, u in enumerate(unknowns)}
    a = np.zeros((len(REFERENCE_COMPUTE), len(unknowns)))
    e = np.zeros(len(REFERENCE_COMPUTE))
    t = np.zeros(len(REFERENCE_COMPUTE))
    for r, (label, (energy, latency_ms)) in enumerate(REFERENCE_COMPUTE.items()):
        cfg = Configuration.parse(label)
        for s in {s for b in cfg.branches for s in branches[b].stems}:
            a[r, col[stem_id(s)]] = 1.0
        for b in cfg.branches:
            a[r, col[b]] = 1.0
        if len(cfg) > 1:
            a[r, col[FUSION_BLOCK]] = 1.0
        e[r], t[r] = energy, latency_ms
    xe = np.linalg.lstsq(a, e, rcond=None)[0]
    xt = np.linalg.lstsq(a, t, rcond=None)[0]
    if (xe < -1e-12).any() or (xt < -1e-12).any():
        raise ValueError("least-squares component costs are negative; choose a different decomposition")
    costs = {u: ComponentCost(u, max(float(xe[i]), 0.0), max(float(xt[i]), 0.0) / 1000.0) for u, i in col.items()}
    for b in branches:
        costs.setdefault(b, ComponentCost(b, 0.0, 0.0))
        for s in branches[b].stems:
            costs.setdefault(stem_id(s), ComponentCost(stem_id(s), 0.0, 0.0))
    profile = EnergyProfile(costs, {b: br.stems for b, br in branches.items()}, PLATFORM_POWER_W)
    return ComputeFit(profile, float(np.abs(a @ xe - e).max()), float(np.abs(a @ xt - t).max()))


@dataclass(frozen=True)
class SensorFit:
    calibration: Calibration
    max_residual: float


def _sensors_of(cfg: Configuration, branches: Mapping[str, Branch]) -> set[str]:
    return {m.value for b in cfg.branches for m in branches[b].inputs}


def fit_sensor_calibration(
    branches: Mapping[str, Branch],
    rules: Mapping[str, Configuration],
    compute: EnergyProfile,
) -> SensorFit:
    """Fit lidar/camera per-frame energy and the unobserved early branches.

    Unknowns: per-frame active energy of the lidar and of each camera, and
    the energy of every branch absent from the compute measurements. The LP
    minimizes the worst absolute error over the late-fusion total and the
    per-context adaptive totals (each context runs ``rules[label]`` with
    unused sensors clock gated).
    """
    free = sorted(set(branches) - set(observed_branches()))
    names = ["sensor:lidar", "sensor:camera"] + free
    col = {n: i for i, n in enumerate(names)}
    radar_active = SENSOR_POWER["radar"][0] / RADAR_FREQUENCY_HZ
    radar_motor = SENSOR_POWER["radar"][1] / RADAR_FREQUENCY_HZ
    lidar_motor_frac = SENSOR_POWER["lidar"][1] / SENSOR_POWER["lidar"][0]

    def row(cfg: Configuration) -> tuple[np.ndarray, float]:
        coef = np.zeros(len(names))
        const = 0.0
        for c in compute.components(cfg):
            if c in col:
                coef[col[c]] += 1.0
            else:
                const += compute.costs[c].energy
        used = _sensors_of(cfg, branches)
        const += radar_active if "radar" in used else radar_motor
        coef[col["sensor:lidar"]] += 1.0 if "lidar" in used else lidar_motor_frac
        coef[col["sensor:camera"]] += ("camera_left" in used) + ("camera_right" in used)
        return coef, const

    late = Configuration.parse("cam_left+cam_right+lidar+radar")
    rows = [row(late) + (REFERENCE_LATE_TOTAL,)]
    for label, target in REFERENCE_ADAPTIVE_TOTAL.items():
        rows.append(row(rules[label]) + (target,))

    # variables: names..., t ; minimize t s.t. |coef.x + const - target| <= t
    n = len(names)
    c_obj = np.zeros(n + 1)
    c_obj[-1] = 1.0
    a_ub, b_ub = [], []
    for coef, const, target in rows:
        a_ub.append(np.append(coef, -1.0))
        b_ub.append(target - const)
        a_ub.append(np.append(-coef, -1.0))
        b_ub.append(const - target)
    res = linprog(c_obj, A_ub=np.array(a_ub), b_ub=np.array(b_ub), bounds=[(0, None)] * (n + 1), method="highs")
    if not res.success:
        raise ValueError(f"sensor calibration LP failed: {res.message}")
    x = res.x

    costs = dict(compute.costs)
    ref = compute.costs["early_cam_lidar"]
    seconds_per_joule = ref.latency / ref.energy
    for b in free:
        e = float(x[col[b]])
        costs[b] = ComponentCost(b, e, e * seconds_per_joule)
    profile = EnergyProfile(costs, compute.branch_stems, compute.platform_power)

    sensors = {
        "radar": SensorPowerModel("radar", *SENSOR_POWER["radar"], RADAR_FREQUENCY_HZ),
        "lidar": SensorPowerModel("lidar", *SENSOR_POWER["lidar"], SENSOR_POWER["lidar"][0] / float(x[col["sensor:lidar"]])),
    }
    for cam in ("camera_left", "camera_right"):
        sensors[cam] = SensorPowerModel(cam, *SENSOR_POWER[cam], SENSOR_POWER[cam][0] / float(x[col["sensor:camera"]]))
    return SensorFit(Calibration(profile, dict(sorted(sensors.items()))), float(x[-1]))


def fit_calibration(branches: Mapping[str, Branch], rules: Mapping[str, Configuration]) -> tuple[Calibration, ComputeFit, SensorFit]:
    compute = fit_compute_profile(branches)
    sensors = fit_sensor_calibration(branches, rules, compute.profile)
    return sensors.calibration, compute, sensors


def rounded(cal: Calibration, digits: int = 6) -> Calibration:
    """Round every fitted number so the shipped file stays readable."""
    costs = {k: ComponentCost(k, round(c.energy, digits), round(c.latency, digits + 3)) for k, c in cal.profile.costs.items()}
    profile = EnergyProfile(costs, cal.profile.branch_stems, cal.profile.platform_power)
    sensors = {
        k: SensorPowerModel(k, s.power, s.motor_power, round(s.frequency, digits), s.clock_gateable)
        for k, s in cal.sensors.items()
    }
    return Calibration(profile, sensors)


def bundled_calibration_text(config_path=None) -> str:
    """Regenerate the shipped ``calibration.toml`` from the default declarations."""
    from ctxfusion.config import DEFAULT_CONFIG, load_toml

    raw = load_toml(config_path or DEFAULT_CONFIG)
    branches = {k: Branch.make(k, *v) for k, v in raw["branches"].items()}
    rules = {k: Configuration.parse(v) for k, v in raw["gates"]["knowledge"].items()}
    cal, compute, sensors = fit_calibration(branches, rules)
    header = (
        "Energy calibration, generated by `python -m ctxfusion.calibration`.\n"
        "Compute costs: minimum-norm least squares over the reference configurations\n"
        f"(max residual {compute.residual_energy:.1e} J, {compute.residual_latency_ms:.1e} ms).\n"
        "Sensor frequencies and the early_stereo / early_lidar_radar branches: minimax LP over\n"
        f"per-context total energy with clock gating (max residual {sensors.max_residual:.4f} J).\n"
        "Radar frequency pinned at 4 Hz. Latencies in seconds, energies in joules."
    )
    from ctxfusion.energymodel import calibration_to_toml

    return calibration_to_toml(rounded(cal), header)


if __name__ == "__main__":
    import sys

    sys.stdout.write(bundled_calibration_text(sys.argv[1] if len(sys.argv) > 1 else None))
