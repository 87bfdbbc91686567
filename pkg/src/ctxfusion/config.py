"""Run configuration: declarations, calibration paths, gates, optimizer and benchmark settings."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


def load_toml(path: str | Path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


DATA_DIR = Path(__file__).parent / "data"
DEFAULT_CONFIG = DATA_DIR / "run.toml"


def _req(raw: Mapping, key: str, where: str) -> Any:
    if key not in raw:
        raise ConfigError(f"missing field {where}{key}")
    return raw[key]


def _floats(v: Any, name: str) -> tuple[float, ...]:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{name} must be a non-empty list of numbers")
    try:
        return tuple(float(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a non-empty list of numbers") from None


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI command needs, resolved from one TOML file."""

    base_dir: Path
    sensors: tuple[str, ...]
    branches: dict  # id -> Branch
    calibration_path: Path
    quality_path: Path
    gate_table_path: Path | None
    loss_miss: float = 4.0
    loss_fp: float = 1.0
    loss_eps: float = 1e-7
    fusion_iou: float = 0.55
    confidence_rescale: bool = True
    gamma: float = 0.5
    energy_scale: float = 1.0
    lambdas: tuple[float, ...] = (0.0, 0.01, 0.05, 0.1, 0.5, 1.0)
    max_configuration_size: int | None = None
    sweep_gates: tuple[str, ...] = ("loss_oracle", "table_predictor", "knowledge")
    compare_gate: str = "table_predictor"
    compare_lambdas: tuple[float, ...] = (0.0, 0.01, 0.05)
    knowledge_rules: dict = field(default_factory=dict)  # label -> Configuration
    labels: tuple[str, ...] = ()
    scenes_per_label: int = 100
    training_scenes_per_label: int = 50
    object_count: tuple[int, int] = (3, 8)
    seed: int = 2022
    clockgate_weights: dict = field(default_factory=dict)
    output_dir: Path | None = None

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


GATE_KINDS = ("knowledge", "table_predictor", "loss_oracle")


def load_run_config(path: str | Path = DEFAULT_CONFIG) -> RunConfig:
    path = Path(path)
    return run_config_from_dict(load_toml(path), path.parent)


def run_config_from_dict(raw: Mapping, base_dir: Path) -> RunConfig:
    from ctxfusion.core import CONTEXT_LABELS, Branch, Configuration, SensorModality

    sensors_raw = _req(_req(raw, "sensors", ""), "declared", "sensors.")
    try:
        sensors = tuple(SensorModality(s).value for s in sensors_raw)
    except ValueError as exc:
        raise ConfigError(f"sensors.declared: {exc}") from None
    if len(set(sensors)) != len(sensors) or not sensors:
        raise ConfigError("sensors.declared must list distinct sensors")

    branches = {}
    for bid, inputs in _req(raw, "branches", "").items():
        if not isinstance(inputs, list) or not inputs:
            raise ConfigError(f"branches.{bid} must be a non-empty list of sensors")
        unknown = [s for s in inputs if s not in sensors]
        if unknown:
            raise ConfigError(f"branches.{bid} uses undeclared sensor {unknown[0]!r}")
        branches[bid] = Branch.make(bid, *inputs)
    if not branches:
        raise ConfigError("branches must declare at least one branch")

    paths = raw.get("paths", {})

    def resolve(key: str, required: bool = True) -> Path | None:
        v = paths.get(key)
        if not v:
            if required:
                raise ConfigError(f"missing field paths.{key}")
            return None
        p = Path(v)
        p = p if p.is_absolute() else base_dir / p
        if required and not p.exists():
            raise ConfigError(f"paths.{key}: file not found: {p}")
        return p

    loss = raw.get("loss", {})
    fusion = raw.get("fusion", {})
    opt = raw.get("optimizer", {})
    gates = raw.get("gates", {})
    bench = raw.get("benchmark", {})
    clock = raw.get("clockgate", {})

    rules = {}
    for label, text in gates.get("knowledge", {}).items():
        cfg = Configuration.parse(text)
        unknown = sorted(cfg.branches - branches.keys())
        if unknown:
            raise ConfigError(f"gates.knowledge.{label} names unknown branch {unknown[0]!r}")
        rules[label] = cfg

    sweep_gates = tuple(gates.get("sweep", ("loss_oracle", "table_predictor", "knowledge")))
    for g in sweep_gates + (gates.get("compare", "table_predictor"),):
        if g not in GATE_KINDS:
            raise ConfigError(f"gates: unknown gate kind {g!r} (expected one of {', '.join(GATE_KINDS)})")

    lambdas = _floats(opt.get("lambdas", [0.0, 0.01, 0.05, 0.1, 0.5, 1.0]), "optimizer.lambdas")
    compare_lambdas = _floats(gates.get("compare_lambdas", [0.0, 0.01, 0.05]), "gates.compare_lambdas")
    for name, lams in (("optimizer.lambdas", lambdas), ("gates.compare_lambdas", compare_lambdas)):
        if any(not 0.0 <= x <= 1.0 for x in lams):
            raise ConfigError(f"{name} values must lie in [0, 1]")
    gamma = float(opt.get("gamma", 0.5))
    if gamma < 0:
        raise ConfigError("optimizer.gamma must be non-negative")
    energy_scale = float(opt.get("energy_scale", 1.0))
    if energy_scale <= 0:
        raise ConfigError("optimizer.energy_scale must be positive")
    max_size = opt.get("max_configuration_size")
    if max_size is not None and int(max_size) < 1:
        raise ConfigError("optimizer.max_configuration_size must be >= 1")

    iou_thr = float(fusion.get("iou_threshold", 0.55))
    if not 0 < iou_thr < 1:
        raise ConfigError("fusion.iou_threshold must lie in (0, 1)")

    labels = tuple(bench.get("labels", CONTEXT_LABELS))
    if not labels:
        raise ConfigError("benchmark.labels must be non-empty")
    count = bench.get("object_count", [3, 8])
    if not (isinstance(count, list) and len(count) == 2 and 0 <= int(count[0]) <= int(count[1])):
        raise ConfigError("benchmark.object_count must be [min, max] with 0 <= min <= max")
    n_scenes = int(bench.get("scenes_per_label", 100))
    n_train = int(bench.get("training_scenes_per_label", 50))
    if n_scenes < 1:
        raise ConfigError("benchmark.scenes_per_label must be >= 1")
    if n_train < 0:
        raise ConfigError("benchmark.training_scenes_per_label must be >= 0")

    weights = {k: float(v) for k, v in clock.get("weights", {}).items()}
    if any(w < 0 for w in weights.values()):
        raise ConfigError("clockgate.weights must be non-negative")

    out = raw.get("output", {}).get("dir")
    return RunConfig(
        base_dir=base_dir,
        sensors=sensors,
        branches=branches,
        calibration_path=resolve("calibration"),
        quality_path=resolve("quality"),
        gate_table_path=resolve("gate_table", required=False),
        loss_miss=float(loss.get("miss", 4.0)),
        loss_fp=float(loss.get("false_positive", 1.0)),
        loss_eps=float(loss.get("eps", 1e-7)),
        fusion_iou=iou_thr,
        confidence_rescale=bool(fusion.get("confidence_rescale", True)),
        gamma=gamma,
        energy_scale=energy_scale,
        lambdas=lambdas,
        max_configuration_size=None if max_size is None else int(max_size),
        sweep_gates=sweep_gates,
        compare_gate=gates.get("compare", "table_predictor"),
        compare_lambdas=compare_lambdas,
        knowledge_rules=rules,
        labels=labels,
        scenes_per_label=n_scenes,
        training_scenes_per_label=n_train,
        object_count=(int(count[0]), int(count[1])),
        seed=int(bench.get("seed", 2022)),
        clockgate_weights=weights,
        output_dir=None if out is None else base_dir / out,
    )
