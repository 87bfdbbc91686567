"""Benchmark harness: build the pipeline from a run configuration and evaluate gates over scenes."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Iterable, Mapping, Sequence

from ctxfusion.config import ConfigError, RunConfig
from ctxfusion.core import Configuration, ConfigurationSpace, enumerate_configurations
from ctxfusion.energymodel import Calibration, config_energy, load_calibration, savings, total_energy
from ctxfusion.evaluation import dataset_map
from ctxfusion.gating import (
    GatePolicy,
    GateTable,
    KnowledgeGate,
    LossOracleGate,
    TablePredictorGate,
    fit_gate_table,
)
from ctxfusion.lossmodel import LossWeights
from ctxfusion.optimizer import OptimizerParams, select_configuration
from ctxfusion.simbench import (
    Benchmark,
    PipelineResult,
    QualityMatrix,
    Scene,
    Simulator,
    execute_configuration,
)


@dataclass(frozen=True)
class Setup:
    config: RunConfig
    space: ConfigurationSpace
    calibration: Calibration
    simulator: Simulator
    energies: Mapping[Configuration, float]

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "Setup":
        space = enumerate_configurations(cfg.branches.values(), cfg.max_configuration_size)
        cal = load_calibration(cfg.calibration_path)
        missing = sorted(set(cfg.branches) - set(cal.profile.branch_stems))
        if missing:
            raise ConfigError(f"paths.calibration: no cost entry for branch {missing[0]!r}")
        for bid, br in cfg.branches.items():
            if cal.profile.branch_stems[bid] != br.stems:
                raise ConfigError(f"paths.calibration: stems of branch {bid!r} disagree with its declared inputs")
        quality = QualityMatrix.load(cfg.quality_path)
        try:
            quality.check_complete(cfg.labels, cfg.branches)
        except KeyError as exc:
            raise ConfigError(f"paths.quality: {exc.args[0]}") from None
        sim = Simulator(
            cfg.branches,
            quality,
            cfg.fusion_iou,
            cfg.confidence_rescale,
            LossWeights(cfg.loss_miss, cfg.loss_fp, cfg.loss_eps),
        )
        energies = {c: config_energy(c, cal.profile)[0] for c in space}
        return cls(cfg, space, cal, sim, energies)

    @property
    def profile(self):
        return self.calibration.profile

    def benchmark(self, scenes_per_label: int | None = None) -> Benchmark:
        c = self.config
        return Benchmark(c.labels, scenes_per_label or c.scenes_per_label, c.object_count, c.seed)

    def test_scenes(self) -> list[Scene]:
        return self.benchmark().scenes("test")

    def training_scenes(self) -> list[Scene]:
        n = self.config.training_scenes_per_label
        if n < 1:
            return []
        return self.benchmark(n).scenes("train")

    def params(self, lambda_e: float) -> OptimizerParams:
        return OptimizerParams(self.config.gamma, lambda_e, self.config.energy_scale)

    def late_fusion(self) -> Configuration:
        """Every single-sensor branch, late fused."""
        return Configuration(frozenset(b for b, br in self.config.branches.items() if len(br.inputs) == 1))


def map_scenes(fn: Callable[[Scene], list], scenes: Sequence[Scene], workers: int = 1) -> list:
    """Apply ``fn`` per scene; results come back in scene order regardless of ``workers``."""
    if workers <= 1 or len(scenes) < 2:
        return [fn(s) for s in scenes]
    chunk = max(1, len(scenes) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, scenes, chunksize=chunk))


def evaluate_scene(setup: Setup, gate: GatePolicy, lambdas: Sequence[float], scene: Scene) -> list[PipelineResult]:
    """Run the adaptive pipeline once per lambda; gate estimates are computed once."""
    run = setup.simulator.for_scene(scene)
    estimates = gate.estimate(scene, scene.context, setup.space, run)
    out = []
    for lam in lambdas:
        sel = select_configuration(estimates, setup.energies, setup.params(lam))
        out.append(execute_configuration(run, sel.chosen, setup.profile, sel))
    return out


def evaluate_static(setup: Setup, cfgs: Sequence[Configuration], scene: Scene) -> list[PipelineResult]:
    run = setup.simulator.for_scene(scene)
    return [execute_configuration(run, c, setup.profile) for c in cfgs]


def training_log(setup: Setup, scene: Scene) -> list[tuple[str, Configuration, float]]:
    run = setup.simulator.for_scene(scene)
    return [(scene.label, c, run.mean_loss(c)) for c in setup.space]


def fit_table(setup: Setup, scenes: Sequence[Scene], workers: int = 1) -> GateTable:
    logs = map_scenes(partial(training_log, setup), scenes, workers)
    return fit_gate_table(entry for log in logs for entry in log)


def make_gate(setup: Setup, kind: str, table: GateTable | None = None) -> GatePolicy:
    if kind == "knowledge":
        gate = KnowledgeGate(setup.config.knowledge_rules)
        try:
            gate.check_labels(setup.config.labels)
        except ValueError as exc:
            raise ConfigError(f"gates.knowledge: {exc}") from None
        return gate
    if kind == "loss_oracle":
        return LossOracleGate()
    if kind == "table_predictor":
        if table is None:
            raise ValueError("table_predictor gate needs a fitted table")
        return TablePredictorGate(table)
    raise ConfigError(f"gates: unknown gate kind {kind!r}")


def load_or_fit_table(setup: Setup, workers: int = 1) -> GateTable:
    path = setup.config.gate_table_path
    if path is not None:
        if not path.exists():
            raise ConfigError(f"paths.gate_table: file not found: {path}")
        return GateTable.load(path)
    scenes = setup.training_scenes()
    if not scenes:
        raise ConfigError("benchmark.training_scenes_per_label must be >= 1 to fit the table-predictor gate")
    return fit_table(setup, scenes, workers)


@dataclass(frozen=True)
class Summary:
    scenes: int
    mean_loss: float
    mean_energy: float
    mean_latency: float
    map50: float


def summarize(results: Sequence[PipelineResult], scenes: Mapping[int, Scene]) -> Summary:
    n = len(results)
    samples = [(r.detections, scenes[r.scene_id].objects) for r in results]
    try:
        m = dataset_map(samples)
    except ValueError:
        m = float("nan")
    return Summary(
        n,
        math.fsum(r.loss_mean for r in results) / n,
        math.fsum(r.energy for r in results) / n,
        math.fsum(r.latency for r in results) / n,
        m,
    )


def run_gate(setup: Setup, gate: GatePolicy, lambdas: Sequence[float], scenes: Sequence[Scene], workers: int = 1) -> list[list[PipelineResult]]:
    """Results indexed ``[lambda index][scene index]``."""
    per_scene = map_scenes(partial(evaluate_scene, setup, gate, tuple(lambdas)), scenes, workers)
    return [[rs[i] for rs in per_scene] for i in range(len(lambdas))]


def run_static(setup: Setup, cfgs: Sequence[Configuration], scenes: Sequence[Scene], workers: int = 1) -> list[list[PipelineResult]]:
    per_scene = map_scenes(partial(evaluate_static, setup, tuple(cfgs)), scenes, workers)
    return [[rs[i] for rs in per_scene] for i in range(len(cfgs))]


@dataclass(frozen=True)
class ClockGateRow:
    label: str
    late_energy: float
    adaptive_energy: float
    adaptive_no_gating: float
    savings: float


def gating_plan(cfg: Configuration, setup: Setup) -> dict[str, bool]:
    """Clock gate every declared sensor the configuration does not read."""
    used = {m.value for b in cfg.branches for m in setup.config.branches[b].inputs}
    return {s: s not in used for s in setup.calibration.sensors}


def clockgate_table(setup: Setup) -> list[ClockGateRow]:
    rules = setup.config.knowledge_rules
    if not rules:
        raise ConfigError("gates.knowledge: clock-gating analysis needs knowledge rules")
    sensors = setup.calibration.sensors
    if not sensors:
        raise ConfigError("paths.calibration: no [sensors.*] entries")
    labels = setup.config.labels
    missing = [lab for lab in labels if lab not in rules]
    if missing:
        raise ConfigError(f"gates.knowledge: no rule for context {missing[0]!r}")
    late = setup.late_fusion()
    all_on = {s: False for s in sensors}
    late_e = total_energy(late, setup.profile, sensors, all_on)
    rows = []
    for lab in labels:
        cfg = rules[lab]
        eco = total_energy(cfg, setup.profile, sensors, gating_plan(cfg, setup))
        eco_on = total_energy(cfg, setup.profile, sensors, all_on)
        rows.append(ClockGateRow(lab, late_e, eco, eco_on, savings(eco, late_e)))
    weights = setup.config.clockgate_weights or {lab: 1.0 for lab in labels}
    w = [weights.get(r.label, 0.0) for r in rows]
    if sum(w) <= 0:
        raise ConfigError("clockgate.weights must give some context a positive weight")
    wsum = math.fsum(w)
    eco = math.fsum(wi * r.adaptive_energy for wi, r in zip(w, rows)) / wsum
    eco_on = math.fsum(wi * r.adaptive_no_gating for wi, r in zip(w, rows)) / wsum
    rows.append(ClockGateRow("Overall", late_e, eco, eco_on, savings(eco, late_e)))
    return rows


def scene_index(scenes: Iterable[Scene]) -> dict[int, Scene]:
    return {s.id: s for s in scenes}
