"""Synthetic scenes, stochastic detector branches and the end-to-end adaptive pipeline.

Branches are not networks: each one turns a scene's ground truth into noisy
detections according to a per-(context, branch) quality entry. All randomness
is derived from ``(scene seed, branch id, object index)`` through a
counter-based generator, so executing one branch never perturbs another and
any configuration can be re-executed bit-identically.
"""

from __future__ import annotations

import csv
import io
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ctxfusion.boxops import FusionParams, weighted_box_fusion
from ctxfusion.core import (
    CLASSES,
    CONTEXT_LABELS,
    BoundingBox,
    Branch,
    Configuration,
    ConfigurationSpace,
    Context,
    Detection,
    GroundTruthObject,
)
from ctxfusion.energymodel import EnergyProfile, config_energy
from ctxfusion.lossmodel import LossBreakdown, LossWeights, detection_loss, mean_loss
from ctxfusion.optimizer import OptimizerParams, SelectionResult, select_configuration

FRAME = 1000.0
MIN_SIDE = 20.0
MAX_SIDE = 200.0
FEATURE_NOISE = 0.1

# false-positive confidences are skewed low
FP_CONF_ALPHA = 1.5
FP_CONF_BETA = 6.0

_SCENE_STREAM = "scene"
_FP_INDEX = 2**32


def stream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Independent Philox stream keyed by ``(seed, name, index)``."""
    ss = np.random.SeedSequence([seed & (2**64 - 1), zlib.crc32(name.encode()), index])
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master: int, *path: int) -> int:
    state = np.random.SeedSequence([master & (2**64 - 1), *path]).generate_state(2, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class Scene:
    id: int
    context: Context
    objects: tuple[GroundTruthObject, ...]
    seed: int

    @property
    def label(self) -> str:
        return self.context.label


@dataclass(frozen=True)
class BranchQuality:
    miss_rate: float
    fp_rate: float
    box_noise_sigma: float
    confidence_alpha: float
    confidence_beta: float

    def __post_init__(self):
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError(f"miss_rate {self.miss_rate} outside [0, 1]")
        if self.fp_rate < 0 or self.box_noise_sigma < 0:
            raise ValueError("fp_rate and box_noise_sigma must be non-negative")
        if self.confidence_alpha <= 0 or self.confidence_beta < 0:
            raise ValueError("confidence_alpha must be positive and confidence_beta non-negative")


QUALITY_FIELDS = ("miss_rate", "fp_rate", "box_noise_sigma", "confidence_alpha", "confidence_beta")


@dataclass(frozen=True)
class QualityMatrix:
    """Detector quality per ``(context label, branch id)``.

    ``confidence_beta == 0`` is the degenerate Beta with all mass at 1.
    """

    entries: Mapping[tuple[str, str], BranchQuality]

    def get(self, label: str, branch_id: str) -> BranchQuality:
        try:
            return self.entries[(label, branch_id)]
        except KeyError:
            raise KeyError(f"no quality entry for (label={label!r}, branch={branch_id!r})") from None

    def check_complete(self, labels: Iterable[str], branch_ids: Iterable[str]) -> None:
        branch_ids = list(branch_ids)
        for lab in labels:
            for b in branch_ids:
                self.get(lab, b)

    @classmethod
    def uniform(cls, labels: Iterable[str], branch_ids: Iterable[str], q: BranchQuality) -> "QualityMatrix":
        branch_ids = list(branch_ids)
        return cls({(lab, b): q for lab in labels for b in branch_ids})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("context", "branch") + QUALITY_FIELDS)
        for (lab, b), q in sorted(self.entries.items()):
            w.writerow([lab, b] + [repr(getattr(q, f)) for f in QUALITY_FIELDS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "QualityMatrix":
        entries = {}
        for row in csv.DictReader(io.StringIO(text)):
            entries[(row["context"], row["branch"])] = BranchQuality(*(float(row[f]) for f in QUALITY_FIELDS))
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "QualityMatrix":
        return cls.from_csv(Path(path).read_text())


def context_feature(label: str, seed: int) -> tuple[float, ...]:
    """Stand-in for stem features: a noisy one-hot encoding of the scenario."""
    rng = stream(seed, "stem")
    base = np.array([1.0 if lab == label else 0.0 for lab in CONTEXT_LABELS])
    return tuple(float(v) for v in base + FEATURE_NOISE * rng.standard_normal(len(CONTEXT_LABELS)))


def _random_box(rng: np.random.Generator) -> BoundingBox:
    w, h = rng.uniform(MIN_SIDE, MAX_SIDE, size=2)
    x1 = rng.uniform(0.0, FRAME - w)
    y1 = rng.uniform(0.0, FRAME - h)
    return BoundingBox(float(x1), float(y1), float(x1 + w), float(y1 + h))


def generate_scene(label: str, count_range: tuple[int, int], seed: int, scene_id: int = 0) -> Scene:
    lo, hi = count_range
    if lo < 0 or hi < lo:
        raise ValueError(f"invalid object count range {count_range}")
    rng = stream(seed, _SCENE_STREAM)
    n = int(rng.integers(lo, hi + 1))
    objects = []
    for _ in range(n):
        cls = CLASSES[int(rng.integers(0, len(CLASSES)))]
        objects.append(GroundTruthObject(cls, _random_box(rng)))
    return Scene(scene_id, Context(label, context_feature(label, seed)), tuple(objects), seed)


def _perturbed(box: BoundingBox, sigma: float, noise: np.ndarray) -> BoundingBox:
    if sigma == 0.0:
        return box
    w, h = box.width, box.height
    x1 = box.x1 + sigma * w * noise[0]
    y1 = box.y1 + sigma * h * noise[1]
    x2 = box.x2 + sigma * w * noise[2]
    y2 = box.y2 + sigma * h * noise[3]
    x1, x2 = min(x1, x2), max(x1, x2)
    y1, y2 = min(y1, y2), max(y1, y2)
    x1, y1 = max(x1, 0.0), max(y1, 0.0)
    x2, y2 = min(x2, FRAME), min(y2, FRAME)
    # keep the box non-degenerate after clipping
    if x2 - x1 < 1.0:
        x1, x2 = (x1 + x2) / 2 - 0.5, (x1 + x2) / 2 + 0.5
    if y2 - y1 < 1.0:
        y1, y2 = (y1 + y2) / 2 - 0.5, (y1 + y2) / 2 + 0.5
    return BoundingBox(float(x1), float(y1), float(x2), float(y2))


def _confidence(rng: np.random.Generator, alpha: float, beta: float) -> float:
    if beta == 0.0:
        rng.random()  # keep the per-object draw count fixed
        return 1.0
    return float(rng.beta(alpha, beta))


def simulate_branch(branch: Branch, scene: Scene, quality: QualityMatrix) -> list[Detection]:
    q = quality.get(scene.label, branch.id)
    dets = []
    for i, obj in enumerate(scene.objects):
        rng = stream(scene.seed, branch.id, i)
        hit = rng.random() >= q.miss_rate
        noise = rng.standard_normal(4)
        conf = _confidence(rng, q.confidence_alpha, q.confidence_beta)
        if hit:
            dets.append(Detection(obj.cls, _perturbed(obj.box, q.box_noise_sigma, noise), conf, branch.id))
    if q.fp_rate > 0:
        rng = stream(scene.seed, branch.id, _FP_INDEX)
        for _ in range(int(rng.poisson(q.fp_rate))):
            box = _random_box(rng)
            cls = CLASSES[int(rng.integers(0, len(CLASSES)))]
            dets.append(Detection(cls, box, float(rng.beta(FP_CONF_ALPHA, FP_CONF_BETA)), branch.id))
    return dets


@dataclass(frozen=True)
class Simulator:
    """Branch declarations plus everything needed to execute and score a configuration."""

    branches: Mapping[str, Branch]
    quality: QualityMatrix
    fusion_iou: float = 0.55
    confidence_rescale: bool = True
    loss_weights: LossWeights = field(default_factory=LossWeights)

    def for_scene(self, scene: Scene) -> "SceneRun":
        return SceneRun(self, scene)


class SceneRun:
    """Executes configurations on one scene, caching branch outputs and scores."""

    def __init__(self, sim: Simulator, scene: Scene):
        self.sim = sim
        self.scene = scene
        self._branch_out: dict[str, list[Detection]] = {}
        self._scored: dict[Configuration, tuple[list[Detection], LossBreakdown]] = {}

    def branch_output(self, branch_id: str) -> list[Detection]:
        out = self._branch_out.get(branch_id)
        if out is None:
            try:
                branch = self.sim.branches[branch_id]
            except KeyError:
                raise KeyError(f"unknown branch id {branch_id!r}") from None
            out = self._branch_out[branch_id] = simulate_branch(branch, self.scene, self.sim.quality)
        return out

    def execute(self, cfg: Configuration) -> list[Detection]:
        lists = [self.branch_output(b) for b in cfg]
        if len(lists) == 1:
            return list(lists[0])
        params = FusionParams(self.sim.fusion_iou, len(lists), self.sim.confidence_rescale)
        return weighted_box_fusion(lists, params)

    def score(self, cfg: Configuration) -> tuple[list[Detection], LossBreakdown]:
        hit = self._scored.get(cfg)
        if hit is None:
            dets = self.execute(cfg)
            hit = self._scored[cfg] = (dets, detection_loss(dets, self.scene.objects, self.sim.loss_weights))
        return hit

    def mean_loss(self, cfg: Configuration) -> float:
        return mean_loss(self.score(cfg)[1], len(self.scene.objects))


@dataclass(frozen=True)
class PipelineResult:
    scene_id: int
    label: str
    chosen: Configuration
    detections: tuple[Detection, ...]
    loss: LossBreakdown
    loss_mean: float
    energy: float
    latency: float
    selection: SelectionResult | None = None


def config_costs(space: ConfigurationSpace, profile: EnergyProfile) -> dict[Configuration, tuple[float, float]]:
    return {c: config_energy(c, profile) for c in space}


def execute_configuration(run: SceneRun, cfg: Configuration, profile: EnergyProfile, selection=None) -> PipelineResult:
    dets, loss = run.score(cfg)
    energy, latency = config_energy(cfg, profile)
    scene = run.scene
    return PipelineResult(
        scene.id, scene.label, cfg, tuple(dets), loss, mean_loss(loss, len(scene.objects)), energy, latency, selection
    )


def run_pipeline(
    scene: Scene,
    gate,
    space: ConfigurationSpace,
    profile: EnergyProfile,
    params: OptimizerParams,
    simulator: Simulator,
    *,
    run: SceneRun | None = None,
    energies: Mapping[Configuration, float] | None = None,
) -> PipelineResult:
    """One pass of the adaptive pipeline on ``scene``.

    Stems (feature extraction) -> gate loss estimates -> candidate filter ->
    joint energy/loss selection -> execute only the chosen branches -> fuse.
    """
    run = run or simulator.for_scene(scene)
    estimates = gate.estimate(scene, scene.context, space, run)
    if energies is None:
        energies = {c: config_energy(c, profile)[0] for c in space}
    selection = select_configuration(estimates, energies, params)
    return execute_configuration(run, selection.chosen, profile, selection)


def scenes_to_json(scenes: Sequence[Scene]) -> str:
    out = []
    for s in scenes:
        out.append(
            {
                "id": s.id,
                "seed": s.seed,
                "context": s.context.label,
                "feature": list(s.context.feature),
                "objects": [{"class": o.cls.name, "box": list(o.box.as_tuple())} for o in s.objects],
            }
        )
    return json.dumps({"frame": [FRAME, FRAME], "scenes": out}, indent=1) + "\n"


def scenes_from_json(text: str) -> list[Scene]:
    from ctxfusion.core import class_by_name

    raw = json.loads(text)
    scenes = []
    for s in raw["scenes"]:
        objs = tuple(GroundTruthObject(class_by_name(o["class"]), BoundingBox(*o["box"])) for o in s["objects"])
        scenes.append(Scene(int(s["id"]), Context(s["context"], tuple(s["feature"])), objs, int(s["seed"])))
    return scenes


@dataclass(frozen=True)
class Benchmark:
    labels: tuple[str, ...] = CONTEXT_LABELS
    scenes_per_label: int = 100
    object_count: tuple[int, int] = (3, 8)
    seed: int = 2022

    def scenes(self, split: str = "test") -> list[Scene]:
        """Deterministic scenes; ``split`` keeps train and test seeds disjoint."""
        split_code = zlib.crc32(split.encode())
        out = []
        for li, label in enumerate(self.labels):
            for i in range(self.scenes_per_label):
                seed = derive_seed(self.seed, split_code, li, i)
                out.append(generate_scene(label, self.object_count, seed, li * self.scenes_per_label + i))
        return out


def noiseless_quality() -> BranchQuality:
    return BranchQuality(0.0, 0.0, 0.0, 1.0, 0.0)
