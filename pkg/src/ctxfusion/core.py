"""Domain types shared across the package and configuration-space enumeration."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

CONTEXT_LABELS = ("city", "fog", "junction", "motorway", "night", "rain", "rural", "snow")

CLASS_NAMES = (
    "car",
    "van",
    "truck",
    "bus",
    "motorbike",
    "bicycle",
    "pedestrian",
    "pedestrian-group",
)


@dataclass(frozen=True, slots=True)
class ObjectClass:
    id: int
    name: str


CLASSES: tuple[ObjectClass, ...] = tuple(ObjectClass(i, n) for i, n in enumerate(CLASS_NAMES))


def class_by_name(name: str) -> ObjectClass:
    for c in CLASSES:
        if c.name == name:
            return c
    raise KeyError(f"unknown object class {name!r}")


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box in scene coordinates, ``(x1, y1)`` top-left."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x1, self.y1, self.x2, self.y2)):
            raise ValueError(f"non-finite box coordinates {self}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box {self}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True, slots=True)
class GroundTruthObject:
    cls: ObjectClass
    box: BoundingBox


@dataclass(frozen=True, slots=True)
class Detection:
    cls: ObjectClass
    box: BoundingBox
    confidence: float
    source: str = ""

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


class SensorModality(str, enum.Enum):
    CAMERA_LEFT = "camera_left"
    CAMERA_RIGHT = "camera_right"
    LIDAR = "lidar"
    RADAR = "radar"

    @property
    def stem(self) -> str:
        """Stems are per sensor type; both cameras of the stereo pair share one."""
        if self in (SensorModality.CAMERA_LEFT, SensorModality.CAMERA_RIGHT):
            return "camera"
        return self.value


class BranchKind(str, enum.Enum):
    SINGLE = "single"
    EARLY_FUSION = "early_fusion"


@dataclass(frozen=True, slots=True)
class Branch:
    id: str
    inputs: frozenset[SensorModality]
    kind: BranchKind

    def __post_init__(self):
        if not self.inputs:
            raise ValueError(f"branch {self.id!r} has no inputs")
        if (self.kind is BranchKind.SINGLE) != (len(self.inputs) == 1):
            raise ValueError(f"branch {self.id!r}: kind {self.kind.value} inconsistent with {len(self.inputs)} inputs")

    @classmethod
    def make(cls, id: str, *inputs: SensorModality | str) -> "Branch":
        mods = frozenset(SensorModality(i) for i in inputs)
        kind = BranchKind.SINGLE if len(mods) == 1 else BranchKind.EARLY_FUSION
        return cls(id, mods, kind)

    @property
    def stems(self) -> frozenset[str]:
        return frozenset(m.stem for m in self.inputs)


@dataclass(frozen=True, slots=True)
class Configuration:
    """An ensemble of branches; identity is set identity."""

    branches: frozenset[str]

    def __post_init__(self):
        if not self.branches:
            raise ValueError("configuration must contain at least one branch")

    @classmethod
    def of(cls, *ids: str) -> "Configuration":
        return cls(frozenset(ids))

    @property
    def key(self) -> tuple[int, tuple[str, ...]]:
        """Canonical sort key: size first, then lexicographic branch ids."""
        return (len(self.branches), tuple(sorted(self.branches)))

    @property
    def label(self) -> str:
        return "+".join(sorted(self.branches))

    @classmethod
    def parse(cls, text: str) -> "Configuration":
        return cls(frozenset(p.strip() for p in text.split("+") if p.strip()))

    def __len__(self) -> int:
        return len(self.branches)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.branches))

    def __lt__(self, other: "Configuration") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class Context:
    label: str
    feature: tuple[float, ...] = ()

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.feature):
            raise ValueError("context feature must be finite")


@dataclass(frozen=True)
class ConfigurationSpace:
    branches: Mapping[str, Branch]
    configurations: tuple[Configuration, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.configurations)})

    def __iter__(self) -> Iterator[Configuration]:
        return iter(self.configurations)

    def __len__(self) -> int:
        return len(self.configurations)

    def __contains__(self, cfg: object) -> bool:
        return cfg in self._index

    def __getitem__(self, i: int) -> Configuration:
        return self.configurations[i]

    def index(self, cfg: Configuration) -> int:
        return self._index[cfg]

    def restrict(self, configurations: Iterable[Configuration]) -> "ConfigurationSpace":
        cfgs = sorted(set(configurations), key=lambda c: c.key)
        for c in cfgs:
            unknown = c.branches - self.branches.keys()
            if unknown:
                raise KeyError(f"unknown branch ids {sorted(unknown)}")
        return ConfigurationSpace(self.branches, tuple(cfgs))


def enumerate_configurations(branches: Iterable[Branch] | Sequence[Branch], max_size: int | None = None) -> ConfigurationSpace:
    """All non-empty branch subsets of size ``<= max_size``, in canonical order."""
    by_id: dict[str, Branch] = {}
    for b in branches:
        by_id[b.id] = b
    if not by_id:
        raise ValueError("empty configuration space")
    if max_size is not None and max_size < 1:
        raise ValueError(f"max_size must be >= 1, got {max_size}")
    ids = sorted(by_id)
    top = len(ids) if max_size is None else min(max_size, len(ids))
    cfgs = tuple(
        Configuration(frozenset(combo))
        for k in range(1, top + 1)
        for combo in itertools.combinations(ids, k)
    )
    return ConfigurationSpace(dict(sorted(by_id.items())), cfgs)
