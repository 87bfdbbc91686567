"""Simulator for context-gated multi-branch sensor fusion with energy accounting."""

from ctxfusion.core import (
    BoundingBox,
    Branch,
    Configuration,
    ConfigurationSpace,
    Context,
    Detection,
    GroundTruthObject,
    ObjectClass,
    SensorModality,
    enumerate_configurations,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Branch",
    "Configuration",
    "ConfigurationSpace",
    "Context",
    "Detection",
    "GroundTruthObject",
    "ObjectClass",
    "SensorModality",
    "enumerate_configurations",
]
