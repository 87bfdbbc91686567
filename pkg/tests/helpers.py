"""Random instance generators shared by the test modules."""

from __future__ import annotations

import numpy as np

from ctxfusion.core import CLASSES, BoundingBox, Detection, GroundTruthObject

CONF_CHOICES = (0.3, 0.5, 0.9)


def random_box(rng: np.random.Generator, centers=None, span: float = 20.0) -> BoundingBox:
    """Box jittered around one of a few anchors so overlaps are common."""
    if centers is None:
        centers = [(10.0, 10.0), (14.0, 12.0)]
    cx, cy = centers[int(rng.integers(len(centers)))]
    w, h = rng.uniform(4.0, span, size=2)
    cx += rng.normal(0, 2.0)
    cy += rng.normal(0, 2.0)
    return BoundingBox(float(cx - w / 2), float(cy - h / 2), float(cx + w / 2), float(cy + h / 2))


def random_lists(rng: np.random.Generator, max_boxes: int = 4, n_classes: int = 2, max_sources: int = 3):
    n_src = int(rng.integers(1, max_sources + 1))
    total = int(rng.integers(0, max_boxes + 1))
    lists = [[] for _ in range(n_src)]
    for _ in range(total):
        src = int(rng.integers(n_src))
        if rng.random() < 0.4:
            conf = CONF_CHOICES[int(rng.integers(len(CONF_CHOICES)))]
        else:
            conf = float(rng.uniform(0.01, 1.0))
        lists[src].append(Detection(CLASSES[int(rng.integers(n_classes))], random_box(rng), conf, f"s{src}"))
    return lists


def as_items(lists):
    return [(d.cls.id, d.box.as_tuple(), d.confidence, s, p) for s, dets in enumerate(lists) for p, d in enumerate(dets)]


def random_gts(rng: np.random.Generator, n: int, n_classes: int = 3):
    return [GroundTruthObject(CLASSES[int(rng.integers(n_classes))], random_box(rng, [(20.0, 20.0), (40.0, 25.0)], 25.0)) for _ in range(n)]


def random_dets_near(rng: np.random.Generator, gts, n: int, n_classes: int = 3, distinct_conf: bool = True):
    """Detections that are either jittered copies of a ground truth or random boxes."""
    out = []
    confs = rng.permutation(np.linspace(0.02, 0.98, 97))[:n] if distinct_conf else rng.uniform(0, 1, n)
    for i in range(n):
        if gts and rng.random() < 0.7:
            g = gts[int(rng.integers(len(gts)))]
            b = g.box
            j = rng.normal(0, 0.12, 4) * np.array([b.width, b.height, b.width, b.height])
            x1, y1, x2, y2 = b.x1 + j[0], b.y1 + j[1], b.x2 + j[2], b.y2 + j[3]
            if x2 - x1 < 1:
                x2 = x1 + 1
            if y2 - y1 < 1:
                y2 = y1 + 1
            box = BoundingBox(float(x1), float(y1), float(x2), float(y2))
            cls = g.cls if rng.random() < 0.85 else CLASSES[int(rng.integers(n_classes))]
        else:
            box = random_box(rng, [(20.0, 20.0), (40.0, 25.0)], 25.0)
            cls = CLASSES[int(rng.integers(n_classes))]
        out.append(Detection(cls, box, float(confs[i])))
    return out
