"""Post-hoc detection loss: smooth-L1 box regression plus log-loss classification.

The loss keeps the two kernels of a two-stage detector's training loss but is
evaluated on final (fused) detections, so no network is involved. Lower is
better; a perfect prediction scores ~0.

Predictions are paired with ground truths by the one-to-one assignment that
minimizes the loss itself (pairs need the same class and IoU >= ``iou_min``).
Greedy confidence-ordered matching, still available as
:func:`match_detections`, lets a more confident detection steal a ground
truth from a better-placed one, so raising a confidence could raise the loss.
The minimizing assignment rules that out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ctxfusion.boxops import iou_xyxy
from ctxfusion.core import Detection, GroundTruthObject

EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    miss: float = 4.0
    false_positive: float = 1.0
    eps: float = EPS
    iou_min: float = 0.5


@dataclass(frozen=True)
class LossBreakdown:
    classification: float
    regression: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.classification + self.regression)


@dataclass
class Matching:
    pairs: list[tuple[Detection, GroundTruthObject]]
    false_positives: list[Detection]
    misses: list[GroundTruthObject]


def smooth_l1(x: float) -> float:
    ax = abs(x)
    if ax < 1.0:
        return 0.5 * x * x
    return ax - 0.5


def match_detections(preds: Sequence[Detection], gts: Sequence[GroundTruthObject], iou_min: float = 0.5) -> Matching:
    """Greedy one-to-one matching by descending confidence.

    Each prediction takes the still-unmatched ground truth of its class with
    the highest IoU, provided that IoU is at least ``iou_min``. Ties in
    confidence keep input order; ties in IoU go to the earlier ground truth.
    """
    if not 0.0 < iou_min < 1.0:
        raise ValueError(f"iou_min must lie in (0, 1), got {iou_min}")
    order = sorted(range(len(preds)), key=lambda i: -preds[i].confidence)
    taken = [False] * len(gts)
    pairs = []
    fps = []
    for i in order:
        p = preds[i]
        pb = p.box
        best, best_iou = -1, iou_min
        for j, g in enumerate(gts):
            if taken[j] or g.cls.id != p.cls.id:
                continue
            gb = g.box
            v = iou_xyxy(pb.x1, pb.y1, pb.x2, pb.y2, gb.x1, gb.y1, gb.x2, gb.y2)
            if v >= best_iou and (best < 0 or v > best_iou):
                best, best_iou = j, v
        if best < 0:
            fps.append(p)
        else:
            taken[best] = True
            pairs.append((p, gts[best]))
    misses = [g for j, g in enumerate(gts) if not taken[j]]
    return Matching(pairs, fps, misses)


def box_residuals(pred: Detection, gt: GroundTruthObject) -> tuple[float, float, float, float]:
    """Coordinate errors normalized by the ground-truth box width/height."""
    p, g = pred.box, gt.box
    w, h = g.x2 - g.x1, g.y2 - g.y1
    return ((p.x1 - g.x1) / w, (p.y1 - g.y1) / h, (p.x2 - g.x2) / w, (p.y2 - g.y2) / h)


def _clamp(c: float, eps: float) -> float:
    return min(max(c, eps), 1.0 - eps)


def min_loss_matching(preds: Sequence[Detection], gts: Sequence[GroundTruthObject], weights: LossWeights | None = None) -> Matching:
    """One-to-one pairing that minimizes :func:`detection_loss`.

    Only same-class pairs with IoU >= ``weights.iou_min`` may pair. Pairing
    prediction p with ground truth g changes the loss by
    ``match(p, g) - fp(p) - miss``; the assignment keeps the pairs with a
    negative change. Pairs come back in prediction order.
    """
    w = weights or LossWeights()
    if not 0.0 < w.iou_min < 1.0:
        raise ValueError(f"iou_min must lie in (0, 1), got {w.iou_min}")
    n, m = len(preds), len(gts)
    delta = np.zeros((n, m))
    for i, p in enumerate(preds):
        pb = p.box
        c = _clamp(p.confidence, w.eps)
        gain = -math.log(c) + w.false_positive * math.log1p(-c) - w.miss
        for j, g in enumerate(gts):
            if g.cls.id != p.cls.id:
                continue
            gb = g.box
            if iou_xyxy(pb.x1, pb.y1, pb.x2, pb.y2, gb.x1, gb.y1, gb.x2, gb.y2) < w.iou_min:
                continue
            d = gain + math.fsum(smooth_l1(r) for r in box_residuals(p, g))
            if d < 0.0:
                delta[i, j] = d
    pairs_idx = []
    if n and m and delta.any():
        rows, cols = linear_sum_assignment(delta)
        pairs_idx = sorted((int(i), int(j)) for i, j in zip(rows, cols) if delta[i, j] < 0.0)
    used_p = {i for i, _ in pairs_idx}
    used_g = {j for _, j in pairs_idx}
    return Matching(
        [(preds[i], gts[j]) for i, j in pairs_idx],
        [p for i, p in enumerate(preds) if i not in used_p],
        [g for j, g in enumerate(gts) if j not in used_g],
    )


def detection_loss(
    preds: Sequence[Detection],
    gts: Sequence[GroundTruthObject],
    weights: LossWeights | None = None,
) -> LossBreakdown:
    w = weights or LossWeights()
    m = min_loss_matching(preds, gts, w)
    cls_terms = []
    reg_terms = []
    for p, g in m.pairs:
        cls_terms.append(-math.log(_clamp(p.confidence, w.eps)))
        reg_terms.extend(smooth_l1(r) for r in box_residuals(p, g))
    for p in m.false_positives:
        cls_terms.append(-w.false_positive * math.log1p(-_clamp(p.confidence, w.eps)))
    cls_terms.append(w.miss * len(m.misses))
    return LossBreakdown(math.fsum(cls_terms), math.fsum(reg_terms))


def mean_loss(breakdown: LossBreakdown, n_objects: int) -> float:
    """Per-scene mean: total divided by the ground-truth count (1 for empty scenes)."""
    return breakdown.total / max(n_objects, 1)
