"""Box geometry and the late-fusion block (weighted box fusion)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ctxfusion.core import BoundingBox, Detection


@dataclass(frozen=True)
class FusionParams:
    iou_threshold: float = 0.55
    num_sources: int = 1
    confidence_rescale: bool = True

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError(f"iou_threshold must lie in (0, 1), got {self.iou_threshold}")
        if self.num_sources < 1:
            raise ValueError(f"num_sources must be positive, got {self.num_sources}")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    return iou_xyxy(a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2)


def iou_xyxy(ax1, ay1, ax2, ay2, bx1, by1, bx2, by2) -> float:
    iw = min(ax2, bx2) - max(ax1, bx1)
    if iw <= 0.0:
        return 0.0
    ih = min(ay2, by2) - max(ay1, by1)
    if ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


class _Cluster:
    __slots__ = ("cls", "members", "box", "order")

    def __init__(self, det: Detection, order: int):
        self.cls = det.cls
        self.members = [det]
        self.box = det.box.as_tuple()
        self.order = order

    def add(self, det: Detection) -> None:
        self.members.append(det)
        self.box = _weighted_mean_box(self.members)


def _weighted_mean_box(members: Sequence[Detection]) -> tuple[float, float, float, float]:
    weights = [d.confidence for d in members]
    total = math.fsum(weights)
    if total <= 0.0:
        # all-zero confidences: fall back to the plain mean
        weights = [1.0] * len(members)
        total = float(len(members))
    coords = []
    for k in range(4):
        coords.append(math.fsum(w * d.box.as_tuple()[k] for w, d in zip(weights, members)) / total)
    # the mean of a single box is that box; keep it bit-exact
    if len(members) == 1:
        return members[0].box.as_tuple()
    return tuple(coords)


def cluster_detections(lists: Sequence[Sequence[Detection]], iou_threshold: float) -> list[list[Detection]]:
    """Greedy clustering behind :func:`weighted_box_fusion`.

    Detections of each class are visited by descending confidence (ties by
    source index, then position within the source list). Each joins the first
    existing cluster whose running fused box overlaps it with IoU strictly
    above ``iou_threshold``; otherwise it opens a new cluster.
    """
    return [c.members for c in _cluster(lists, iou_threshold)]


def _cluster(lists, iou_threshold) -> list[_Cluster]:
    pooled = []
    for src, dets in enumerate(lists):
        for pos, d in enumerate(dets):
            pooled.append((d.cls.id, -d.confidence, src, pos, d))
    pooled.sort(key=lambda t: t[:4])

    clusters: list[_Cluster] = []
    by_class: dict[int, list[_Cluster]] = {}
    for cls_id, _, _, _, det in pooled:
        bucket = by_class.setdefault(cls_id, [])
        b = det.box
        for cl in bucket:
            fx1, fy1, fx2, fy2 = cl.box
            if iou_xyxy(fx1, fy1, fx2, fy2, b.x1, b.y1, b.x2, b.y2) > iou_threshold:
                cl.add(det)
                break
        else:
            cl = _Cluster(det, len(clusters))
            bucket.append(cl)
            clusters.append(cl)
    return clusters


def weighted_box_fusion(lists: Sequence[Sequence[Detection]], params: FusionParams | None = None) -> list[Detection]:
    """Fuse per-source detection lists into one list.

    All lists must already share one coordinate frame; this cannot be checked
    here. Boxes of different classes never fuse. The fused box is the
    confidence-weighted mean of the cluster members and the fused confidence
    is their mean, scaled by ``min(n, num_sources) / num_sources`` when
    ``params.confidence_rescale`` is set. Output is sorted by confidence,
    descending.
    """
    params = params or FusionParams()
    n_src = params.num_sources
    fused = []
    for cl in _cluster(lists, params.iou_threshold):
        k = len(cl.members)
        conf = math.fsum(d.confidence for d in cl.members) / k
        if params.confidence_rescale:
            conf *= min(k, n_src) / n_src
        sources = sorted({d.source for d in cl.members})
        det = Detection(cl.cls, BoundingBox(*cl.box), min(conf, 1.0), "+".join(sources))
        fused.append((-det.confidence, cl.order, det))
    fused.sort(key=lambda t: t[:2])
    return [t[2] for t in fused]
