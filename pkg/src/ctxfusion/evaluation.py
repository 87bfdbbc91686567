"""Detection metrics (VOC-style AP / mAP@0.5) and experiment-level report tables."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from ctxfusion.boxops import iou
from ctxfusion.core import CLASSES, Detection, GroundTruthObject, ObjectClass

Sample = tuple[Sequence[Detection], Sequence[GroundTruthObject]]


@dataclass(frozen=True)
class PRPoint:
    precision: float
    recall: float
    threshold: float


def pr_curve(samples: Sequence[Sample], cls: ObjectClass, iou_min: float = 0.5) -> tuple[list[PRPoint], int]:
    """Precision/recall after each detection of ``cls``, pooled over samples.

    Detections are visited by descending confidence. A detection is a true
    positive when the highest-IoU still-unmatched ground truth of its class in
    the same sample has IoU >= ``iou_min``; each ground truth matches once.
    Returns the curve and the number of ground truths of ``cls``.
    """
    pooled = []
    gts_by_sample = []
    npos = 0
    for si, (dets, gts) in enumerate(samples):
        g = [o for o in gts if o.cls.id == cls.id]
        gts_by_sample.append(g)
        npos += len(g)
        for pos, d in enumerate(dets):
            if d.cls.id == cls.id:
                pooled.append((-d.confidence, si, pos, d))
    pooled.sort(key=lambda t: t[:3])
    taken = [[False] * len(g) for g in gts_by_sample]
    tp = fp = 0
    curve = []
    for _, si, _, d in pooled:
        best, best_iou = -1, iou_min
        for j, g in enumerate(gts_by_sample[si]):
            if taken[si][j]:
                continue
            v = iou(d.box, g.box)
            if v >= best_iou and (best < 0 or v > best_iou):
                best, best_iou = j, v
        if best >= 0:
            taken[si][best] = True
            tp += 1
        else:
            fp += 1
        curve.append(PRPoint(tp / (tp + fp), tp / npos if npos else 0.0, d.confidence))
    return curve, npos


def _area_all_points(curve: Sequence[PRPoint]) -> float:
    rec = [0.0] + [p.recall for p in curve] + [1.0]
    prec = [0.0] + [p.precision for p in curve] + [0.0]
    for i in range(len(prec) - 2, -1, -1):
        prec[i] = max(prec[i], prec[i + 1])
    return math.fsum((rec[i + 1] - rec[i]) * prec[i + 1] for i in range(len(rec) - 1) if rec[i + 1] != rec[i])


def _area_11_point(curve: Sequence[PRPoint]) -> float:
    total = 0.0
    for t in range(11):
        thr = t / 10
        ps = [p.precision for p in curve if p.recall >= thr]
        total += max(ps) if ps else 0.0
    return total / 11


def dataset_average_precision(
    samples: Sequence[Sample], cls: ObjectClass, iou_min: float = 0.5, method: str = "all_points"
) -> float | None:
    """AP of ``cls`` over many samples; ``None`` when it has neither ground truths nor detections."""
    curve, npos = pr_curve(samples, cls, iou_min)
    if npos == 0:
        return None if not curve else 0.0
    if method == "all_points":
        return _area_all_points(curve)
    if method == "11_point":
        return _area_11_point(curve)
    raise ValueError(f"unknown interpolation {method!r}")


def average_precision(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthObject],
    cls: ObjectClass,
    iou_min: float = 0.5,
    method: str = "all_points",
) -> float | None:
    return dataset_average_precision([(dets, gts)], cls, iou_min, method)


def mean_ap(aps: Mapping[Any, float | None] | Iterable[float | None]) -> float:
    """Mean over classes whose AP is defined."""
    values = aps.values() if isinstance(aps, Mapping) else aps
    defined = [a for a in values if a is not None]
    if not defined:
        raise ValueError("mAP undefined: no class has ground truths or detections")
    return math.fsum(defined) / len(defined)


def dataset_map(samples: Sequence[Sample], iou_min: float = 0.5, method: str = "all_points") -> float:
    return mean_ap({c.id: dataset_average_precision(samples, c, iou_min, method) for c in CLASSES})


@dataclass(frozen=True)
class ReportRow:
    label: str
    scenes: int
    mean_loss: float
    mean_energy: float
    mean_latency: float
    map50: float


REPORT_COLUMNS = ("context", "scenes", "mean_loss", "mean_energy_j", "mean_latency_s", "map50")


def scenario_report(results: Sequence, scenes: Mapping[int, Any]) -> list[ReportRow]:
    """Per-label means plus an ``Overall`` row (unweighted over scenes).

    ``results`` are pipeline results; ``scenes`` maps scene id to the scene
    holding the ground truth. Losses are per-scene means.
    """
    if not results:
        raise ValueError("empty result set")
    groups: dict[str, list] = defaultdict(list)
    for r in results:
        groups[r.label].append(r)
    rows = [_row(label, groups[label], scenes) for label in sorted(groups)]
    rows.append(_row("Overall", list(results), scenes))
    return rows


def _row(label: str, rs: Sequence, scenes: Mapping[int, Any]) -> ReportRow:
    n = len(rs)
    samples = [(r.detections, scenes[r.scene_id].objects) for r in rs]
    try:
        m = dataset_map(samples)
    except ValueError:
        m = float("nan")
    return ReportRow(
        label,
        n,
        math.fsum(r.loss_mean for r in rs) / n,
        math.fsum(r.energy for r in rs) / n,
        math.fsum(r.latency for r in rs) / n,
        m,
    )


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def to_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def to_json(columns: Sequence[str], rows: Iterable[Sequence[Any]], meta: Mapping[str, Any] | None = None) -> str:
    recs = []
    for r in rows:
        recs.append({c: (None if isinstance(v, float) and math.isnan(v) else v) for c, v in zip(columns, r)})
    return json.dumps({"meta": dict(meta or {}), "columns": list(columns), "rows": recs}, indent=1) + "\n"


def to_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    cells = [list(columns)] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    lines = []
    for k, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if (k == 0 or i == 0) else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def report_rows(rows: Sequence[ReportRow]) -> list[tuple]:
    return [(r.label, r.scenes, r.mean_loss, r.mean_energy, r.mean_latency, r.map50) for r in rows]
