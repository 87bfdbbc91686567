"""Independent reference implementations used as test oracles.

They are written for clarity, not speed, and share no code with the package:
exact rational arithmetic for box geometry, threshold-prefix precision/recall
for AP, and exhaustive enumeration where the inputs are tiny.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def frac_iou(a, b) -> Fraction:
    """Exact IoU of two (x1, y1, x2, y2) tuples."""
    a = [Fraction(v) for v in a]
    b = [Fraction(v) for v in b]
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return Fraction(0)
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def wbf_oracle(items, threshold, num_sources, rescale=True):
    """Greedy-cluster fusion on plain tuples.

    ``items`` are ``(cls_id, box, conf, source_index, position)``. Returns
    a list of ``(cls_id, box, conf, sorted member keys)`` in emission order.
    """
    thr = Fraction(threshold)
    visit = sorted(items, key=lambda t: (t[0], -t[2], t[3], t[4]))
    clusters = []  # [cls, members]
    for it in visit:
        for cl in clusters:
            if cl[0] != it[0]:
                continue
            if frac_iou(_fused_box(cl[1]), it[1]) > thr:
                cl[1].append(it)
                break
        else:
            clusters.append([it[0], [it]])
    out = []
    for order, (cls, members) in enumerate(clusters):
        k = len(members)
        conf = sum(Fraction(m[2]) for m in members) / k
        if rescale:
            conf *= Fraction(min(k, num_sources), num_sources)
        out.append((-conf, order, cls, _fused_box(members), conf, sorted((m[3], m[4]) for m in members)))
    out.sort(key=lambda t: (t[0], t[1]))
    return [(cls, box, conf, keys) for _, _, cls, box, conf, keys in out]


def _fused_box(members):
    if len(members) == 1:
        return tuple(Fraction(v) for v in members[0][1])
    w = [Fraction(m[2]) for m in members]
    tot = sum(w)
    if tot == 0:
        w = [Fraction(1)] * len(members)
        tot = Fraction(len(members))
    return tuple(sum(wi * Fraction(m[1][k]) for wi, m in zip(w, members)) / tot for k in range(4))


def greedy_matches(dets, gts, iou_min=0.5):
    """Greedy confidence-ordered matching; dets are (cls, box, conf), gts are (cls, box).

    Returns the set of matched detection indices.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i][2])
    used = set()
    tp = set()
    for i in order:
        c, box, _ = dets[i]
        cands = [(frac_iou(box, g[1]), -j, j) for j, g in enumerate(gts) if j not in used and g[0] == c]
        cands = [t for t in cands if t[0] >= Fraction(iou_min)]
        if cands:
            j = max(cands)[2]
            used.add(j)
            tp.add(i)
    return tp


def ap_oracle(dets, gts, cls, iou_min=0.5):
    """All-points AP by threshold prefixes. Confidences of ``cls`` must be distinct.

    For each threshold t the detections with conf >= t are matched greedily;
    greedy matching is prefix-stable, so this reproduces the ranked curve
    without walking it. Returns None when AP is undefined.
    """
    mine = [d for d in dets if d[0] == cls]
    npos = sum(1 for g in gts if g[0] == cls)
    if npos == 0:
        return None if not mine else 0.0
    points = []
    for t in sorted({d[2] for d in mine}, reverse=True):
        kept = [d for d in mine if d[2] >= t]
        tp = len(greedy_matches(kept, gts, iou_min))
        points.append((Fraction(tp, npos), Fraction(tp, len(kept))))
    area = Fraction(0)
    prev_r = Fraction(0)
    for r in sorted({r for r, _ in points}):
        if r == prev_r:
            continue
        p = max(p for rr, p in points if rr >= r)
        area += (r - prev_r) * p
        prev_r = r
    return float(area)


def best_assignment_cost(n_preds, n_gts, allowed):
    """Size of a maximum one-to-one matching by exhaustive enumeration."""
    best = 0
    for k in range(min(n_preds, n_gts), 0, -1):
        for ps in itertools.combinations(range(n_preds), k):
            for gs in itertools.permutations(range(n_gts), k):
                if all((p, g) in allowed for p, g in zip(ps, gs)):
                    return k
    return best


def subsets(items, max_size=None):
    items = list(items)
    top = len(items) if max_size is None else min(max_size, len(items))
    return [frozenset(c) for k in range(1, top + 1) for c in itertools.combinations(items, k)]
