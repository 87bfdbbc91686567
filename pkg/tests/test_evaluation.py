import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctxfusion.core import CLASSES, BoundingBox, Detection, GroundTruthObject
from ctxfusion.evaluation import (
    REPORT_COLUMNS,
    average_precision,
    dataset_average_precision,
    dataset_map,
    mean_ap,
    pr_curve,
    report_rows,
    scenario_report,
    to_csv,
    to_json,
    to_text,
)
from helpers import random_dets_near, random_gts
from oracles import ap_oracle

CAR = CLASSES[0]


def gt(box, cls=CAR):
    return GroundTruthObject(cls, BoundingBox(*box))


def det(box, conf, cls=CAR):
    return Detection(cls, BoundingBox(*box), conf)


def test_ap_examples():
    g = [gt((0, 0, 10, 10))]
    assert average_precision([det((0, 0, 10, 8), 0.9)], g, CAR) == 1.0
    assert average_precision([], g, CAR) == 0.0
    assert average_precision([det((50, 50, 60, 60), 0.9), det((0, 0, 10, 10), 0.5)], g, CAR) == 0.5
    assert average_precision([], [], CAR) is None
    assert average_precision([det((0, 0, 1, 1), 0.4)], [], CAR) == 0.0


def test_eleven_point_option():
    g = [gt((0, 0, 10, 10))]
    dets = [det((50, 50, 60, 60), 0.9), det((0, 0, 10, 10), 0.5)]
    assert average_precision(dets, g, CAR, method="11_point") == pytest.approx(0.5)
    with pytest.raises(ValueError):
        average_precision(dets, g, CAR, method="coco")


def test_second_detection_on_matched_gt_is_fp():
    g = [gt((0, 0, 10, 10))]
    curve, npos = pr_curve([([det((0, 0, 10, 10), 0.9), det((0, 0, 10, 10), 0.8)], g)], CAR)
    assert npos == 1
    assert [p.precision for p in curve] == [1.0, 0.5]


def test_mean_ap_examples():
    assert mean_ap([0.7]) == 0.7
    assert mean_ap({1: 1.0, 2: 0.0, 3: None}) == 0.5
    with pytest.raises(ValueError):
        mean_ap([None, None])


def _tuples(dets):
    return [(d.cls.id, d.box.as_tuple(), d.confidence) for d in dets]


def _gt_tuples(gts):
    return [(g.cls.id, g.box.as_tuple()) for g in gts]


@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1))
def test_ap_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    gts = random_gts(rng, int(rng.integers(0, 6)))
    dets = random_dets_near(rng, gts, int(rng.integers(0, 6)))
    for cls in CLASSES[:3]:
        got = average_precision(dets, gts, cls)
        want = ap_oracle(_tuples(dets), _gt_tuples(gts), cls.id)
        if want is None:
            assert got is None
        else:
            assert got == pytest.approx(want, abs=1e-9)
            assert 0.0 <= got <= 1.0


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_recall_nondecreasing_and_low_fp_harmless(seed):
    rng = np.random.default_rng(seed)
    gts = random_gts(rng, int(rng.integers(1, 6)), n_classes=1)
    dets = random_dets_near(rng, gts, int(rng.integers(1, 6)), n_classes=1)
    curve, _ = pr_curve([(dets, gts)], CAR)
    recalls = [p.recall for p in curve]
    assert recalls == sorted(recalls)
    base = average_precision(dets, gts, CAR)
    low = det((900, 900, 950, 950), min(d.confidence for d in dets) / 2)
    assert average_precision(dets + [low], gts, CAR) <= base + 1e-15


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.permutations(list(range(8))))
def test_map_class_permutation_invariant(seed, perm):
    rng = np.random.default_rng(seed)
    gts = random_gts(rng, 5, n_classes=3)
    dets = random_dets_near(rng, gts, 6, n_classes=3)
    relabel = lambda c: CLASSES[perm[c.id]]
    gts2 = [GroundTruthObject(relabel(g.cls), g.box) for g in gts]
    dets2 = [Detection(relabel(d.cls), d.box, d.confidence) for d in dets]
    try:
        a = dataset_map([(dets, gts)])
    except ValueError:
        return
    assert dataset_map([(dets2, gts2)]) == pytest.approx(a, abs=1e-15)


def test_dataset_ap_pools_samples():
    g = [gt((0, 0, 10, 10))]
    samples = [([det((0, 0, 10, 10), 0.9)], g), ([det((50, 50, 60, 60), 0.95)], g)]
    # ranked: FP 0.95, TP 0.9 -> precision 0.5 at recall 0.5; second gt never found
    assert dataset_average_precision(samples, CAR) == pytest.approx(0.25)


class _R:
    def __init__(self, scene_id, label, loss, energy=1.0, latency=0.01):
        self.scene_id, self.label, self.loss_mean, self.energy, self.latency = scene_id, label, loss, energy, latency
        self.detections = ()


class _S:
    objects = (gt((0, 0, 10, 10)),)


def test_scenario_report():
    scenes = {i: _S() for i in range(4)}
    rows = scenario_report([_R(0, "fog", 1.0), _R(1, "fog", 3.0), _R(2, "city", 0.5, 2.0)], scenes)
    assert [r.label for r in rows] == ["city", "fog", "Overall"]
    assert rows[1].mean_loss == 2.0 and rows[1].scenes == 2
    assert rows[2].mean_loss == pytest.approx(1.5) and rows[2].mean_energy == pytest.approx(4 / 3)
    one = scenario_report([_R(0, "fog", 1.25, 3.0, 0.02)], scenes)
    assert (one[0].mean_loss, one[0].mean_energy, one[0].mean_latency) == (1.25, 3.0, 0.02)
    with pytest.raises(ValueError):
        scenario_report([], scenes)


def test_emitters():
    rows = [("city", 2, 0.5, 1.0, 0.01, 0.75)]
    text = to_csv(REPORT_COLUMNS, rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert parsed[0] == list(REPORT_COLUMNS) and parsed[1][2] == "0.500000"
    data = json.loads(to_json(REPORT_COLUMNS, rows + [("x", 1, float("nan"), 0.0, 0.0, 0.0)], {"k": 1}))
    assert data["meta"] == {"k": 1} and data["rows"][1]["mean_loss"] is None
    lines = to_text(REPORT_COLUMNS, rows).splitlines()
    assert len(lines) == 3 and lines[2].startswith("city") and set(lines[1]) == {"-", " "}
    assert report_rows(scenario_report([_R(0, "fog", 1.0)], {0: _S()}))[0][:3] == ("fog", 1, 1.0)


def test_report_reproducible(small_setup):
    from ctxfusion.experiments import LossOracleGate, run_gate, scene_index

    scenes = small_setup.test_scenes()
    a = scenario_report(run_gate(small_setup, LossOracleGate(), [0.01], scenes)[0], scene_index(scenes))
    b = scenario_report(run_gate(small_setup, LossOracleGate(), [0.01], scenes)[0], scene_index(scenes))
    assert a == b
