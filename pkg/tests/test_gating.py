from collections import defaultdict

import numpy as np
import pytest

from ctxfusion.core import Branch, Configuration, Context, enumerate_configurations
from ctxfusion.gating import (
    GLOBAL_ROW,
    SENTINEL,
    GateError,
    GateTable,
    KnowledgeGate,
    LossOracleGate,
    TablePredictorGate,
    fit_gate_table,
    knowledge_gate,
    table_predictor_gate,
)
from ctxfusion.optimizer import OptimizerParams, select_configuration
from ctxfusion.simbench import BranchQuality, QualityMatrix, Simulator, generate_scene

BRANCHES = {b.id: b for b in (Branch.make("cam", "camera_left"), Branch.make("lid", "lidar"), Branch.make("rad", "radar"))}
SPACE = enumerate_configurations(BRANCHES.values())
A, B = Configuration.of("cam"), Configuration.of("lid")


def ctx(label):
    return Context(label, (0.0,))


def test_knowledge_gate():
    est = knowledge_gate(ctx("city"), {"city": B}, SPACE)
    assert est[B] == 0.0 and all(v == SENTINEL for c, v in est.items() if c != B)
    assert set(est) == set(SPACE)
    with pytest.raises(GateError, match="no rule for context"):
        knowledge_gate(ctx("desert"), {"city": B}, SPACE)
    with pytest.raises(GateError):
        knowledge_gate(ctx("city"), {"city": Configuration.of("nope")}, SPACE)


def test_knowledge_selection_ignores_lambda():
    late = Configuration.of("cam", "lid", "rad")
    est = knowledge_gate(ctx("fog"), {"fog": late}, SPACE)
    energies = {c: float(len(c)) for c in SPACE}
    for lam in (0.0, 0.3, 1.0):
        for gamma in (0.0, 0.5, 10.0):
            assert select_configuration(est, energies, OptimizerParams(gamma, lam)).chosen == late


def test_knowledge_policy_label_check():
    with pytest.raises(GateError, match="rain"):
        KnowledgeGate({"city": A}).check_labels(["city", "rain"])


def test_fit_examples():
    t = fit_gate_table([("fog", A, 2.5)])
    assert t.rows["fog"][A] == 2.5
    t = fit_gate_table([("fog", A, 1.0), ("fog", A, 3.0), ("rain", B, 0.8), ("rain", B, 1.2)])
    assert t.rows["fog"][A] == 2.0 and t.rows["rain"][B] == 1.0
    assert table_predictor_gate(ctx("fog"), fit_gate_table([("fog", c, 1.0) for c in SPACE]), SPACE)[A] == 1.0
    with pytest.raises(GateError):
        fit_gate_table([])


def test_unseen_label_uses_global_means():
    rng = np.random.default_rng(0)
    log = [(lab, c, float(rng.uniform(0, 3))) for lab in ("fog", "rain") for c in SPACE for _ in range(3)]
    t = fit_gate_table(log)
    sums, counts = defaultdict(float), defaultdict(int)
    for _, c, v in log:
        sums[c] += v
        counts[c] += 1
    est = table_predictor_gate(ctx("desert"), t, SPACE)
    for c in SPACE:
        assert est[c] == pytest.approx(sums[c] / counts[c], abs=1e-12)
    by = defaultdict(list)
    for lab, c, v in log:
        by[(lab, c)].append(v)
    for (lab, c), vs in by.items():
        assert t.rows[lab][c] == pytest.approx(sum(vs) / len(vs), abs=1e-12)


def test_table_csv_roundtrip(tmp_path):
    t = fit_gate_table([("fog", c, 0.1 * i) for i, c in enumerate(SPACE)] + [("rain", A, 1 / 3)])
    back = GateTable.from_csv(t.to_csv())
    assert back == t
    p = tmp_path / "t.csv"
    p.write_text(t.to_csv())
    assert GateTable.load(p) == t
    assert GLOBAL_ROW in t.to_csv()
    with pytest.raises(GateError):
        GateTable.from_csv("context,configuration,mean_loss\nfog,cam,1.0\n")


def test_table_missing_configuration():
    t = fit_gate_table([("fog", A, 1.0)])
    with pytest.raises(GateError):
        table_predictor_gate(ctx("fog"), t, SPACE)


def _sim(q=None):
    labels = ["city"]
    q = q or BranchQuality(0.2, 0.5, 0.05, 5.0, 2.0)
    return Simulator(BRANCHES, QualityMatrix.uniform(labels, BRANCHES, q))


def test_oracle_estimates_equal_reexecution():
    sim = _sim()
    for seed in range(20):
        scene = generate_scene("city", (2, 6), seed)
        est = LossOracleGate().estimate(scene, scene.context, SPACE, sim.for_scene(scene))
        fresh = sim.for_scene(scene)
        assert len(est) == 7
        assert all(est[c] == fresh.mean_loss(c) for c in SPACE)


def test_oracle_empty_scene_zero():
    sim = _sim(BranchQuality(0.0, 0.0, 0.0, 1.0, 0.0))
    scene = generate_scene("city", (0, 0), 3)
    est = LossOracleGate().estimate(scene, scene.context, SPACE, sim.for_scene(scene))
    assert all(v == 0.0 for v in est.values())


def test_oracle_single_branch_space():
    sim = _sim()
    space = SPACE.restrict([A])
    scene = generate_scene("city", (3, 3), 9)
    est = LossOracleGate().estimate(scene, scene.context, space, sim.for_scene(scene))
    assert list(est) == [A] and est[A] == sim.for_scene(scene).mean_loss(A)


def test_oracle_dominates_static():
    sim = _sim()
    energies = {c: 1.0 for c in SPACE}
    for seed in range(20):
        scene = generate_scene("city", (2, 6), seed)
        run = sim.for_scene(scene)
        est = LossOracleGate().estimate(scene, scene.context, SPACE, run)
        chosen = select_configuration(est, energies, OptimizerParams(100.0, 0.0)).chosen
        assert all(run.mean_loss(chosen) <= run.mean_loss(c) for c in SPACE)


def test_policies_return_complete_finite_tables():
    sim = _sim()
    scene = generate_scene("city", (2, 6), 1)
    run = sim.for_scene(scene)
    t = fit_gate_table([("city", c, 1.0) for c in SPACE])
    for gate in (KnowledgeGate({"city": A}), TablePredictorGate(t), LossOracleGate()):
        est = gate.estimate(scene, scene.context, SPACE, run)
        assert set(est) == set(SPACE)
        assert all(np.isfinite(v) for v in est.values())
