"""The shipped calibration file is exactly what the fitting code produces."""

import pytest

from ctxfusion.calibration import (
    REFERENCE_ADAPTIVE_TOTAL,
    REFERENCE_COMPUTE,
    REFERENCE_LATE_TOTAL,
    bundled_calibration_text,
    fit_calibration,
)
from ctxfusion.config import DATA_DIR
from ctxfusion.core import Configuration
from ctxfusion.energymodel import config_energy, load_calibration, total_energy
from ctxfusion.experiments import gating_plan


def test_bundled_file_is_reproducible():
    assert (DATA_DIR / "calibration.toml").read_text() == bundled_calibration_text()


def test_fit_residuals(default_config):
    cal, compute, sensors = fit_calibration(default_config.branches, default_config.knowledge_rules)
    assert compute.residual_energy < 1e-9
    assert compute.residual_latency_ms < 1e-6
    assert sensors.max_residual <= 0.02
    assert cal.sensors["radar"].frequency == 4.0
    for c in cal.profile.costs.values():
        assert c.energy >= 0 and c.latency >= 0


def test_reference_compute_cells():
    cal = load_calibration(DATA_DIR / "calibration.toml")
    for label, (e, t_ms) in REFERENCE_COMPUTE.items():
        got_e, got_t = config_energy(Configuration.parse(label), cal.profile)
        assert got_e == pytest.approx(e, abs=0.02)
        assert got_t * 1000 == pytest.approx(t_ms, abs=0.5)


def test_reference_total_cells(default_setup):
    cal = default_setup.calibration
    late = default_setup.late_fusion()
    assert total_energy(late, cal.profile, cal.sensors, {}) == pytest.approx(REFERENCE_LATE_TOTAL, abs=0.05)
    for label, target in REFERENCE_ADAPTIVE_TOTAL.items():
        cfg = default_setup.config.knowledge_rules[label]
        got = total_energy(cfg, cal.profile, cal.sensors, gating_plan(cfg, default_setup))
        assert got == pytest.approx(target, abs=0.05), label
