"""Regenerate src/ctxfusion/data/quality.csv.

Per-sensor quality by context, then early-fusion branches derived from their
constituents: in clear scenes they beat the best constituent, in degraded
scenes they inherit the worst one.
"""

from pathlib import Path

from ctxfusion.core import CONTEXT_LABELS
from ctxfusion.simbench import BranchQuality, QualityMatrix

# (miss_rate, fp_rate, box_noise_sigma, alpha, beta)
CAMERA = {
    "clear": (0.05, 0.25, 0.03, 9.0, 1.5),
    "rain": (0.22, 0.6, 0.05, 5.0, 2.5),
    "night": (0.45, 0.8, 0.07, 3.0, 3.0),
    "fog": (0.60, 1.0, 0.08, 2.5, 3.5),
    "snow": (0.55, 1.0, 0.08, 2.5, 3.5),
}
LIDAR = {
    "clear": (0.10, 0.35, 0.04, 7.0, 2.0),
    "rain": (0.25, 0.6, 0.05, 5.0, 2.5),
    "night": (0.10, 0.35, 0.04, 7.0, 2.0),
    "fog": (0.40, 0.9, 0.07, 3.5, 3.0),
    "snow": (0.45, 0.9, 0.07, 3.5, 3.0),
}
RADAR = {
    "clear": (0.20, 0.5, 0.09, 5.0, 2.5),
    "rain": (0.20, 0.5, 0.09, 5.0, 2.5),
    "night": (0.20, 0.5, 0.09, 5.0, 2.5),
    "fog": (0.22, 0.5, 0.09, 5.0, 2.5),
    "snow": (0.22, 0.5, 0.09, 5.0, 2.5),
}
CONDITION = {
    "city": "clear",
    "junction": "clear",
    "motorway": "clear",
    "rural": "clear",
    "rain": "rain",
    "night": "night",
    "fog": "fog",
    "snow": "snow",
}
DEGRADED = {"fog", "snow", "night", "rain"}
LEFT_CAMERA_MISS_FACTOR = 1.3  # the left camera is the weaker of the stereo pair

SINGLE = {"cam_left": CAMERA, "cam_right": CAMERA, "lidar": LIDAR, "radar": RADAR}
EARLY = {
    "early_stereo": ("cam_left", "cam_right"),
    "early_cam_lidar": ("cam_left", "cam_right", "lidar"),
    "early_lidar_radar": ("lidar", "radar"),
}


def single(branch: str, label: str) -> BranchQuality:
    miss, fp, noise, a, b = SINGLE[branch][CONDITION[label]]
    if branch == "cam_left":
        miss = min(1.0, miss * LEFT_CAMERA_MISS_FACTOR)
    return BranchQuality(miss, fp, noise, a, b)


def early(parts, label: str) -> BranchQuality:
    qs = [single(p, label) for p in parts]
    if label in DEGRADED:
        worst = max(qs, key=lambda q: q.miss_rate)
        return BranchQuality(min(1.0, worst.miss_rate * 1.1), worst.fp_rate, worst.box_noise_sigma, worst.confidence_alpha, worst.confidence_beta)
    best = min(qs, key=lambda q: q.miss_rate)
    return BranchQuality(
        round(best.miss_rate * 0.6, 4),
        best.fp_rate,
        min(q.box_noise_sigma for q in qs),
        best.confidence_alpha + 1.0,
        best.confidence_beta,
    )


def build() -> QualityMatrix:
    entries = {}
    for label in CONTEXT_LABELS:
        for b in SINGLE:
            entries[(label, b)] = single(b, label)
        for b, parts in EARLY.items():
            entries[(label, b)] = early(parts, label)
    return QualityMatrix(entries)


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "ctxfusion" / "data" / "quality.csv"
    out.write_text(build().to_csv())
    print(f"wrote {out}")
