"""Command-line front end.

    ctxfusion sweep           gate x lambda trade-off table
    ctxfusion compare-fusion  single-sensor / early / late / adaptive comparison
    ctxfusion clockgate       per-context total energy with sensor clock gating
    ctxfusion fit-gate        fit and save the table-predictor gate
    ctxfusion generate-scenes write the benchmark scenes as JSON

Exit status: 0 ok, 1 usage error, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

from ctxfusion.config import DEFAULT_CONFIG, ConfigError, RunConfig, load_run_config
from ctxfusion.core import BranchKind, Configuration
from ctxfusion.evaluation import to_csv, to_json, to_text
from ctxfusion.experiments import (
    LossOracleGate,
    Setup,
    TablePredictorGate,
    clockgate_table,
    fit_table,
    load_or_fit_table,
    make_gate,
    run_gate,
    run_static,
    scene_index,
    summarize,
)
from ctxfusion.simbench import scenes_to_json

log = logging.getLogger("ctxfusion")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

LOSS_NOTE = "losses are per-scene means (scene total / ground-truth count); loss_sum columns hold per-scene totals"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Output:
    """Collects every table of a command and writes them only once all are ready."""

    def __init__(self, out_dir: Path, fmt: str):
        self.out_dir = out_dir
        self.fmt = fmt
        self.files: list[tuple[Path, str]] = []
        self.echo: list[str] = []

    def table(self, name: str, columns, rows, meta=None, echo: bool = True) -> None:
        rows = list(rows)
        if self.fmt == "csv":
            text, ext = to_csv(columns, rows), "csv"
        elif self.fmt == "json":
            text, ext = to_json(columns, rows, meta), "json"
        else:
            text, ext = to_text(columns, rows), "txt"
        self.files.append((self.out_dir / f"{name}.{ext}", text))
        if echo:
            self.echo.append(f"== {name} ==\n" + to_text(columns, rows))

    def raw(self, filename: str, text: str) -> None:
        self.files.append((self.out_dir / filename, text))

    def commit(self) -> None:
        for path, text in self.files:
            write_atomic(path, text)
        for block in self.echo:
            sys.stdout.write(block + "\n")
        for path, _ in self.files:
            log.info("wrote %s", path)


def _ms(seconds: float) -> float:
    return seconds * 1000.0


def cmd_sweep(setup: Setup, out: Output, workers: int) -> None:
    cfg = setup.config
    scenes = setup.test_scenes()
    idx = scene_index(scenes)
    table = None
    rows, detail = [], []
    for kind in cfg.sweep_gates:
        if kind == "table_predictor" and table is None:
            table = load_or_fit_table(setup, workers)
        gate = make_gate(setup, kind, table)
        results = run_gate(setup, gate, cfg.lambdas, scenes, workers)
        for lam, res in zip(cfg.lambdas, results):
            s = summarize(res, idx)
            loss_sum = sum(r.loss.total for r in res) / len(res)
            rows.append((lam, kind, s.mean_loss, loss_sum, s.mean_energy, s.mean_latency, s.map50))
            for r in res:
                detail.append(
                    (
                        lam,
                        kind,
                        r.scene_id,
                        r.label,
                        r.chosen.label,
                        r.selection.estimate,
                        r.loss_mean,
                        r.energy,
                        r.latency,
                    )
                )
    meta = {"command": "sweep", "seed": cfg.seed, "gamma": cfg.gamma, "note": LOSS_NOTE}
    out.table(
        "sweep",
        ("lambda_e", "gate", "mean_loss", "mean_loss_sum", "mean_energy_j", "mean_latency_s", "map50"),
        rows,
        meta,
    )
    out.table(
        "sweep_selections",
        ("lambda_e", "gate", "scene_id", "context", "configuration", "estimated_loss", "realized_loss", "energy_j", "latency_s"),
        detail,
        meta,
        echo=False,
    )


def cmd_compare_fusion(setup: Setup, out: Output, workers: int) -> None:
    cfg = setup.config
    scenes = setup.test_scenes()
    idx = scene_index(scenes)
    singles = [Configuration.of(b) for b, br in sorted(cfg.branches.items()) if br.kind is BranchKind.SINGLE]
    early = [Configuration.of(b) for b, br in sorted(cfg.branches.items()) if br.kind is BranchKind.EARLY_FUSION]
    late = setup.late_fusion()
    static = singles + early + [late]
    kinds = ["none"] * len(singles) + ["early"] * len(early) + ["late"]
    rows = []
    for kind, c, res in zip(kinds, static, run_static(setup, static, scenes, workers)):
        s = summarize(res, idx)
        rows.append((kind, c.label, s.map50, s.mean_loss, s.mean_energy, _ms(s.mean_latency)))
    table = load_or_fit_table(setup, workers) if cfg.compare_gate == "table_predictor" else None
    gate = make_gate(setup, cfg.compare_gate, table)
    for lam, res in zip(cfg.compare_lambdas, run_gate(setup, gate, cfg.compare_lambdas, scenes, workers)):
        s = summarize(res, idx)
        rows.append((f"adaptive[{cfg.compare_gate}]", f"lambda_e={lam:g}", s.map50, s.mean_loss, s.mean_energy, _ms(s.mean_latency)))
    meta = {"command": "compare-fusion", "seed": cfg.seed, "gamma": cfg.gamma, "note": LOSS_NOTE}
    out.table("compare_fusion", ("fusion", "configuration", "map50", "mean_loss", "energy_j", "latency_ms"), rows, meta)


def cmd_clockgate(setup: Setup, out: Output, workers: int) -> None:
    rows = [
        (r.label, r.late_energy, r.adaptive_energy, r.adaptive_no_gating, 100.0 * r.savings)
        for r in clockgate_table(setup)
    ]
    meta = {"command": "clockgate", "plan": "knowledge gate; sensors unused by the configuration are clock gated"}
    out.table(
        "clockgate",
        ("context", "late_fusion_j", "adaptive_j", "adaptive_no_gating_j", "savings_pct"),
        rows,
        meta,
    )


def cmd_fit_gate(setup: Setup, out: Output, workers: int) -> None:
    scenes = setup.training_scenes()
    if not scenes:
        raise ConfigError("benchmark.training_scenes_per_label must be >= 1 to fit a gate table")
    table = fit_table(setup, scenes, workers)
    out.raw("gate_table.csv", table.to_csv())

    held_out = setup.test_scenes()
    idx = scene_index(held_out)
    lam = 0.0
    rows = []
    for name, gate in (("loss_oracle", LossOracleGate()), ("table_predictor", TablePredictorGate(table))):
        res = run_gate(setup, gate, [lam], held_out, workers)[0]
        s = summarize(res, idx)
        rows.append((name, lam, s.mean_loss, s.mean_energy, s.map50))
    singles = [Configuration.of(b) for b, br in sorted(setup.config.branches.items()) if br.kind is BranchKind.SINGLE]
    worst = None
    for c, res in zip(singles, run_static(setup, singles, held_out, workers)):
        s = summarize(res, idx)
        if worst is None or s.mean_loss > worst[2]:
            worst = (f"static[{c.label}]", lam, s.mean_loss, s.mean_energy, s.map50)
    rows.append(worst)
    meta = {"command": "fit-gate", "training_scenes": len(scenes), "held_out_scenes": len(held_out), "note": LOSS_NOTE}
    out.table("fit_gate", ("policy", "lambda_e", "mean_loss", "mean_energy_j", "map50"), rows, meta)


def cmd_generate_scenes(setup: Setup, out: Output, workers: int, split: str = "test") -> None:
    scenes = setup.test_scenes() if split == "test" else setup.training_scenes()
    out.raw(f"scenes_{split}.json", scenes_to_json(scenes))
    counts: dict[str, int] = {}
    for s in scenes:
        counts[s.label] = counts.get(s.label, 0) + 1
    out.table("scenes_summary", ("context", "scenes"), sorted(counts.items()), {"split": split})


COMMANDS = {
    "sweep": cmd_sweep,
    "compare-fusion": cmd_compare_fusion,
    "clockgate": cmd_clockgate,
    "fit-gate": cmd_fit_gate,
    "generate-scenes": cmd_generate_scenes,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=DEFAULT_CONFIG, help="run configuration (TOML)")
    common.add_argument("--seed", type=int, help="override benchmark.seed")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="scene-level worker processes")
    common.add_argument("--output-dir", type=Path, help="where result files go (default: ./ctxfusion-out)")
    common.add_argument("--format", choices=("csv", "json", "text"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="ctxfusion", description="Context-gated multi-branch sensor fusion simulator with energy accounting.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "generate-scenes":
            sp.add_argument("--split", choices=("test", "train"), default="test")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"ctxfusion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.workers < 1:
        print("ctxfusion: error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE

    try:
        cfg: RunConfig = load_run_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed)
        setup = Setup.from_config(cfg)
        out_dir = args.output_dir or cfg.output_dir or Path("ctxfusion-out")
        out = Output(out_dir, args.format)
        fn = COMMANDS[args.command]
        if args.command == "generate-scenes":
            fn(setup, out, args.workers, args.split)
        else:
            fn(setup, out, args.workers)
        out.commit()
    except ConfigError as exc:
        print(f"ctxfusion: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"ctxfusion: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
