"""Gate policies: per-configuration loss estimates from scene context.

Every gate returns a complete table ``{Configuration: estimated loss}`` over
the active configuration space; the optimizer does the rest.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from ctxfusion.core import Configuration, ConfigurationSpace, Context

SENTINEL = 1e9
GLOBAL_ROW = "__global__"


class GateError(ValueError):
    pass


def knowledge_gate(ctx: Context, rules: Mapping[str, Configuration], space: ConfigurationSpace) -> dict[Configuration, float]:
    """Zero for the configuration designated for ``ctx.label``, a large sentinel elsewhere."""
    try:
        designated = rules[ctx.label]
    except KeyError:
        raise GateError(f"no rule for context {ctx.label!r}") from None
    if designated not in space:
        raise GateError(f"rule for {ctx.label!r} designates {designated}, which is outside the configuration space")
    return {c: (0.0 if c == designated else SENTINEL) for c in space}


@dataclass(frozen=True)
class GateTable:
    """Mean realized loss per (context label, configuration) plus a global row."""

    rows: Mapping[str, Mapping[Configuration, float]]
    global_row: Mapping[Configuration, float]

    def row(self, label: str) -> Mapping[Configuration, float]:
        return self.rows.get(label, self.global_row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("context", "configuration", "mean_loss"))
        for label in sorted(self.rows):
            for cfg in sorted(self.rows[label], key=lambda c: c.key):
                w.writerow((label, cfg.label, repr(self.rows[label][cfg])))
        for cfg in sorted(self.global_row, key=lambda c: c.key):
            w.writerow((GLOBAL_ROW, cfg.label, repr(self.global_row[cfg])))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GateTable":
        rows: dict[str, dict[Configuration, float]] = defaultdict(dict)
        glob: dict[Configuration, float] = {}
        for r in csv.DictReader(io.StringIO(text)):
            cfg = Configuration.parse(r["configuration"])
            v = float(r["mean_loss"])
            if r["context"] == GLOBAL_ROW:
                glob[cfg] = v
            else:
                rows[r["context"]][cfg] = v
        if not glob:
            raise GateError("gate table has no global row")
        return cls(dict(rows), glob)

    @classmethod
    def load(cls, path: str | Path) -> "GateTable":
        return cls.from_csv(Path(path).read_text())


def fit_gate_table(log: Iterable[tuple[str, Configuration, float]]) -> GateTable:
    """Arithmetic mean of realized loss per (label, configuration) and per configuration."""
    per: dict[str, dict[Configuration, list[float]]] = defaultdict(lambda: defaultdict(list))
    glob: dict[Configuration, list[float]] = defaultdict(list)
    n = 0
    for label, cfg, loss in log:
        per[label][cfg].append(loss)
        glob[cfg].append(loss)
        n += 1
    if n == 0:
        raise GateError("cannot fit a gate table on an empty training log")
    rows = {lab: {c: math.fsum(v) / len(v) for c, v in d.items()} for lab, d in per.items()}
    return GateTable(rows, {c: math.fsum(v) / len(v) for c, v in glob.items()})


def table_predictor_gate(ctx: Context, table: GateTable, space: ConfigurationSpace) -> dict[Configuration, float]:
    row = table.row(ctx.label)
    out = {}
    for c in space:
        v = row.get(c)
        if v is None:
            v = table.global_row.get(c)
        if v is None:
            raise GateError(f"gate table has no estimate for configuration {c}")
        out[c] = v
    return out


def loss_oracle_gate(scene, ctx: Context, space: ConfigurationSpace, run) -> dict[Configuration, float]:
    """Realized per-scene mean loss of every configuration (a posteriori; not deployable)."""
    return {c: run.mean_loss(c) for c in space}


class GatePolicy:
    kind = ""

    def estimate(self, scene, ctx: Context, space: ConfigurationSpace, run) -> dict[Configuration, float]:
        raise NotImplementedError


class KnowledgeGate(GatePolicy):
    kind = "knowledge"

    def __init__(self, rules: Mapping[str, Configuration]):
        self.rules = dict(rules)

    def check_labels(self, labels: Iterable[str]) -> None:
        missing = sorted(set(labels) - set(self.rules))
        if missing:
            raise GateError(f"no rule for context {missing[0]!r}")

    def estimate(self, scene, ctx, space, run):
        return knowledge_gate(ctx, self.rules, space)


class TablePredictorGate(GatePolicy):
    kind = "table_predictor"

    def __init__(self, table: GateTable):
        self.table = table

    def estimate(self, scene, ctx, space, run):
        return table_predictor_gate(ctx, self.table, space)


class LossOracleGate(GatePolicy):
    kind = "loss_oracle"

    def estimate(self, scene, ctx, space, run):
        return loss_oracle_gate(scene, ctx, space, run)
