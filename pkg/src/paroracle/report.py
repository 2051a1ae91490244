"""Strategy sweeps, breakdown output and comparison against measured runs."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .calibration import CalibrationProfile
from .cost import SystemDescriptor
from .errors import OracleError, ParseError, ZeroMeasured
from .model_ir import ModelDescriptor
from .strategies import config as sc
from .strategies.predict import (
    PhaseLabel,
    Prediction,
    Reason,
    ReasonKind,
    channel_limit,
    filter_limit,
    predict,
)

BREAKDOWN_PHASES = (
    "FB-compute",
    "WU",
    PhaseLabel.GE_ALLREDUCE.value,
    PhaseLabel.FB_ALLGATHER.value,
    PhaseLabel.FB_ALLREDUCE.value,
    PhaseLabel.FB_HALO.value,
    PhaseLabel.FB_P2P.value,
    "IO",
)
COMPUTE_PHASES = ("FB-compute", "WU")


# ---------------------------------------------------------------------------
# recommend

@dataclass(frozen=True)
class Rejection:
    config: sc.StrategyConfig
    reasons: tuple[Reason, ...]


@dataclass(frozen=True)
class Recommendation:
    ranked: tuple[tuple[sc.StrategyConfig, Prediction], ...]
    rejected: tuple[Rejection, ...]

    @property
    def best(self) -> tuple[sc.StrategyConfig, Prediction] | None:
        return self.ranked[0] if self.ranked else None


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def _pe_counts(budget: int, dense: bool) -> list[int]:
    if dense:
        return list(range(1, budget + 1))
    return [1 << i for i in range(budget.bit_length()) if 1 << i <= budget]


def _splits(p: int, ndim: int) -> Iterable[tuple[int, int, int]]:
    for pw in _divisors(p):
        rest = p // pw
        if ndim == 1:
            if rest == 1:
                yield (pw, 1, 1)
            continue
        for ph in _divisors(rest):
            pd = rest // ph
            if pd > 1 and ndim < 3:
                continue
            yield (pw, ph, pd)


def enumerate_configs(model: ModelDescriptor, budget: int, dense: bool = False) -> list[sc.StrategyConfig]:
    """Every candidate configuration using at most ``budget`` PEs, each exactly once."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    counts = [p for p in _pe_counts(budget, dense) if p >= 2]
    ndim = model.layers[0].ndim
    fmin, cmin = filter_limit(model), channel_limit(model)
    segments = [1 << i for i in range(model.batch_size.bit_length()) if 1 << i <= model.batch_size]
    out: list[sc.StrategyConfig] = [sc.Serial()]
    for p in counts:
        out.append(sc.Data(p))
        out.extend(sc.Spatial(*s) for s in _splits(p, ndim))
        if p <= model.G:
            out.append(sc.LayerPure(p))
            out.extend(sc.Pipeline(p, S) for S in segments)
        if fmin % p == 0:
            out.append(sc.Filter(p))
        if cmin % p == 0:
            out.append(sc.Channel(p))
        for p1 in _divisors(p):
            p2 = p // p1
            if p1 < 2 or p2 < 2:
                continue  # the degenerate splits are plain data / filter / spatial
            out.append(sc.DataFilter(p1, p2))
            out.extend(sc.DataSpatial(p1, *s) for s in _splits(p2, ndim))
    return out


def recommend(
    model: ModelDescriptor,
    system: SystemDescriptor,
    profile: CalibrationProfile,
    budget: int,
    memory_cap: float | None = None,
    dense: bool = False,
) -> Recommendation:
    """Rank feasible configurations by per-epoch time.

    Ties go to lower memory, then fewer PEs, then the configuration string.
    """
    ranked = []
    rejected = []
    for cfg in enumerate_configs(model, budget, dense):
        try:
            pred = predict(model, system, profile, cfg, memory_cap)
        except OracleError as exc:
            rejected.append(Rejection(cfg, (Reason(ReasonKind.SCALING_LIMIT, str(exc)),)))
            continue
        if pred.feasible:
            ranked.append((cfg, pred))
        else:
            rejected.append(Rejection(cfg, pred.verdict.reasons))
    ranked.sort(key=lambda cp: (cp[1].total, cp[1].mem_peak, cp[1].p_used, sc.format_strategy(cp[0])))
    return Recommendation(tuple(ranked), tuple(rejected))


# ---------------------------------------------------------------------------
# accuracy

@dataclass(frozen=True)
class MeasuredRun:
    config: sc.StrategyConfig | None
    measured_comp: float
    measured_comm: float
    measured_total: float


def raw_accuracy(predicted_total: float, measured_total: float) -> float:
    if measured_total == 0:
        raise ZeroMeasured("measured total time is zero")
    # rationals so that e.g. 0.9 vs 1.0 gives exactly 0.9
    p, m = Fraction(predicted_total), Fraction(measured_total)
    return float(1 - abs(p - m) / abs(m))


def projection_accuracy(pred: Prediction | float, run: MeasuredRun | float) -> float:
    """1 - |predicted - measured| / measured, clamped to [0, 1]."""
    predicted = pred.total if isinstance(pred, Prediction) else pred
    measured = run.measured_total if isinstance(run, MeasuredRun) else run
    return min(1.0, max(0.0, raw_accuracy(predicted, measured)))


# ---------------------------------------------------------------------------
# breakdown output

def breakdown_rows(pred: Prediction) -> list[tuple[str, float, float]]:
    """(phase, seconds per epoch, seconds per iteration) in fixed phase order."""
    exact = pred.exact
    values = {
        "FB-compute": exact["t_fb"],
        "WU": exact["t_wu"],
        **{ph.value: exact[ph.value] for ph in PhaseLabel},
        "IO": Fraction(0),  # data loading is not modeled
    }
    I = pred.iterations
    return [(ph, float(values[ph]), float(values[ph] / I) if I else 0.0) for ph in BREAKDOWN_PHASES]


def emit_breakdown(pred: Prediction, fmt: str = "table", epochs: int | None = None) -> str:
    rows = breakdown_rows(pred)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["phase", "per_epoch_s", "per_iteration_s"] + (["per_run_s"] if epochs else [])
        writer.writerow(header)
        for phase, epoch, it in rows:
            writer.writerow([phase, repr(epoch), repr(it)] + ([repr(epoch * epochs)] if epochs else []))
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "config": pred.label,
            "p": pred.p_used,
            "iterations_per_epoch": float(pred.iterations),
            "mem_peak_bytes": pred.mem_peak,
            "feasible": pred.feasible,
            "reasons": [str(r) for r in (pred.verdict.reasons if pred.verdict else ())],
            "phases": [
                {"phase": phase, "per_epoch_s": epoch, "per_iteration_s": it}
                | ({"per_run_s": epoch * epochs} if epochs else {})
                for phase, epoch, it in rows
            ],
            "total_per_epoch_s": pred.total,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")
    lines = [f"strategy {pred.label}  p={pred.p_used}  I={float(pred.iterations):g} iterations/epoch"]
    head = f"{'phase':<14}{'s/epoch':>14}{'s/iter':>14}" + (f"{'s/run':>14}" if epochs else "")
    lines.append(head)
    lines.append("-" * len(head))
    for phase, epoch, it in rows:
        lines.append(f"{phase:<14}{epoch:>14.6g}{it:>14.6g}" + (f"{epoch * epochs:>14.6g}" if epochs else ""))
    total = pred.total
    lines.append("-" * len(head))
    lines.append(
        f"{'total':<14}{total:>14.6g}{pred.per_iteration(total):>14.6g}" + (f"{total * epochs:>14.6g}" if epochs else "")
    )
    lines.append(f"peak memory   {pred.mem_peak / 1e9:.4g} GB per PE")
    if pred.verdict is not None:
        if pred.verdict.feasible:
            lines.append("feasible")
        else:
            lines.extend(f"infeasible: {r}" for r in pred.verdict.reasons)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# loaders for compare

def load_breakdown(text: str) -> dict[str, float]:
    """Per-iteration seconds by phase from an emitted csv or json breakdown."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        return {row["phase"]: float(row["per_iteration_s"]) for row in doc["phases"]}
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:3] != ["phase", "per_epoch_s", "per_iteration_s"]:
        raise ParseError("expected a breakdown csv with header phase,per_epoch_s,per_iteration_s", 1)
    out = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            out[row[0]] = float(row[2])
        except (IndexError, ValueError):
            raise ParseError("bad breakdown row", lineno) from None
    return out


def load_measured(text: str) -> tuple[dict[str, float], float | None]:
    """``phase,seconds`` rows (per iteration). A ``total`` row overrides the phase sum."""
    phases: dict[str, float] = {}
    total = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].startswith("#"):
            continue
        row = [c.strip() for c in row]
        if lineno == 1 and row[0].lower() == "phase":
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 columns, got {len(row)}", lineno)
        try:
            value = float(row[1])
        except ValueError:
            raise ParseError(f"expected a number, got {row[1]!r}", lineno, "seconds") from None
        if row[0].lower() == "total":
            total = value
        elif row[0] in BREAKDOWN_PHASES:
            phases[row[0]] = value
        else:
            warnings.warn(f"line {lineno}: unknown phase {row[0]!r} ignored", stacklevel=2)
    return phases, total


def measured_run(phases: dict[str, float], total: float | None = None, config=None) -> MeasuredRun:
    comp = math.fsum(v for k, v in phases.items() if k in COMPUTE_PHASES)
    comm = math.fsum(v for k, v in phases.items() if k not in COMPUTE_PHASES)
    return MeasuredRun(config, comp, comm, math.fsum(phases.values()) if total is None else total)


@dataclass(frozen=True)
class Comparison:
    rows: tuple[tuple[str, float, float], ...]  # phase, predicted, measured (per iteration)
    predicted_total: float
    measured_total: float
    accuracy: float
    raw: float


def compare(predicted: dict[str, float], measured: dict[str, float], measured_total: float | None = None) -> Comparison:
    rows = tuple((ph, predicted.get(ph, 0.0), measured.get(ph, 0.0)) for ph in BREAKDOWN_PHASES)
    pred_total = math.fsum(predicted.get(ph, 0.0) for ph in BREAKDOWN_PHASES)
    meas_total = math.fsum(measured.values()) if measured_total is None else measured_total
    raw = raw_accuracy(pred_total, meas_total)
    return Comparison(rows, pred_total, meas_total, min(1.0, max(0.0, raw)), raw)


def format_comparison(cmp: Comparison) -> str:
    lines = [f"{'phase':<14}{'predicted':>14}{'measured':>14}", "-" * 42]
    for phase, p, m in cmp.rows:
        lines.append(f"{phase:<14}{p:>14.6g}{m:>14.6g}")
    lines.append("-" * 42)
    lines.append(f"{'total':<14}{cmp.predicted_total:>14.6g}{cmp.measured_total:>14.6g}")
    lines.append(f"projection accuracy {cmp.accuracy:.2%} (raw {cmp.raw:.4f})")
    return "\n".join(lines) + "\n"
