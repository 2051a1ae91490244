"""Memory oracle: list every training buffer a PE holds and add them up."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..calibration import CalibrationProfile
from ..cost import SystemDescriptor
from ..model_ir import ModelDescriptor
from ..strategies.config import StrategyConfig
from ..strategies.predict import micro_batch, resolve_groups


@dataclass(frozen=True)
class Buffer:
    pe_group: int  # pipeline stage for layer/pipeline configs, else 0
    layer: str
    kind: str  # x, dx, y, dy, w, dw, bias
    elems: Fraction


@dataclass(frozen=True)
class BufferReport:
    buffers: tuple[Buffer, ...]
    bytes: Fraction  # gamma * delta * elements on the fullest PE


def _sharding(model: ModelDescriptor, cfg: StrategyConfig) -> tuple[Fraction, int]:
    """(samples of activation held per PE, divisor of the weight tensors)."""
    B = model.batch_size
    match cfg.kind:
        case "data":
            return Fraction(micro_batch(B, cfg.p)), 1
        case "spatial":
            return Fraction(B, cfg.p), 1
        case "filter" | "channel":
            return Fraction(B), cfg.p
        case "df":
            return Fraction(micro_batch(B, cfg.p1)), cfg.p2
        case "ds":
            return Fraction(micro_batch(B, cfg.p1), cfg.p2), 1
    return Fraction(B), 1


def enumerate_buffers(
    model: ModelDescriptor,
    cfg: StrategyConfig,
    system: SystemDescriptor,
    profile: CalibrationProfile | None = None,
) -> BufferReport:
    """Per-PE buffers under ``cfg``; the profile is only needed to partition pipelines without explicit groups."""
    if cfg.kind in ("layer", "pipeline"):
        groups = cfg.groups if cfg.groups is not None else resolve_groups(model, profile, cfg.p, None)
    else:
        groups = ((1, model.G),)
    samples, w_div = _sharding(model, cfg)
    buffers = []
    per_pe = []
    for g, (first, last) in enumerate(groups):
        total = Fraction(0)
        for i in range(first - 1, last):
            c = model.counts[i]
            name = model.layers[i].name
            listing = (
                ("x", samples * c.x_elems),
                ("dx", samples * c.x_elems),
                ("y", samples * c.y_elems),
                ("dy", samples * c.y_elems),
                ("w", Fraction(c.w_elems, w_div)),
                ("dw", Fraction(c.w_elems, w_div)),
                ("bias", Fraction(c.bias_elems)),
            )
            for kind, elems in listing:
                buffers.append(Buffer(g, name, kind, elems))
                total += elems
        per_pe.append(total)
    return BufferReport(tuple(buffers), Fraction(system.gamma) * system.delta * max(per_pe))
