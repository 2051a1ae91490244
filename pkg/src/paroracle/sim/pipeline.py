"""Event-driven pipeline schedule (GPipe style) and its p2p transfer clock."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass(frozen=True)
class ScheduleCell:
    stage: int  # wavefront index of the cell in the lock-step view
    pe: int
    segment: int
    kind: str  # "forward" | "backward"
    start: object
    duration: object


def _wavefront(costs: Sequence, S: int, kind: str, offset=0) -> tuple[list[ScheduleCell], object]:
    """Run S segments through the stages in order; return cells and makespan.

    A stage starts segment s once it finished s-1 and the previous stage
    finished s.
    """
    p = len(costs)
    finish = [[0] * S for _ in range(p)]
    cells = []
    for i in range(p):
        for s in range(S):
            ready = max(finish[i - 1][s] if i else offset, finish[i][s - 1] if s else offset)
            finish[i][s] = ready + costs[i]
            cells.append(ScheduleCell(i + s, i, s, kind, ready, costs[i]))
    return cells, finish[p - 1][S - 1] if p else offset


def pipeline_schedule(group_fw: Sequence, group_bw: Sequence, S: int, B) -> tuple[list[ScheduleCell], object]:
    """One iteration: forward wavefront over S segments, then the backward one.

    ``group_fw``/``group_bw`` are per-sample costs of each group; a segment
    carries B/S samples. The backward pass runs the stages in reverse order.
    """
    if S < 1:
        raise ValueError("S must be >= 1")
    seg = Fraction(B, S) if isinstance(B, int) else B / S
    fw = [c * seg for c in group_fw]
    bw = [c * seg for c in reversed(group_bw)]
    cells, t_fwd = _wavefront(fw, S, "forward")
    back, t_end = _wavefront(bw, S, "backward", offset=t_fwd)
    p = len(group_fw)
    back = [
        ScheduleCell(c.stage, p - 1 - c.pe, c.segment, c.kind, c.start, c.duration) for c in back
    ]
    return cells + back, t_end


def simulate_pipeline_schedule(group_fw: Sequence, group_bw: Sequence, S: int, B, I) -> object:
    """Makespan of I iterations of the forward-then-backward schedule."""
    _, per_iter = pipeline_schedule(group_fw, group_bw, S, B)
    return I * per_iter


def simulate_pipeline_p2p(link_times: Sequence, S: int, I) -> object:
    """Boundary transfers of a lock-step pipeline, forward plus backward.

    Segment s crosses boundary i in stage i + s. The pipeline advances on one
    global clock, so every stage that moves data costs the slowest link.
    """
    if not link_times:
        return 0
    clock = max(link_times)
    busy = {i + s for i in range(len(link_times)) for s in range(S)}
    return 2 * I * len(busy) * clock


def overlap_bounds(comp, comm) -> tuple[object, object]:
    """Time with phases summed (no overlap) and with perfect overlap."""
    return comp + comm, max(comp, comm)
