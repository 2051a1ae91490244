"""Discrete-event and enumeration oracles for the closed-form cost model."""

from .buffers import Buffer, BufferReport, enumerate_buffers
from .collectives import (
    StepEvent,
    ring_events,
    simulate_allreduce,
    simulate_p2p,
    simulate_ring_collective,
    simulate_tree_allreduce,
)
from .compose import simulate_comm
from .halo import brute_force_halo
from .pipeline import ScheduleCell, overlap_bounds, pipeline_schedule, simulate_pipeline_p2p, simulate_pipeline_schedule
from .verify import run_verification

__all__ = [name for name in dir() if not name.startswith("_")]
