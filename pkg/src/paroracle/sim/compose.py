"""Per-strategy communication time assembled from the step simulators.

This mirrors the structure of each strategy (which collectives run, on how
many PEs, with which payload) but takes every collective time from the
simulators and every halo volume from the brute-force counter, so it is an
independent check of the closed forms.
"""

from __future__ import annotations

from fractions import Fraction

from ..calibration import CalibrationProfile
from ..cost import CommParams, SystemDescriptor, select_params
from ..model_ir import ModelDescriptor
from ..strategies.config import StrategyConfig
from ..strategies.predict import (
    PhaseLabel,
    df_phi,
    micro_batch,
    resolve_groups,
    spatial_prefix,
)
from .collectives import simulate_allreduce, simulate_p2p, simulate_ring_collective
from .halo import brute_force_halo
from .pipeline import simulate_pipeline_p2p


def _params(system: SystemDescriptor, p: int, exact: bool, phi: int | None = None, pattern=None) -> CommParams:
    phi = system.contention_phi if phi is None else phi
    cp = select_params(system, p, 1, pattern)
    num = Fraction if exact else float
    return CommParams(num(cp.alpha), num(cp.beta_eff) * phi, cp.ring_tree_threshold, cp.tree_chunks)


def _ring(pattern, cp: CommParams, p, m):
    return simulate_ring_collective(pattern, p, m, cp.alpha, cp.beta_eff)


def simulate_comm(
    model: ModelDescriptor,
    system: SystemDescriptor,
    profile: CalibrationProfile,
    cfg: StrategyConfig,
    exact: bool = False,
) -> dict[PhaseLabel, object]:
    """Per-epoch time of every communication phase, from simulation."""
    num = Fraction if exact else float
    I = model.iterations if exact else float(model.iterations)
    B = model.batch_size
    delta = system.delta
    counts = model.counts
    sum_w = model.total_weights()
    out = {ph: num(0) for ph in PhaseLabel}
    kind = cfg.kind

    def per_layer_fb(p, batch):
        # allgather of F-sharded activations, then ring allreduce of dL/dx
        cp = _params(system, p, exact)
        ag = ar = num(0)
        for c in counts[:-1]:
            ag += _ring("allgather", cp, p, num(batch * delta * c.y_elems) / p)
            ar += _ring("allreduce", cp, p, num(batch * delta * c.y_elems))
        out[PhaseLabel.FB_ALLGATHER] = I * ag
        out[PhaseLabel.FB_ALLREDUCE] = I * ar

    def halo_and_gather(split, p, batch, layers):
        if p == 1:
            return
        prefix = spatial_prefix(model, layers)
        cp = _params(system, p, exact, pattern="halo")
        total = num(0)
        for layer in model.layers[:prefix]:
            # x halo in the forward pass, dL/dy halo in the backward pass
            for volume in (brute_force_halo(layer, split), brute_force_halo(layer, split, grad=True)):
                step = simulate_p2p(num(batch * delta * volume), cp.alpha, cp.beta_eff)
                total += step
        # every exchange is a send plus the matching receive, serialized
        out[PhaseLabel.FB_HALO] = 2 * I * total
        if prefix < model.G:
            cp = _params(system, p, exact)
            y = counts[prefix - 1].y_elems
            out[PhaseLabel.FB_ALLGATHER] = I * _ring("allgather", cp, p, num(batch * delta * y) / p)

    match kind:
        case "serial":
            pass
        case "data":
            out[PhaseLabel.GE_ALLREDUCE] = I * simulate_allreduce(_params(system, cfg.p, exact), cfg.p, num(delta * sum_w))
        case "spatial":
            out[PhaseLabel.GE_ALLREDUCE] = I * simulate_allreduce(_params(system, cfg.p, exact), cfg.p, num(delta * sum_w))
            halo_and_gather(cfg.split, cfg.p, B, cfg.layers)
        case "filter" | "channel":
            per_layer_fb(cfg.p, B)
        case "df":
            mb = micro_batch(B, cfg.p1)
            per_layer_fb(cfg.p2, mb)
            cp = _params(system, cfg.p, exact, phi=df_phi(system, cfg))
            out[PhaseLabel.GE_ALLREDUCE] = I * simulate_allreduce(cp, cfg.p1, num(delta * sum_w) / cfg.p2)
        case "ds":
            mb = micro_batch(B, cfg.p1)
            halo_and_gather(cfg.split, cfg.p2, mb, cfg.layers)
            msg = num(delta * sum_w)
            local = _ring("reduce_to_leader", _params(system, cfg.p2, exact), cfg.p2, msg)
            leaders = simulate_allreduce(_params(system, cfg.p, exact), cfg.p1, msg)
            out[PhaseLabel.GE_ALLREDUCE] = I * (local + leaders)
        case "layer":
            if cfg.p > 1:
                groups = resolve_groups(model, profile, cfg.p, cfg.groups)
                cp = _params(system, cfg.p, exact, pattern="p2p")
                total = num(0)
                for _, last in groups[:-1]:
                    total += simulate_p2p(num(delta * B * counts[last - 1].y_elems), cp.alpha, cp.beta_eff)
                out[PhaseLabel.FB_P2P] = 2 * I * total
        case "pipeline":
            if cfg.p > 1:
                groups = resolve_groups(model, profile, cfg.p, cfg.groups)
                cp = _params(system, cfg.p, exact, pattern="p2p")
                seg = num(B) / cfg.S
                links = [simulate_p2p(delta * seg * counts[last - 1].y_elems, cp.alpha, cp.beta_eff) for _, last in groups[:-1]]
                out[PhaseLabel.FB_P2P] = simulate_pipeline_p2p(links, cfg.S, I)
        case _:
            raise ValueError(f"unknown strategy kind {kind!r}")
    return out
