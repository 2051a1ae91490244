"""Closed-form time and memory predictors, one per parallelization strategy.

Every predictor works in exact rationals internally (timings, alpha, beta and
gamma are converted with ``Fraction(float)``, which is lossless) and rounds to
float once at the end. Equal rationals therefore give bit-identical floats,
which is what makes the degenerate reductions (e.g. data parallelism on one
PE versus serial training) exact equalities rather than approximate ones.

Conventions: ``I = D / B`` iterations per epoch; all times are per epoch;
memory is bytes per PE.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

from ..calibration import CalibrationProfile
from ..cost import (
    CommParams,
    SystemDescriptor,
    select_params,
    t_allgather_ring,
    t_allreduce,
    t_allreduce_ring,
    t_p2p,
    t_reduce_to_leader,
)
from ..errors import SplitTooFine, ValidationError
from ..model_ir import LayerKind, ModelDescriptor
from .config import (
    Channel,
    Data,
    DataFilter,
    DataSpatial,
    Filter,
    Groups,
    LayerPure,
    Pipeline,
    Serial,
    Spatial,
    StrategyConfig,
    format_strategy,
    split_axes,
)
from .halo import check_split, halo_elements, halo_grad_elements, halo_widths
from .partition import partition_pipeline_balanced

DEFAULT_DF_PHI = 2


class PhaseLabel(str, enum.Enum):
    GE_ALLREDUCE = "GE-Allreduce"
    FB_ALLGATHER = "FB-Allgather"
    FB_ALLREDUCE = "FB-Allreduce"
    FB_HALO = "FB-Halo"
    FB_P2P = "FB-P2P"


class ReasonKind(str, enum.Enum):
    SCALING_LIMIT = "ScalingLimit"
    MEMORY = "Memory"
    SPLIT_TOO_FINE = "SplitTooFine"


@dataclass(frozen=True)
class Reason:
    kind: ReasonKind
    message: str

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.message}"


@dataclass(frozen=True)
class Verdict:
    feasible: bool
    reasons: tuple[Reason, ...] = ()

    def kinds(self) -> set[ReasonKind]:
        return {r.kind for r in self.reasons}


@dataclass(frozen=True)
class Prediction:
    config: StrategyConfig
    p_used: int
    t_fb: float  # forward+backward compute, s/epoch
    t_wu: float  # weight update, s/epoch
    t_comm: Mapping[PhaseLabel, float]
    mem_peak: float  # bytes per PE
    iterations: Fraction
    pe_limit: int
    issues: tuple[Reason, ...] = ()
    verdict: Verdict | None = None
    # the same quantities as exact rationals, keyed by field / phase name
    exact: Mapping[str, Fraction] = field(default_factory=dict, compare=False, repr=False)

    @property
    def t_comp(self) -> float:
        return float(self.exact["t_fb"] + self.exact["t_wu"]) if self.exact else self.t_fb + self.t_wu

    @property
    def comm_total(self) -> float:
        if self.exact:
            return float(sum(self.exact[ph.value] for ph in PhaseLabel))
        return sum(self.t_comm.values())

    @property
    def total(self) -> float:
        if self.exact:
            return float(self.exact["t_fb"] + self.exact["t_wu"] + sum(self.exact[ph.value] for ph in PhaseLabel))
        return self.t_comp + self.comm_total

    @property
    def feasible(self) -> bool:
        return self.verdict is not None and self.verdict.feasible

    def per_iteration(self, seconds: float) -> float:
        return seconds / float(self.iterations) if self.iterations else 0.0

    @property
    def label(self) -> str:
        return format_strategy(self.config)


# ---------------------------------------------------------------------------
# shared helpers

F = Fraction


def _exact_params(cp: CommParams, phi: int = 1) -> CommParams:
    return CommParams(F(cp.alpha), F(cp.beta_eff) * phi, cp.ring_tree_threshold, cp.tree_chunks)


def comm_params(system: SystemDescriptor, p: int, phi: int | None = None, pattern: str | None = None) -> CommParams:
    """Exact-rational parameters of the tier a p-PE communicator crosses.

    ``phi`` defaults to the system-wide contention coefficient.
    """
    phi = system.contention_phi if phi is None else phi
    return _exact_params(select_params(system, p, 1, pattern), phi)


def df_phi(system: SystemDescriptor, cfg: DataFilter) -> int:
    if cfg.phi is not None:
        return cfg.phi
    # p2 filter groups per node share the inter-node link in the segmented allreduce
    return DEFAULT_DF_PHI if cfg.p2 > 1 else system.contention_phi


class _Ctx:
    def __init__(self, model: ModelDescriptor, system: SystemDescriptor, profile: CalibrationProfile):
        self.model = model
        self.system = system
        self.counts = model.counts
        timings = [profile.timing(layer.name) for layer in model.layers]
        self.fw = [F(t.fw) for t in timings]
        self.bw = [F(t.bw) for t in timings]
        self.wu = [F(t.wu) for t in timings]
        self.D = model.dataset_size
        self.B = model.batch_size
        self.I = model.iterations
        self.G = model.G
        self.delta = system.delta
        self.gamma = F(system.gamma)
        self.sum_fb = sum(self.fw) + sum(self.bw)
        self.sum_wu = sum(self.wu)
        self.sum_w = model.total_weights()

    def memory(self, batch, act_div=1, w_div=1, layers: Sequence[int] | None = None) -> Fraction:
        idx = range(self.G) if layers is None else layers
        total = F(0)
        for i in idx:
            c = self.counts[i]
            total += F(2 * batch * (c.x_elems + c.y_elems)) / act_div + F(2 * c.w_elems, w_div) + c.bias_elems
        return self.gamma * self.delta * total


def _phases(**values) -> dict[PhaseLabel, Fraction]:
    out = {ph: F(0) for ph in PhaseLabel}
    for key, value in values.items():
        out[PhaseLabel[key]] = F(value)
    return out


def _finish(cfg, p, t_fb, t_wu, comm, mem, ctx: _Ctx, limit: int, issues=()) -> Prediction:
    exact = {"t_fb": F(t_fb), "t_wu": F(t_wu), "mem": F(mem)}
    exact.update({ph.value: v for ph, v in comm.items()})
    return Prediction(
        config=cfg,
        p_used=p,
        t_fb=float(t_fb),
        t_wu=float(t_wu),
        t_comm={ph: float(v) for ph, v in comm.items()},
        mem_peak=float(mem),
        iterations=ctx.I,
        pe_limit=limit,
        issues=tuple(issues),
        exact=exact,
    )


def micro_batch(B: int, p: int) -> int:
    """Samples on the busiest PE when B is split p ways."""
    return -(-B // p)


# ---------------------------------------------------------------------------
# scaling limits

def _weighted(model: ModelDescriptor) -> list[int]:
    return [i for i, layer in enumerate(model.layers) if layer.kind in (LayerKind.CONV, LayerKind.FULLY_CONNECTED)]


def filter_limit(model: ModelDescriptor) -> int:
    idx = _weighted(model) or range(model.G)
    return min(model.layers[i].out_channels for i in idx)


def channel_limit(model: ModelDescriptor, start: int = 2) -> int:
    idx = [i for i in _weighted(model) if i >= start - 1] or range(min(start - 1, model.G - 1), model.G)
    return min(model.layers[i].in_channels for i in idx)


def default_spatial_prefix(model: ModelDescriptor) -> int:
    """Leading layers before the first fully-connected layer (at least one)."""
    for i, layer in enumerate(model.layers):
        if layer.kind is LayerKind.FULLY_CONNECTED:
            return max(i, 1)
    return model.G


def spatial_prefix(model: ModelDescriptor, layers: int | None) -> int:
    n = default_spatial_prefix(model) if layers is None else layers
    if not 1 <= n <= model.G:
        raise ValidationError(f"spatial prefix of {n} layers outside 1..{model.G}")
    return n


def spatial_limit(model: ModelDescriptor, layers: int | None = None) -> int:
    n = spatial_prefix(model, layers)
    return min(math.prod(layer.input_shape) for layer in model.layers[:n])


def max_pe_limit(model: ModelDescriptor, kind: str, cfg: StrategyConfig | None = None) -> int:
    """Largest PE count the strategy can use on this model."""
    layers = getattr(cfg, "layers", None)
    match kind:
        case "serial":
            return 1
        case "data":
            return model.batch_size
        case "spatial":
            return spatial_limit(model, layers)
        case "layer" | "pipeline":
            return model.G
        case "filter":
            return filter_limit(model)
        case "channel":
            return channel_limit(model, getattr(cfg, "start", 2))
        case "df":
            return model.batch_size * filter_limit(model)
        case "ds":
            return model.batch_size * spatial_limit(model, layers)
    raise ValueError(f"unknown strategy kind {kind!r}")


# ---------------------------------------------------------------------------
# predictors

def predict_serial(model, system, profile, cfg: Serial = Serial()) -> Prediction:
    ctx = _Ctx(model, system, profile)
    t_fb = ctx.D * ctx.sum_fb
    t_wu = ctx.I * ctx.sum_wu
    return _finish(cfg, 1, t_fb, t_wu, _phases(), ctx.memory(ctx.B), ctx, 1)


def predict_data(model, system, profile, cfg: Data) -> Prediction:
    ctx = _Ctx(model, system, profile)
    p = cfg.p
    mb = micro_batch(ctx.B, p)
    t_fb = ctx.I * mb * ctx.sum_fb
    t_wu = ctx.I * ctx.sum_wu
    ge = ctx.I * t_allreduce(comm_params(system, p), p, ctx.delta * ctx.sum_w)
    mem = ctx.memory(mb)
    return _finish(cfg, p, t_fb, t_wu, _phases(GE_ALLREDUCE=ge), mem, ctx, ctx.B)


def _halo_terms(ctx: _Ctx, prefix: int, split, batch, cp_halo: CommParams, p: int):
    """Per-epoch halo time and any SplitTooFine issues for the spatial prefix."""
    issues = []
    if p == 1:
        return F(0), issues
    total = F(0)
    for layer in ctx.model.layers[:prefix]:
        try:
            check_split(layer.input_shape, split_axes(tuple(split), layer.ndim), halo_widths(layer), layer.name)
            halo_grad_elements(layer, split, check=True)
        except SplitTooFine as exc:
            issues.append(Reason(ReasonKind.SPLIT_TOO_FINE, str(exc)))
        hx = halo_elements(layer, split, check=False)
        hdy = halo_grad_elements(layer, split, check=False)
        total += 2 * cp_halo.alpha + batch * ctx.delta * cp_halo.beta_eff * (hx + hdy)
    return 2 * ctx.I * total, issues


def predict_spatial(model, system, profile, cfg: Spatial) -> Prediction:
    ctx = _Ctx(model, system, profile)
    p = cfg.p
    prefix = spatial_prefix(model, cfg.layers)
    t_fb = ctx.I * ctx.B * ctx.sum_fb / p
    t_wu = ctx.I * ctx.sum_wu
    cp = comm_params(system, p)
    ge = ctx.I * t_allreduce(cp, p, ctx.delta * ctx.sum_w)
    halo, issues = _halo_terms(ctx, prefix, cfg.split, ctx.B, comm_params(system, p, pattern="halo"), p)
    gather = F(0)
    if prefix < ctx.G:
        y = ctx.counts[prefix - 1].y_elems
        gather = ctx.I * t_allgather_ring(cp, p, F(ctx.B * ctx.delta * y, p))
    mem = ctx.memory(ctx.B, act_div=p)
    comm = _phases(GE_ALLREDUCE=ge, FB_HALO=halo, FB_ALLGATHER=gather)
    return _finish(cfg, p, t_fb, t_wu, comm, mem, ctx, spatial_limit(model, cfg.layers), issues)


def resolve_groups(model, profile, p: int, groups: Groups | None) -> Groups:
    if groups is None:
        if p > model.G:
            raise ValidationError(f"cannot split {model.G} layers into {p} groups")
        return partition_pipeline_balanced(model, profile, p)
    if groups[-1][1] != model.G:
        raise ValidationError(f"groups cover layers 1..{groups[-1][1]} but the model has {model.G}")
    return groups


def _group_memory(ctx: _Ctx, groups: Groups) -> Fraction:
    return max(ctx.memory(ctx.B, layers=range(a - 1, b)) for a, b in groups)


def predict_layer_pure(model, system, profile, cfg: LayerPure) -> Prediction:
    ctx = _Ctx(model, system, profile)
    groups = resolve_groups(model, profile, cfg.p, cfg.groups)
    t_fb = ctx.D * ctx.sum_fb
    t_wu = ctx.I * ctx.sum_wu
    p2p = F(0)
    if cfg.p > 1:
        cp = comm_params(system, cfg.p, pattern="p2p")
        p2p = 2 * ctx.I * sum(t_p2p(cp, ctx.delta * ctx.B * ctx.counts[b - 1].y_elems) for _, b in groups[:-1])
    mem = _group_memory(ctx, groups)
    return _finish(cfg, cfg.p, t_fb, t_wu, _phases(FB_P2P=p2p), mem, ctx, ctx.G)


def predict_pipeline(model, system, profile, cfg: Pipeline) -> Prediction:
    ctx = _Ctx(model, system, profile)
    p, S = cfg.p, cfg.S
    groups = resolve_groups(model, profile, p, cfg.groups)
    fw = [sum(ctx.fw[a - 1 : b]) for a, b in groups]
    bw = [sum(ctx.bw[a - 1 : b]) for a, b in groups]
    wu = [sum(ctx.wu[a - 1 : b]) for a, b in groups]
    t_fb = F(ctx.D * (p + S - 1), S) * (max(fw) + max(bw))
    # weight update happens once per iteration on every stage in parallel
    t_wu = ctx.I * max(wu)
    p2p = F(0)
    if p > 1:
        cp = comm_params(system, p, pattern="p2p")
        seg = F(ctx.B, S)
        worst = max(t_p2p(cp, ctx.delta * seg * ctx.counts[b - 1].y_elems) for _, b in groups[:-1])
        p2p = 2 * ctx.I * (p + S - 2) * worst
    issues = []
    if S > ctx.B:
        issues.append(Reason(ReasonKind.SCALING_LIMIT, f"S={S} segments exceed mini-batch B={ctx.B}"))
    mem = _group_memory(ctx, groups)
    return _finish(cfg, p, t_fb, t_wu, _phases(FB_P2P=p2p), mem, ctx, ctx.G, issues)


def _model_parallel_comm(ctx: _Ctx, cp: CommParams, p: int, batch):
    """Per-layer activation allgather and allreduce over every layer but the last."""
    ag = F(0)
    ar = F(0)
    for c in ctx.counts[: ctx.G - 1]:
        ag += t_allgather_ring(cp, p, F(batch * ctx.delta * c.y_elems, p))
        ar += t_allreduce_ring(cp, p, batch * ctx.delta * c.y_elems)
    return ctx.I * ag, ctx.I * ar


def _predict_fc(model, system, profile, cfg, limit: int) -> Prediction:
    ctx = _Ctx(model, system, profile)
    p = cfg.p
    t_fb = ctx.I * ctx.B * ctx.sum_fb / p
    t_wu = ctx.I * ctx.sum_wu / p
    ag, ar = _model_parallel_comm(ctx, comm_params(system, p), p, ctx.B)
    mem = ctx.memory(ctx.B, w_div=p)
    return _finish(cfg, p, t_fb, t_wu, _phases(FB_ALLGATHER=ag, FB_ALLREDUCE=ar), mem, ctx, limit)


def predict_filter(model, system, profile, cfg: Filter) -> Prediction:
    # forward allgathers the F-sharded activations; backward allreduces dL/dx
    return _predict_fc(model, system, profile, cfg, filter_limit(model))


def predict_channel(model, system, profile, cfg: Channel) -> Prediction:
    # forward allreduces partial sums over C; backward allgathers dL/dx.
    # The costs per layer are identical to the filter case.
    return _predict_fc(model, system, profile, cfg, channel_limit(model, cfg.start))


def predict_data_filter(model, system, profile, cfg: DataFilter) -> Prediction:
    ctx = _Ctx(model, system, profile)
    p1, p2, p = cfg.p1, cfg.p2, cfg.p
    mb = micro_batch(ctx.B, p1)
    t_fb = ctx.I * mb * ctx.sum_fb / p2
    t_wu = ctx.I * ctx.sum_wu / p2
    ag, ar = _model_parallel_comm(ctx, comm_params(system, p2), p2, mb)
    cp_inter = comm_params(system, p, phi=df_phi(system, cfg))
    ge = ctx.I * t_allreduce(cp_inter, p1, F(ctx.delta * ctx.sum_w, p2))
    mem = ctx.memory(mb, w_div=p2)
    fmin = filter_limit(model)
    issues = []
    if p1 > ctx.B:
        issues.append(Reason(ReasonKind.SCALING_LIMIT, f"p1={p1} exceeds mini-batch B={ctx.B}"))
    if p2 > fmin:
        issues.append(Reason(ReasonKind.SCALING_LIMIT, f"p2={p2} exceeds min filters {fmin}"))
    comm = _phases(GE_ALLREDUCE=ge, FB_ALLGATHER=ag, FB_ALLREDUCE=ar)
    return _finish(cfg, p, t_fb, t_wu, comm, mem, ctx, ctx.B * fmin, issues)


def predict_data_spatial(model, system, profile, cfg: DataSpatial) -> Prediction:
    ctx = _Ctx(model, system, profile)
    p1, p2, p = cfg.p1, cfg.p2, cfg.p
    prefix = spatial_prefix(model, cfg.layers)
    mb = micro_batch(ctx.B, p1)
    t_fb = ctx.I * mb * ctx.sum_fb / p2
    t_wu = ctx.I * ctx.sum_wu
    cp_intra = comm_params(system, p2)
    halo, issues = _halo_terms(ctx, prefix, cfg.split, mb, comm_params(system, p2, pattern="halo"), p2)
    gather = F(0)
    if prefix < ctx.G:
        y = ctx.counts[prefix - 1].y_elems
        gather = ctx.I * t_allgather_ring(cp_intra, p2, F(mb * ctx.delta * y, p2))
    msg = ctx.delta * ctx.sum_w
    ge = ctx.I * (t_reduce_to_leader(cp_intra, p2, msg) + t_allreduce(comm_params(system, p), p1, msg))
    mem = ctx.memory(mb, act_div=p2)
    smin = spatial_limit(model, cfg.layers)
    if p1 > ctx.B:
        issues.append(Reason(ReasonKind.SCALING_LIMIT, f"p1={p1} exceeds mini-batch B={ctx.B}"))
    if p2 > smin:
        issues.append(Reason(ReasonKind.SCALING_LIMIT, f"p2={p2} exceeds smallest spatial size {smin}"))
    comm = _phases(GE_ALLREDUCE=ge, FB_HALO=halo, FB_ALLGATHER=gather)
    return _finish(cfg, p, t_fb, t_wu, comm, mem, ctx, ctx.B * smin, issues)


_PREDICTORS = {
    "serial": predict_serial,
    "data": predict_data,
    "spatial": predict_spatial,
    "layer": predict_layer_pure,
    "pipeline": predict_pipeline,
    "filter": predict_filter,
    "channel": predict_channel,
    "df": predict_data_filter,
    "ds": predict_data_spatial,
}


def check_feasibility(pred: Prediction, system: SystemDescriptor, memory_cap: float | None = None) -> Verdict:
    """Feasible iff no recorded issue, p within the strategy limit and memory fits (closed bound)."""
    reasons = list(pred.issues)
    if pred.p_used > pred.pe_limit:
        reasons.append(
            Reason(ReasonKind.SCALING_LIMIT, f"p={pred.p_used} exceeds the {pred.config.kind} limit of {pred.pe_limit}")
        )
    cap = system.pe_memory_capacity if memory_cap is None else memory_cap
    if pred.mem_peak > cap:
        reasons.append(Reason(ReasonKind.MEMORY, f"needs {pred.mem_peak:.4g} B per PE, capacity {cap:.4g} B"))
    return Verdict(not reasons, tuple(reasons))


def predict(
    model: ModelDescriptor,
    system: SystemDescriptor,
    profile: CalibrationProfile,
    cfg: StrategyConfig,
    memory_cap: float | None = None,
) -> Prediction:
    """Run the strategy's predictor and attach a feasibility verdict."""
    pred = _PREDICTORS[cfg.kind](model, system, profile, cfg)
    return replace(pred, verdict=check_feasibility(pred, system, memory_cap))
