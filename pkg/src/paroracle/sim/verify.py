"""Randomized closed-form versus simulation check, shared by tests and the CLI."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from ..calibration import CalibrationProfile, LayerTiming
from ..cost import NetworkTier, SystemDescriptor
from ..model_ir import LayerDescriptor, LayerKind, ModelDescriptor, adapt_layer, infer_output_shape
from ..strategies import config as sc
from ..strategies.predict import PhaseLabel, ReasonKind, predict
from .buffers import enumerate_buffers
from .compose import simulate_comm


@dataclass(frozen=True)
class Instance:
    model: ModelDescriptor
    system: SystemDescriptor
    profile: CalibrationProfile
    configs: tuple


def random_model(rng: random.Random, G: int) -> ModelDescriptor:
    """A small 2-d CNN-like chain of G layers; the last layer may be fully connected."""
    C = rng.randint(1, 6)
    shape = (rng.randint(6, 24), rng.randint(6, 24))
    layers = []
    for i in range(G):
        name = f"l{i + 1}"
        last = i == G - 1
        roll = rng.random()
        if last and G > 1 and roll < 0.5:
            F = rng.randint(1, 12)
            layer = LayerDescriptor(name, LayerKind.FULLY_CONNECTED, C, F, shape, has_bias=rng.random() < 0.5)
        elif roll < 0.55:
            K = rng.choice((1, 3, 5))
            stride = 2 if min(shape) >= 2 * K + 4 and rng.random() < 0.15 else 1
            F = rng.randint(1, 12)
            layer = LayerDescriptor(
                name, LayerKind.CONV, C, F, shape, kernel=(K, K), stride=(stride,) * 2,
                padding=(K // 2,) * 2, has_bias=rng.random() < 0.5,
            )
        elif roll < 0.7 and min(shape) >= 8:
            layer = LayerDescriptor(name, LayerKind.POOL, C, C, shape, kernel=(2, 2), stride=(2, 2))
        elif roll < 0.85:
            layer = LayerDescriptor(name, LayerKind.ELEMENT_WISE, C, C, shape)
        else:
            layer = LayerDescriptor(name, LayerKind.NORM, C, C, shape, has_bias=False)
        layers.append(layer)
        adapted = adapt_layer(layer)
        shape = infer_output_shape(adapted)
        C = adapted.out_channels
    B = rng.choice((1, 2, 4, 8, 16, 32, 64))
    # D need not be a multiple of B
    D = B * rng.randint(1, 20) + rng.choice((0, rng.randrange(B)))
    return ModelDescriptor(tuple(layers), D, B)


def random_system(rng: random.Random) -> SystemDescriptor:
    tiers = []
    for name, pes in (("node", rng.choice((2, 4, 8))), ("rack", 32), ("fabric", 1024)):
        tiers.append(NetworkTier(name, pes, rng.uniform(0, 2e-5), rng.uniform(1e-11, 1e-9)))
    overrides = {}
    if rng.random() < 0.3:
        overrides["halo"] = (rng.uniform(0, 5e-5), rng.uniform(1e-11, 1e-9))
    if rng.random() < 0.3:
        overrides["p2p"] = (rng.uniform(0, 5e-5), rng.uniform(1e-11, 1e-9))
    return SystemDescriptor(
        tiers=tuple(tiers),
        pe_memory_capacity=16e9,
        delta=rng.choice((2, 4, 8)),
        gamma=rng.choice((1.0, 0.5, 0.75)),
        ring_tree_threshold=rng.choice((0, 4096, 512 * 1024, 10**12)),
        tree_chunks=rng.randint(1, 4),
        contention_phi=rng.choice((1, 1, 2, 3)),
        overrides=overrides,
    )


def random_profile(rng: random.Random, model: ModelDescriptor) -> CalibrationProfile:
    return CalibrationProfile(
        {
            layer.name: LayerTiming(layer.name, rng.uniform(0, 1e-3), rng.uniform(0, 2e-3), rng.uniform(0, 1e-4))
            for layer in model.layers
        }
    )


def _factor(rng: random.Random, p: int) -> tuple[int, int]:
    divisors = [d for d in range(1, p + 1) if p % d == 0]
    a = rng.choice(divisors)
    return a, p // a


def random_configs(rng: random.Random, model: ModelDescriptor, p: int) -> list:
    G = model.G
    p1, p2 = _factor(rng, p)
    pw, ph = _factor(rng, p)
    q1, q2 = _factor(rng, p)
    qw, qh = _factor(rng, q2)
    pl = min(p, G)
    layers = rng.choice((None, rng.randint(1, G)))
    return [
        sc.Serial(),
        sc.Data(p),
        sc.Spatial(pw, ph, layers=layers),
        sc.LayerPure(pl),
        sc.Pipeline(pl, rng.choice((1, 2, 4, 8))),
        sc.Filter(p),
        sc.Channel(p),
        sc.DataFilter(p1, p2, phi=rng.choice((None, None, 1, 3))),
        sc.DataSpatial(q1, qw, qh, layers=layers),
    ]


def random_instance(rng: random.Random, max_p: int = 64, max_G: int = 60) -> Instance:
    model = random_model(rng, rng.randint(1, max_G))
    system = random_system(rng)
    profile = random_profile(rng, model)
    p = rng.randint(1, max_p)
    return Instance(model, system, profile, tuple(random_configs(rng, model, p)))


def close(a, b, rel: float) -> bool:
    if rel == 0:
        return a == b
    return abs(a - b) <= rel * max(abs(a), abs(b)) or a == b


@dataclass
class VerifyReport:
    instances: int = 0
    checks: int = 0
    skipped: int = 0
    mismatches: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.mismatches


def check_instance(inst: Instance, report: VerifyReport, exact: bool = False, rel: float = 1e-9, memory: bool = True) -> None:
    for cfg in inst.configs:
        pred = predict(inst.model, inst.system, inst.profile, cfg)
        if ReasonKind.SPLIT_TOO_FINE in pred.verdict.kinds():
            # the closed form assumes every neighbour block is at least a halo wide
            report.skipped += 1
            continue
        sim = simulate_comm(inst.model, inst.system, inst.profile, cfg, exact=exact)
        for ph in PhaseLabel:
            closed = pred.exact[ph.value] if exact else pred.t_comm[ph]
            report.checks += 1
            if not close(closed, sim[ph], 0 if exact else rel):
                report.mismatches.append((sc.format_strategy(cfg), ph.value, closed, sim[ph]))
        if memory:
            mem = enumerate_buffers(inst.model, cfg, inst.system, inst.profile).bytes
            report.checks += 1
            if mem != pred.exact["mem"]:
                report.mismatches.append((sc.format_strategy(cfg), "memory", pred.exact["mem"], mem))


def run_verification(n: int = 500, seed: int = 0, exact: bool = False, rel: float = 1e-9) -> VerifyReport:
    rng = random.Random(seed)
    report = VerifyReport()
    start = time.perf_counter()
    for _ in range(n):
        inst = random_instance(rng)
        check_instance(inst, report, exact=exact, rel=rel)
        report.instances += 1
    report.seconds = time.perf_counter() - start
    return report

