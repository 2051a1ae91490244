"""Hockney alpha-beta communication kernels on a tiered network.

All kernels are written against plain arithmetic so they accept ``float``
or ``fractions.Fraction`` inputs; with rationals every result is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ParseError, TierExhausted, ValidationError

DEFAULT_RING_TREE_THRESHOLD = 512 * 1024


@dataclass(frozen=True)
class NetworkTier:
    name: str
    max_pes: int
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if self.max_pes < 1:
            raise ValidationError(f"tier {self.name}: pes must be >= 1")
        if self.alpha < 0:
            raise ValidationError(f"tier {self.name}: alpha must be >= 0")
        if self.beta <= 0:
            raise ValidationError(f"tier {self.name}: beta must be > 0")


@dataclass(frozen=True)
class CommParams:
    alpha: float
    beta_eff: float
    ring_tree_threshold: int = DEFAULT_RING_TREE_THRESHOLD
    tree_chunks: int = 1


@dataclass(frozen=True)
class SystemDescriptor:
    tiers: tuple[NetworkTier, ...]
    pe_memory_capacity: float
    delta: int = 4
    gamma: float = 1.0
    ring_tree_threshold: int = DEFAULT_RING_TREE_THRESHOLD
    tree_chunks: int = 1
    contention_phi: int = 1
    # pattern name ("halo", "p2p") -> (alpha, beta) replacing the tier values
    overrides: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tiers", tuple(self.tiers))
        object.__setattr__(self, "overrides", dict(self.overrides))
        if not self.tiers:
            raise ValidationError("system needs at least one network tier")
        sizes = [t.max_pes for t in self.tiers]
        if any(a >= b for a, b in zip(sizes, sizes[1:])):
            raise ValidationError("tiers must be ordered by strictly increasing pes")
        if self.delta not in (2, 4, 8):
            raise ValidationError(f"delta must be 2, 4 or 8 bytes, got {self.delta}")
        if not 0 < self.gamma <= 1:
            raise ValidationError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.contention_phi < 1 or self.tree_chunks < 1:
            raise ValidationError("contention_phi and tree_chunks must be >= 1")
        if self.ring_tree_threshold < 0 or self.pe_memory_capacity <= 0:
            raise ValidationError("ring_tree_threshold must be >= 0 and memory > 0")
        for name, (a, b) in self.overrides.items():
            if a < 0 or b <= 0:
                raise ValidationError(f"override {name}: need alpha >= 0 and beta > 0")

    @property
    def max_pes(self) -> int:
        return self.tiers[-1].max_pes


def select_params(system: SystemDescriptor, p: int, phi: int = 1, pattern: str | None = None) -> CommParams:
    """Latency/bandwidth of the smallest tier that contains ``p`` PEs.

    The communicator is assumed to be bottlenecked by the outermost tier it
    crosses; ``phi`` flows share that link, so the per-byte time scales by phi.
    A per-pattern override (e.g. MPI halo exchanges) replaces the tier values.
    """
    if p < 1 or phi < 1:
        raise ValueError("p and phi must be >= 1")
    if pattern is not None and pattern in system.overrides:
        alpha, beta = system.overrides[pattern]
    else:
        for tier in system.tiers:
            if tier.max_pes >= p:
                alpha, beta = tier.alpha, tier.beta
                break
        else:
            raise TierExhausted(f"{p} PEs exceed the largest tier ({system.max_pes} PEs)")
    return CommParams(alpha, beta * phi, system.ring_tree_threshold, system.tree_chunks)


def t_p2p(cp: CommParams, m):
    return cp.alpha + m * cp.beta_eff


def t_allreduce_ring(cp: CommParams, p: int, m):
    if p <= 1:
        return 0
    return 2 * (p - 1) * (cp.alpha + m * cp.beta_eff / p)


def t_allgather_ring(cp: CommParams, p: int, m_segment):
    """Ring allgather where every PE contributes ``m_segment`` bytes."""
    if p <= 1:
        return 0
    return (p - 1) * (cp.alpha + m_segment * cp.beta_eff)


def ceil_log2(p: int) -> int:
    return (p - 1).bit_length()


def t_allreduce_tree(cp: CommParams, p: int, m, k: int | None = None):
    """Pipelined binary-tree allreduce with the message cut into k chunks."""
    if p <= 1:
        return 0
    k = cp.tree_chunks if k is None else k
    if k < 1:
        raise ValueError("k must be >= 1")
    return 2 * (ceil_log2(p) + k) * (cp.alpha + m * cp.beta_eff / (2 * k))


def t_allreduce(cp: CommParams, p: int, m):
    # ring owns the boundary: m == threshold goes to the ring
    if m < cp.ring_tree_threshold:
        return t_allreduce_tree(cp, p, m)
    return t_allreduce_ring(cp, p, m)


def t_reduce_to_leader(cp: CommParams, p: int, m):
    """Ring reduce-scatter followed by a ring gather onto one leader PE."""
    if p <= 1:
        return 0
    return 2 * (p - 1) * (cp.alpha + m * cp.beta_eff / p)


# ---------------------------------------------------------------------------
# system file format

def _number(text: str, line: int, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"expected a number, got {text!r}", line, key) from None


def _integer(text: str, line: int, key: str) -> int:
    value = _number(text, line, key)
    if value != int(value):
        raise ParseError(f"expected an integer, got {text!r}", line, key)
    return int(value)


_SETTINGS = {
    "memory": _number,
    "delta": _integer,
    "gamma": _number,
    "ring_tree_threshold": _integer,
    "tree_chunks": _integer,
    "contention_phi": _integer,
}


def _pairs(tokens: Sequence[str], line: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ParseError(f"expected key=value, got {tok!r}", line)
        out[key] = value
    return out


def parse_system(text: str) -> SystemDescriptor:
    tiers: list[NetworkTier] = []
    settings: dict[str, float] = {}
    overrides: dict[str, tuple[float, float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        tokens = content.split()
        if tokens[0] in ("tier", "override"):
            if len(tokens) < 2:
                raise ParseError(f"{tokens[0]} line needs a name", lineno)
            kv = _pairs(tokens[2:], lineno)
            needed = {"alpha", "beta"} | ({"pes"} if tokens[0] == "tier" else set())
            if set(kv) != needed:
                raise ParseError(f"expected keys {sorted(needed)}, got {sorted(kv)}", lineno)
            alpha = _number(kv["alpha"], lineno, "alpha")
            beta = _number(kv["beta"], lineno, "beta")
            if tokens[0] == "tier":
                try:
                    tiers.append(NetworkTier(tokens[1], _integer(kv["pes"], lineno, "pes"), alpha, beta))
                except ValidationError as exc:
                    raise ValidationError(f"line {lineno}: {exc}") from None
            else:
                overrides[tokens[1]] = (alpha, beta)
            continue
        for key, value in _pairs(tokens, lineno).items():
            if key not in _SETTINGS:
                raise ParseError("unknown setting", lineno, key)
            settings[key] = _SETTINGS[key](value, lineno, key)
    if "memory" not in settings:
        raise ParseError("missing memory=<bytes> setting")
    memory = settings.pop("memory")
    return SystemDescriptor(tiers=tuple(tiers), pe_memory_capacity=memory, overrides=overrides, **settings)


def serialize_system(system: SystemDescriptor) -> str:
    lines = [
        f"tier {t.name} pes={t.max_pes} alpha={t.alpha!r} beta={t.beta!r}" for t in system.tiers
    ]
    lines += [f"override {name} alpha={a!r} beta={b!r}" for name, (a, b) in sorted(system.overrides.items())]
    lines.append(
        f"memory={system.pe_memory_capacity!r} delta={system.delta} gamma={system.gamma!r} "
        f"ring_tree_threshold={system.ring_tree_threshold} tree_chunks={system.tree_chunks} "
        f"contention_phi={system.contention_phi}"
    )
    return "\n".join(lines) + "\n"


def load_system(path) -> SystemDescriptor:
    with open(path, encoding="utf-8") as fh:
        return parse_system(fh.read())
