"""Strategy configurations and their string form.

Grammar (keys may appear in any order)::

    serial
    data:p=<n>
    spatial:pw=<n>,ph=<n>[,pd=<n>][,layers=<n>]
    layer:p=<n>[,groups=a-b/c-d/...]
    pipeline:p=<n>,S=<n>[,groups=a-b/c-d/...]
    filter:p=<n>
    channel:p=<n>[,start=<n>]
    df:p1=<n>,p2=<n>[,phi=<n>]
    ds:p1=<n>,pw=<n>,ph=<n>[,pd=<n>][,layers=<n>]

Layer groups are 1-based inclusive ranges. ``layers`` limits spatial
partitioning to the first n layers; ``start`` is the first channel-parallel
layer (1-based).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from ..errors import ParseError, ValidationError

Groups = tuple[tuple[int, int], ...]


def _positive(**values: int | None) -> None:
    for key, value in values.items():
        if value is not None and (int(value) != value or value < 1):
            raise ValidationError(f"{key} must be a positive integer, got {value}")


@dataclass(frozen=True)
class Serial:
    kind = "serial"

    @property
    def p(self) -> int:
        return 1


@dataclass(frozen=True)
class Data:
    p: int
    kind = "data"

    def __post_init__(self) -> None:
        _positive(p=self.p)


@dataclass(frozen=True)
class Spatial:
    pw: int
    ph: int = 1
    pd: int = 1
    layers: int | None = None
    kind = "spatial"

    def __post_init__(self) -> None:
        _positive(pw=self.pw, ph=self.ph, pd=self.pd, layers=self.layers)

    @property
    def split(self) -> tuple[int, int, int]:
        return (self.pw, self.ph, self.pd)

    @property
    def p(self) -> int:
        return self.pw * self.ph * self.pd


def _check_groups(groups: Groups | None, p: int) -> None:
    if groups is None:
        return
    if len(groups) != p:
        raise ValidationError(f"{len(groups)} groups given for p={p}")
    expected = 1
    for first, last in groups:
        if first != expected or last < first:
            raise ValidationError(f"groups must be contiguous, ordered and start at layer 1: {groups}")
        expected = last + 1


@dataclass(frozen=True)
class LayerPure:
    p: int
    groups: Groups | None = None
    kind = "layer"

    def __post_init__(self) -> None:
        _positive(p=self.p)
        _check_groups(self.groups, self.p)


@dataclass(frozen=True)
class Pipeline:
    p: int
    S: int
    groups: Groups | None = None
    kind = "pipeline"

    def __post_init__(self) -> None:
        _positive(p=self.p, S=self.S)
        _check_groups(self.groups, self.p)


@dataclass(frozen=True)
class Filter:
    p: int
    kind = "filter"

    def __post_init__(self) -> None:
        _positive(p=self.p)


@dataclass(frozen=True)
class Channel:
    p: int
    start: int = 2
    kind = "channel"

    def __post_init__(self) -> None:
        _positive(p=self.p, start=self.start)


@dataclass(frozen=True)
class DataFilter:
    p1: int
    p2: int
    phi: int | None = None  # flows sharing a link in the inter-group allreduce
    kind = "df"

    def __post_init__(self) -> None:
        _positive(p1=self.p1, p2=self.p2, phi=self.phi)

    @property
    def p(self) -> int:
        return self.p1 * self.p2


@dataclass(frozen=True)
class DataSpatial:
    p1: int
    pw: int
    ph: int = 1
    pd: int = 1
    layers: int | None = None
    kind = "ds"

    def __post_init__(self) -> None:
        _positive(p1=self.p1, pw=self.pw, ph=self.ph, pd=self.pd, layers=self.layers)

    @property
    def split(self) -> tuple[int, int, int]:
        return (self.pw, self.ph, self.pd)

    @property
    def p2(self) -> int:
        return self.pw * self.ph * self.pd

    @property
    def p(self) -> int:
        return self.p1 * self.p2


StrategyConfig = Union[Serial, Data, Spatial, LayerPure, Pipeline, Filter, Channel, DataFilter, DataSpatial]

_CLASSES = {cls.kind: cls for cls in (Serial, Data, Spatial, LayerPure, Pipeline, Filter, Channel, DataFilter, DataSpatial)}

# key order used by format_strategy, and the set of keys each kind accepts
_KEYS = {
    "serial": (),
    "data": ("p",),
    "spatial": ("pw", "ph", "pd", "layers"),
    "layer": ("p", "groups"),
    "pipeline": ("p", "S", "groups"),
    "filter": ("p",),
    "channel": ("p", "start"),
    "df": ("p1", "p2", "phi"),
    "ds": ("p1", "pw", "ph", "pd", "layers"),
}
_REQUIRED = {
    "data": {"p"},
    "spatial": {"pw"},
    "layer": {"p"},
    "pipeline": {"p", "S"},
    "filter": {"p"},
    "channel": {"p"},
    "df": {"p1", "p2"},
    "ds": {"p1", "pw"},
}


def parse_groups(text: str) -> Groups:
    groups = []
    for part in text.split("/"):
        first, sep, last = part.partition("-")
        try:
            groups.append((int(first), int(last)) if sep else (int(first), int(first)))
        except ValueError:
            raise ParseError(f"bad layer range {part!r}", field="groups") from None
    return tuple(groups)


def format_groups(groups: Groups) -> str:
    return "/".join(f"{a}-{b}" for a, b in groups)


def parse_strategy(text: str) -> StrategyConfig:
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip().lower()
    if kind == "pure":
        kind = "layer"
    if kind not in _CLASSES:
        raise ParseError(f"unknown strategy {kind!r}", field="strategy")
    values: dict[str, object] = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            raise ParseError(f"expected key=value, got {item!r}", field="strategy")
        if key not in _KEYS[kind]:
            raise ParseError(f"{kind} does not take {key!r}", field=key)
        if key in values:
            raise ParseError("duplicate key", field=key)
        if key == "groups":
            values[key] = parse_groups(value)
        else:
            try:
                values[key] = int(value)
            except ValueError:
                raise ParseError(f"expected an integer, got {value!r}", field=key) from None
    missing = _REQUIRED.get(kind, set()) - set(values)
    if missing:
        raise ParseError(f"{kind} needs {sorted(missing)}", field="strategy")
    return _CLASSES[kind](**values)


def format_strategy(cfg: StrategyConfig) -> str:
    parts = []
    for key in _KEYS[cfg.kind]:
        value = getattr(cfg, key)
        if value is None:
            continue
        # drop unsplit trailing axes and defaults to keep strings short
        if key in ("ph", "pd") and value == 1:
            continue
        if key == "start" and value == 2:
            continue
        parts.append(f"{key}={format_groups(value) if key == 'groups' else value}")
    return cfg.kind + (":" + ",".join(parts) if parts else "")


def group_sizes(groups: Groups) -> list[int]:
    return [b - a + 1 for a, b in groups]


def split_axes(split: tuple[int, ...], ndim: int) -> tuple[int, ...]:
    """Trim a (pw, ph, pd) split to ``ndim`` axes, rejecting splits of missing axes."""
    if math.prod(split[ndim:]) != 1:
        raise ValidationError(f"split {split} partitions axes a {ndim}-d sample does not have")
    return tuple(split[:ndim])
