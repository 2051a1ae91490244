"""Layer-by-layer CNN description, shape inference and element counts.

Every layer kind is mapped onto the convolution tensor notation
``x[N, C, X]``, ``w[C, F, K]``, ``y[N, F, Y]`` so that one set of cost formulas
covers convolutions, pooling, element-wise, normalization and fully-connected
layers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import NonPositiveOutput, ParseError, ValidationError

TensorShape = tuple[int, ...]


class LayerKind(enum.Enum):
    CONV = "Conv"
    POOL = "Pool"
    FULLY_CONNECTED = "FullyConnected"
    ELEMENT_WISE = "ElementWise"
    NORM = "Norm"


_KIND_ALIASES = {
    "conv": LayerKind.CONV,
    "pool": LayerKind.POOL,
    "fullyconnected": LayerKind.FULLY_CONNECTED,
    "fc": LayerKind.FULLY_CONNECTED,
    "elementwise": LayerKind.ELEMENT_WISE,
    "norm": LayerKind.NORM,
}

# kinds whose output channel count is tied to the input channel count
_CHANNEL_WISE = (LayerKind.POOL, LayerKind.ELEMENT_WISE, LayerKind.NORM)


def _check_shape(name: str, what: str, dims: Sequence[int], allow_empty: bool = False) -> None:
    if not dims:
        if allow_empty:
            return
        raise ValidationError(f"{name}: {what} must not be empty")
    if len(dims) > 3:
        raise ValidationError(f"{name}: {what} has {len(dims)} dims, at most 3 supported")
    if any(int(d) != d or d < 1 for d in dims):
        raise ValidationError(f"{name}: {what} dims must be positive integers, got {tuple(dims)}")


@dataclass(frozen=True)
class LayerDescriptor:
    name: str
    kind: LayerKind
    in_channels: int
    out_channels: int
    input_shape: TensorShape
    kernel: TensorShape = ()
    stride: TensorShape = ()
    padding: TensorShape = ()
    has_bias: bool = False
    # names of earlier layers whose outputs are channel-concatenated into this input
    sources: tuple[str, ...] = ()
    # per-axis halo width override for spatial partitioning
    halo: TensorShape | None = None

    def __post_init__(self) -> None:
        d = len(self.input_shape)
        _check_shape(self.name, "input shape", self.input_shape)
        _check_shape(self.name, "kernel", self.kernel, allow_empty=True)
        if self.kernel and len(self.kernel) != d:
            raise ValidationError(f"{self.name}: kernel rank {len(self.kernel)} != input rank {d}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValidationError(f"{self.name}: channel counts must be >= 1")
        stride = self.stride or (1,) * d
        padding = self.padding or (0,) * d
        if len(stride) != d or len(padding) != d:
            raise ValidationError(f"{self.name}: stride/pad must have one entry per axis")
        if any(s < 1 for s in stride):
            raise ValidationError(f"{self.name}: stride must be >= 1")
        if any(q < 0 for q in padding):
            raise ValidationError(f"{self.name}: padding must be >= 0")
        if self.halo is not None and (len(self.halo) != d or any(h < 0 for h in self.halo)):
            raise ValidationError(f"{self.name}: halo override needs one non-negative width per axis")
        object.__setattr__(self, "stride", tuple(stride))
        object.__setattr__(self, "padding", tuple(padding))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "kernel", tuple(self.kernel))
        if self.kind in (LayerKind.CONV, LayerKind.POOL) and not self.kernel:
            raise ValidationError(f"{self.name}: {self.kind.value} layer needs a kernel")

    @property
    def ndim(self) -> int:
        return len(self.input_shape)


@dataclass(frozen=True)
class LayerCounts:
    x_elems: int
    y_elems: int
    w_elems: int
    bias_elems: int


@dataclass(frozen=True)
class ModelDescriptor:
    layers: tuple[LayerDescriptor, ...]
    dataset_size: int
    batch_size: int
    epochs: int = 1
    name: str = ""
    counts: tuple[LayerCounts, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValidationError("model must contain at least one layer")
        if self.batch_size < 1 or self.epochs < 1 or self.dataset_size < 0:
            raise ValidationError("need B >= 1, E >= 1 and D >= 0")
        # D = 0 is the degenerate empty-dataset case
        if self.dataset_size and self.batch_size > self.dataset_size:
            raise ValidationError(f"batch size B={self.batch_size} exceeds dataset size D={self.dataset_size}")
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ValidationError("layer names must be unique")
        object.__setattr__(self, "counts", tuple(_validated_counts(self.layers)))

    @property
    def G(self) -> int:
        return len(self.layers)

    @property
    def iterations(self) -> Fraction:
        """I = D / B as an exact rational (fractional when B does not divide D)."""
        return Fraction(self.dataset_size, self.batch_size)

    def adapted(self) -> tuple[LayerDescriptor, ...]:
        return tuple(adapt_layer(layer) for layer in self.layers)

    def total_weights(self) -> int:
        return sum(c.w_elems for c in self.counts)

    def total_parameters(self) -> int:
        return sum(c.w_elems + c.bias_elems for c in self.counts)


def infer_output_shape(layer: LayerDescriptor) -> TensorShape:
    if layer.kind is LayerKind.FULLY_CONNECTED:
        return (1,) * layer.ndim
    if not layer.kernel:
        return layer.input_shape
    out = []
    for axis, (n, k, s, pad) in enumerate(zip(layer.input_shape, layer.kernel, layer.stride, layer.padding)):
        extent = (n + 2 * pad - k) // s + 1
        if extent < 1:
            raise NonPositiveOutput(
                f"{layer.name}: axis {axis} output {extent} < 1 (in={n}, K={k}, stride={s}, pad={pad})"
            )
        out.append(extent)
    return tuple(out)


def adapt_layer(layer: LayerDescriptor) -> LayerDescriptor:
    """Rewrite a layer into the unified convolution notation.

    A fully-connected layer becomes a convolution whose filter covers the whole
    input (pad 0, stride 1). Element-wise and normalization layers get F = C and
    no kernel. Pooling keeps its kernel but carries no weights or bias.
    """
    d = layer.ndim
    match layer.kind:
        case LayerKind.FULLY_CONNECTED:
            return replace(
                layer,
                kind=LayerKind.CONV,
                kernel=layer.input_shape,
                stride=(1,) * d,
                padding=(0,) * d,
            )
        case LayerKind.ELEMENT_WISE | LayerKind.NORM:
            return replace(
                layer,
                out_channels=layer.in_channels,
                kernel=(),
                stride=(1,) * d,
                padding=(0,) * d,
                has_bias=False,
            )
        case LayerKind.POOL:
            return replace(layer, out_channels=layer.in_channels, has_bias=False)
        case _:
            return layer


def counts_for(layer: LayerDescriptor) -> LayerCounts:
    adapted = adapt_layer(layer)
    out_shape = infer_output_shape(adapted)
    x = adapted.in_channels * math.prod(adapted.input_shape)
    y = adapted.out_channels * math.prod(out_shape)
    if adapted.kind is LayerKind.CONV:
        w = adapted.in_channels * adapted.out_channels * math.prod(adapted.kernel)
    else:
        w = 0
    bias = adapted.out_channels if adapted.has_bias else 0
    return LayerCounts(x, y, w, bias)


def layer_counts(model: ModelDescriptor) -> list[LayerCounts]:
    return list(model.counts)


def _validated_counts(layers: Sequence[LayerDescriptor]) -> Iterable[LayerCounts]:
    by_name: dict[str, tuple[LayerDescriptor, TensorShape]] = {}
    prev: LayerCounts | None = None
    for i, layer in enumerate(layers):
        adapted = adapt_layer(layer)
        counts = counts_for(layer)
        out_shape = infer_output_shape(adapted)
        if layer.sources:
            _check_sources(layer, by_name)
        elif prev is not None and counts.x_elems != prev.y_elems:
            raise ValidationError(
                f"{layer.name}: input has {counts.x_elems} elements per sample but "
                f"{layers[i - 1].name} produces {prev.y_elems}"
            )
        by_name[layer.name] = (adapted, out_shape)
        prev = counts
        yield counts


def _check_sources(layer: LayerDescriptor, seen: dict[str, tuple[LayerDescriptor, TensorShape]]) -> None:
    channels = 0
    for src in layer.sources:
        if src not in seen:
            raise ValidationError(f"{layer.name}: source {src!r} is not an earlier layer")
        src_layer, src_shape = seen[src]
        if len(src_shape) != layer.ndim or any(s < x for s, x in zip(src_shape, layer.input_shape)):
            raise ValidationError(
                f"{layer.name}: source {src!r} output {src_shape} cannot be resampled to {layer.input_shape}"
            )
        channels += src_layer.out_channels
    if channels != layer.in_channels:
        raise ValidationError(f"{layer.name}: sources provide {channels} channels, layer expects {layer.in_channels}")


# ---------------------------------------------------------------------------
# model file format

def _ints(text: str, line: int, key: str) -> TensorShape:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ParseError(f"expected comma-separated integers, got {text!r}", line, key) from None


def _int(text: str, line: int, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"expected an integer, got {text!r}", line, key) from None


def _broadcast(values: TensorShape, d: int, line: int, key: str) -> TensorShape:
    if len(values) == 1:
        return values * d
    if len(values) != d:
        raise ParseError(f"needs 1 or {d} values, got {len(values)}", line, key)
    return values


def _key_values(tokens: Sequence[str], line: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key or not value:
            raise ParseError(f"expected key=value, got {tok!r}", line)
        if key in out:
            raise ParseError("duplicate key", line, key)
        out[key] = value
    return out


_LAYER_KEYS = {"C", "F", "X", "K", "stride", "pad", "bias", "src", "halo"}


def _parse_layer(tokens: Sequence[str], line: int) -> LayerDescriptor:
    name, kind_text, *rest = tokens
    kind = _KIND_ALIASES.get(kind_text.lower())
    if kind is None:
        raise ParseError(f"unknown layer kind {kind_text!r}", line, "kind")
    kv = _key_values(rest, line)
    unknown = set(kv) - _LAYER_KEYS
    if unknown:
        raise ParseError(f"unknown keys {sorted(unknown)}", line)
    for required in ("C", "X"):
        if required not in kv:
            raise ParseError("missing required key", line, required)
    C = _int(kv["C"], line, "C")
    if "F" in kv:
        F = _int(kv["F"], line, "F")
    elif kind in _CHANNEL_WISE:
        F = C
    else:
        raise ParseError("missing required key", line, "F")
    X = _ints(kv["X"], line, "X")
    d = len(X)
    K_text = kv.get("K", "-")
    K = () if K_text == "-" else _broadcast(_ints(K_text, line, "K"), d, line, "K")
    stride = _broadcast(_ints(kv.get("stride", "1"), line, "stride"), d, line, "stride")
    pad = _broadcast(_ints(kv.get("pad", "0"), line, "pad"), d, line, "pad")
    bias_text = kv.get("bias", "0")
    if bias_text not in ("0", "1"):
        raise ParseError("bias must be 0 or 1", line, "bias")
    sources = tuple(kv["src"].split(",")) if "src" in kv else ()
    halo = _broadcast(_ints(kv["halo"], line, "halo"), d, line, "halo") if "halo" in kv else None
    try:
        return LayerDescriptor(
            name=name,
            kind=kind,
            in_channels=C,
            out_channels=F,
            input_shape=X,
            kernel=K,
            stride=stride,
            padding=pad,
            has_bias=bias_text == "1",
            sources=sources,
            halo=halo,
        )
    except ValidationError as exc:
        raise ValidationError(f"line {line}: {exc}") from None


def parse_model(text: str, name: str = "") -> ModelDescriptor:
    """Parse the line-oriented model file format.

    Raises ParseError for syntax problems (with line/field) and
    ValidationError when the parsed model breaks a descriptor invariant.
    """
    header: dict[str, int] | None = None
    layers: list[LayerDescriptor] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        tokens = content.split()
        if tokens[0] == "model":
            if len(tokens) != 2:
                raise ParseError("expected 'model <name>'", lineno)
            name = tokens[1]
            continue
        if tokens[0] == "dataset":
            if header is not None:
                raise ParseError("duplicate dataset header", lineno)
            kv = _key_values(tokens[1:], lineno)
            missing = {"D", "B"} - set(kv)
            if missing:
                raise ParseError(f"dataset header missing {sorted(missing)}", lineno)
            extra = set(kv) - {"D", "B", "E"}
            if extra:
                raise ParseError(f"unknown dataset keys {sorted(extra)}", lineno)
            header = {k: _int(v, lineno, k) for k, v in kv.items()}
            continue
        if len(tokens) < 2:
            raise ParseError("layer line needs a name and a kind", lineno)
        layers.append(_parse_layer(tokens, lineno))
    if header is None:
        raise ParseError("missing 'dataset D=<int> B=<int> [E=<int>]' header")
    return ModelDescriptor(
        layers=tuple(layers),
        dataset_size=header["D"],
        batch_size=header["B"],
        epochs=header.get("E", 1),
        name=name,
    )


def _fmt(values: Iterable[int]) -> str:
    return ",".join(str(v) for v in values)


def serialize_model(model: ModelDescriptor) -> str:
    """Canonical text form; ``parse_model(serialize_model(m)) == m``."""
    lines = []
    if model.name:
        lines.append(f"model {model.name}")
    lines.append(f"dataset D={model.dataset_size} B={model.batch_size} E={model.epochs}")
    for layer in model.layers:
        parts = [
            layer.name,
            layer.kind.value,
            f"C={layer.in_channels}",
            f"F={layer.out_channels}",
            f"X={_fmt(layer.input_shape)}",
            f"K={_fmt(layer.kernel) if layer.kernel else '-'}",
            f"stride={_fmt(layer.stride)}",
            f"pad={_fmt(layer.padding)}",
            f"bias={int(layer.has_bias)}",
        ]
        if layer.sources:
            parts.append(f"src={','.join(layer.sources)}")
        if layer.halo is not None:
            parts.append(f"halo={_fmt(layer.halo)}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def load_model(path) -> ModelDescriptor:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
