"""Halo volumes for spatially partitioned convolutions."""

from __future__ import annotations

import math
from typing import Sequence

from ..errors import SplitTooFine
from ..model_ir import LayerDescriptor, adapt_layer, infer_output_shape
from .config import split_axes


def block_extents(n: int, s: int) -> list[int]:
    """Sizes of the ``s`` blocks of an axis of length ``n``.

    The ``n % s`` larger blocks go to indices 1, 2, ..., s-1 and then 0, so an
    interior block is never smaller than an edge block.
    """
    base, extra = divmod(n, s)
    sizes = [base] * s
    order = list(range(1, s)) + [0]
    for i in order[:extra]:
        sizes[i] += 1
    return sizes


def halo_widths(layer: LayerDescriptor) -> tuple[int, ...]:
    """Rows/columns a PE needs from each neighbour: floor(K/2) unless overridden."""
    if layer.halo is not None:
        return tuple(layer.halo)
    adapted = adapt_layer(layer)
    if not adapted.kernel:
        return (0,) * layer.ndim
    return tuple(k // 2 for k in adapted.kernel)


def check_split(shape: Sequence[int], split: Sequence[int], widths: Sequence[int], name: str = "") -> None:
    for axis, (n, s, h) in enumerate(zip(shape, split, widths)):
        if s > 1 and n // s < max(h, 1):
            raise SplitTooFine(
                f"{name}: axis {axis} of extent {n} split {s} ways leaves blocks of {n // s} < halo width {max(h, 1)}"
            )


def _halo(channels: int, shape, split, widths, position: str) -> int:
    local_max = [math.ceil(n / s) for n, s in zip(shape, split)]
    total = 0
    for axis, (s, h) in enumerate(zip(split, widths)):
        if s == 1 or h == 0:
            continue
        neighbours = 2 if position == "interior" and s >= 3 else 1
        others = math.prod(e for b, e in enumerate(local_max) if b != axis)
        total += channels * h * neighbours * others
    return total


def halo_elements(
    layer: LayerDescriptor, split: Sequence[int], position: str = "interior", check: bool = True
) -> int:
    """Input elements per sample a PE receives from its neighbours.

    ``split`` is (pw, ph[, pd]); the returned value is for the worst-placed PE
    (interior on every split axis) unless ``position="edge"``.
    """
    if position not in ("interior", "edge"):
        raise ValueError("position must be 'interior' or 'edge'")
    split = split_axes(tuple(split) + (1,) * (3 - len(split)), layer.ndim)
    widths = halo_widths(layer)
    if check:
        check_split(layer.input_shape, split, widths, layer.name)
    return _halo(layer.in_channels, layer.input_shape, split, widths, position)


def halo_grad_elements(
    layer: LayerDescriptor, split: Sequence[int], position: str = "interior", check: bool = True
) -> int:
    """Same as halo_elements but for dL/dy, which lives on the output shape with F channels."""
    split = split_axes(tuple(split) + (1,) * (3 - len(split)), layer.ndim)
    adapted = adapt_layer(layer)
    out_shape = infer_output_shape(adapted)
    widths = halo_widths(layer)
    if check:
        check_split(out_shape, split, widths, layer.name)
    return _halo(adapted.out_channels, out_shape, split, widths, position)
