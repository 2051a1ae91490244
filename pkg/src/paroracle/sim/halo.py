"""Brute-force halo counting: walk every PE and list the remote indices it reads."""

from __future__ import annotations

import itertools
import math
from typing import Sequence

from ..model_ir import LayerDescriptor, adapt_layer, infer_output_shape
from ..strategies.config import split_axes
from ..strategies.halo import block_extents, halo_widths


def _remote(n: int, lo: int, hi: int, h: int) -> int:
    """Indices in the h-wide bands around [lo, hi) that exist but belong to another PE."""
    return sum(1 for i in itertools.chain(range(lo - h, lo), range(hi, hi + h)) if 0 <= i < n)


def enumerate_halo(channels: int, shape: Sequence[int], split: Sequence[int], widths: Sequence[int]) -> int:
    """Largest number of elements any single PE receives (cross stencil, no corners)."""
    bounds = []
    for n, s in zip(shape, split):
        sizes = block_extents(n, s)
        starts = [0, *itertools.accumulate(sizes)]
        bounds.append([(starts[b], starts[b + 1]) for b in range(s)])
    worst = 0
    for pe in itertools.product(*(range(s) for s in split)):
        local = [hi - lo for (lo, hi) in (bounds[a][b] for a, b in enumerate(pe))]
        total = 0
        for a, b in enumerate(pe):
            if split[a] == 1:
                continue
            lo, hi = bounds[a][b]
            others = math.prod(e for j, e in enumerate(local) if j != a)
            total += channels * _remote(shape[a], lo, hi, widths[a]) * others
        worst = max(worst, total)
    return worst


def brute_force_halo(layer: LayerDescriptor, split: Sequence[int], grad: bool = False) -> int:
    split = split_axes(tuple(split) + (1,) * (3 - len(split)), layer.ndim)
    widths = halo_widths(layer)
    if grad:
        adapted = adapt_layer(layer)
        return enumerate_halo(adapted.out_channels, infer_output_shape(adapted), split, widths)
    return enumerate_halo(layer.in_channels, layer.input_shape, split, widths)
