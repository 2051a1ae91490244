"""Contiguous layer partitioning for layer/pipeline parallelism."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import accumulate
from typing import Sequence

from ..calibration import CalibrationProfile
from ..errors import ValidationError
from ..model_ir import ModelDescriptor
from .config import Groups


def _min_groups(prefix: Sequence, start: int, limit) -> int:
    """Fewest contiguous groups covering layers[start:] with every group cost <= limit."""
    n = len(prefix) - 1
    count, i = 0, start
    while i < n:
        j = i + 1
        if prefix[j] - prefix[i] > limit:
            return n + 1  # a single layer already exceeds the limit
        while j < n and prefix[j + 1] - prefix[i] <= limit:
            j += 1
        count += 1
        i = j
    return count


def balanced_partition(costs: Sequence, p: int) -> Groups:
    """Split ``costs`` into ``p`` contiguous non-empty runs minimising the largest run.

    Among optimal partitions the one with the earliest split points wins.
    """
    if all(isinstance(c, (int, Fraction)) for c in costs):
        # rescale rationals to integers: same comparisons, much cheaper arithmetic
        scale = math.lcm(*(Fraction(c).denominator for c in costs)) if costs else 1
        costs = tuple(int(c * scale) for c in costs)
    return _balanced(tuple(costs), p)


@lru_cache(maxsize=4096)
def _balanced(costs: tuple, p: int) -> Groups:
    n = len(costs)
    if not 1 <= p <= n:
        raise ValidationError(f"cannot split {n} layers into {p} groups")
    if any(c < 0 for c in costs):
        raise ValueError("costs must be >= 0")
    prefix = [0, *accumulate(costs)]
    # best[k][j]: optimal bottleneck for the first j layers in k groups
    inf = float("inf")
    best = [[inf] * (n + 1) for _ in range(p + 1)]
    best[0][0] = 0
    for k in range(1, p + 1):
        for j in range(k, n - (p - k) + 1):
            value = inf
            for i in range(k - 1, j):
                cand = max(best[k - 1][i], prefix[j] - prefix[i])
                if cand < value:
                    value = cand
            best[k][j] = value
    bottleneck = best[p][n]

    groups = []
    start = 0
    for remaining in range(p, 1, -1):
        # earliest end for this group that still lets the rest fit in remaining-1 groups
        for end in range(start + 1, n - remaining + 2):
            if prefix[end] - prefix[start] > bottleneck:
                break
            if _min_groups(prefix, end, bottleneck) <= remaining - 1 <= n - end:
                break
        groups.append((start + 1, end))
        start = end
    groups.append((start + 1, n))
    return tuple(groups)


def layer_costs(model: ModelDescriptor, profile: CalibrationProfile) -> list[Fraction]:
    out = []
    for layer in model.layers:
        t = profile.timing(layer.name)
        out.append(Fraction(t.fw) + Fraction(t.bw))
    return out


def partition_pipeline_balanced(model: ModelDescriptor, profile: CalibrationProfile, p: int) -> Groups:
    return balanced_partition(layer_costs(model, profile), p)
