"""Step-level simulators for ring and tree collectives.

Each simulator builds the explicit send schedule, moves integer payloads
through it to check the schedule really computes the collective, and then
charges every step ``alpha + bytes * beta``. Arithmetic is generic, so
passing Fractions gives exact times.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from ..cost import CommParams, ceil_log2


@dataclass(frozen=True)
class StepEvent:
    step: int
    participants: frozenset[int]
    bytes: object
    elapsed: object


Send = tuple[int, int, int]  # (src, dst, segment)


def _div(a, b):
    # int / int stays rational so exact runs never pick up a float
    if isinstance(a, int) and isinstance(b, int):
        return Fraction(a, b)
    return a / b


@lru_cache(maxsize=None)
def ring_plan(p: int, pattern: str) -> tuple[tuple[Send, ...], ...]:
    """Per-step sends of a ring collective on p PEs, checked on integer data."""
    steps: list[tuple[Send, ...]] = []
    if pattern in ("allreduce", "reduce_scatter", "reduce_to_leader"):
        # reduce-scatter: after p-1 steps PE i owns the sum of segment (i+1) % p
        for s in range(p - 1):
            steps.append(tuple((i, (i + 1) % p, (i - s) % p) for i in range(p)))
    if pattern == "allreduce" or pattern == "allgather":
        # allgather: PE i starts with segment (i+1) % p (after a reduce-scatter),
        # or its own segment i for a plain allgather
        shift = 1 if pattern == "allreduce" else 0
        for s in range(p - 1):
            steps.append(tuple((i, (i + 1) % p, (i + shift - s) % p) for i in range(p)))
    if pattern == "reduce_to_leader":
        # relay the owned segments along the ring to PE 0; PE i forwards at step t
        # the segment that started on PE i - t
        for t in range(p - 1):
            sends = []
            for i in range(1, p):
                origin = i - t
                if origin >= 1:
                    sends.append((i, (i + 1) % p, (origin + 1) % p))
            steps.append(tuple(sends))
    _check_plan(p, pattern, steps)
    return tuple(steps)


def _check_plan(p: int, pattern: str, steps) -> None:
    # every PE holds a vector of p segments; PE i's value for segment j is
    # (i + 1) * 1000 + j so sums are distinguishable
    if pattern == "allgather":
        have = [{i: (i + 1) * 1000 + i} for i in range(p)]
        for sends in steps:
            moved = [(dst, seg, have[src][seg]) for src, dst, seg in sends]
            for dst, seg, value in moved:
                have[dst][seg] = value
        expected = {j: (j + 1) * 1000 + j for j in range(p)}
        assert all(h == expected for h in have), "allgather plan incomplete"
        return
    data = [[(i + 1) * 1000 + j for j in range(p)] for i in range(p)]
    full = [sum((i + 1) * 1000 + j for i in range(p)) for j in range(p)]
    n_rs = p - 1
    for n, sends in enumerate(steps):
        moved = [(dst, seg, data[src][seg]) for src, dst, seg in sends]
        for dst, seg, value in moved:
            if n < n_rs:
                data[dst][seg] += value
            else:
                data[dst][seg] = value
    if pattern == "allreduce":
        assert all(row == full for row in data), "allreduce plan incorrect"
    elif pattern == "reduce_to_leader":
        assert data[0] == full, "reduce-to-leader plan incorrect"
    else:
        assert all(data[i][(i + 1) % p] == full[(i + 1) % p] for i in range(p)), "reduce-scatter plan incorrect"


@lru_cache(maxsize=None)
def _active_steps(p: int, pattern: str) -> tuple[tuple[int, frozenset[int]], ...]:
    plan = ring_plan(p, pattern)
    return tuple((n, frozenset(x for s in sends for x in s[:2])) for n, sends in enumerate(plan) if sends)


def ring_events(pattern: str, p: int, m, alpha, beta) -> list[StepEvent]:
    """Step trace of a ring collective.

    ``m`` is the full message for allreduce / reduce_to_leader and the per-PE
    segment for allgather.
    """
    if p <= 1:
        return []
    seg = m if pattern == "allgather" else _div(m, p)
    return [StepEvent(n, who, seg, alpha + seg * beta) for n, who in _active_steps(p, pattern)]


def simulate_ring_collective(pattern: str, p: int, m, alpha, beta):
    total = 0
    for ev in ring_events(pattern, p, m, alpha, beta):
        total += ev.elapsed
    return total


def _tree(p: int):
    """Tournament tree: PE i with lowest set bit b sends to i - 2**b in round b + 1."""
    level = {}
    children: dict[int, list[int]] = {i: [] for i in range(p)}
    for i in range(1, p):
        b = (i & -i).bit_length() - 1
        level[i] = b + 1
        children[i - (1 << b)].append(i)
    return level, children


@lru_cache(maxsize=None)
def tree_steps(p: int, k: int) -> int:
    """Steps of a round-synchronous pipelined tree allreduce with k chunks.

    Reduce flows up the tournament tree to PE 0 and then one more hop to the
    partner root that owns the other half of the message; the broadcast runs
    the same rounds in reverse. A link carries one chunk per step and a level-j
    sender may not send chunk c before round j + c.
    """
    if p <= 1:
        return 0
    L = ceil_log2(p)
    level, children = _tree(p)
    arrive: dict[tuple[int, int], int] = {}
    covered: dict[tuple[int, int], frozenset[int]] = {}
    for i in sorted(level, key=lambda n: level[n]):
        prev = -1
        for c in range(k):
            ready = max((arrive[ch, c] for ch in children[i]), default=0)
            send = max(level[i] - 1 + c, ready, prev + 1)
            arrive[i, c] = send + 1
            covered[i, c] = frozenset({i}).union(*(covered[ch, c] for ch in children[i]))
            prev = send
    # root -> partner hop, round L + 1
    prev = -1
    partner_has = []
    for c in range(k):
        ready = max((arrive[ch, c] for ch in children[0]), default=0)
        send = max(L + c, ready, prev + 1)
        partner_has.append(send + 1)
        got = frozenset({0}).union(*(covered[ch, c] for ch in children[0]))
        assert got == frozenset(range(p)), "tree reduce missed a PE"
        prev = send
    reduce_end = partner_has[-1]

    # broadcast: partner -> 0 in round 1, then PE 0's level-j children in round L + 2 - j
    recv = {}
    prev = -1
    for c in range(k):
        send = max(c, prev + 1)
        recv[0, c] = send + 1
        prev = send
    order = sorted(level, key=lambda n: -level[n])
    parent = {ch: i for i in children for ch in children[i]}
    for i in order:
        prev = -1
        for c in range(k):
            send = max(L + 1 - level[i] + c, recv[parent[i], c], prev + 1)
            recv[i, c] = send + 1
            prev = send
    bcast_end = max(recv.values())
    return reduce_end + bcast_end


def simulate_tree_allreduce(p: int, m, alpha, beta, k: int = 1):
    if p <= 1:
        return 0
    chunk = _div(m, 2 * k)
    return tree_steps(p, k) * (alpha + chunk * beta)


def simulate_allreduce(cp: CommParams, p: int, m):
    """Dispatch to the tree below the ring/tree threshold, like the closed form."""
    if m < cp.ring_tree_threshold:
        return simulate_tree_allreduce(p, m, cp.alpha, cp.beta_eff, cp.tree_chunks)
    return simulate_ring_collective("allreduce", p, m, cp.alpha, cp.beta_eff)


def simulate_p2p(m, alpha, beta):
    return alpha + m * beta
