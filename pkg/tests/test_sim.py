import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from paroracle.model_ir import LayerDescriptor, LayerKind
from paroracle.sim import (
    brute_force_halo,
    enumerate_buffers,
    overlap_bounds,
    pipeline_schedule,
    ring_events,
    run_verification,
    simulate_allreduce,
    simulate_comm,
    simulate_pipeline_p2p,
    simulate_pipeline_schedule,
)
from paroracle.sim.collectives import ring_plan, tree_steps
from paroracle.sim.verify import random_instance
from paroracle.cost import CommParams, ceil_log2, t_allreduce
from paroracle.strategies import Filter, PhaseLabel, Serial, predict
from paroracle.strategies.halo import halo_elements, halo_grad_elements
from paroracle.errors import SplitTooFine

from conftest import flat_system, model

F = Fraction


def test_ring_events_elapsed():
    events = ring_events("allreduce", 4, 8, 1, 2)
    assert len(events) == 6
    assert all(ev.elapsed == 1 + ev.bytes * 2 for ev in events)
    assert all(ev.participants == frozenset(range(4)) for ev in events)
    assert ring_events("allreduce", 1, 8, 1, 2) == []


@pytest.mark.parametrize("pattern", ["allreduce", "allgather", "reduce_scatter", "reduce_to_leader"])
@pytest.mark.parametrize("p", [2, 3, 5, 8, 13])
def test_ring_plans_are_checked(pattern, p):
    steps = ring_plan(p, pattern)
    expected = {"allreduce": 2 * (p - 1), "allgather": p - 1, "reduce_scatter": p - 1, "reduce_to_leader": 2 * (p - 1)}
    assert len(steps) == expected[pattern]


def test_tree_steps_count():
    for p in (2, 3, 4, 7, 8, 33, 64):
        for k in (1, 2, 5):
            assert tree_steps(p, k) == 2 * (ceil_log2(p) + k)


@given(p=st.integers(1, 64), m=st.integers(0, 1 << 22), threshold=st.sampled_from([0, 4096, 1 << 20]), k=st.integers(1, 4))
def test_allreduce_dispatch_matches(p, m, threshold, k):
    cp = CommParams(F(1, 10**5), F(1, 10**9), threshold, k)
    assert simulate_allreduce(cp, p, m) == t_allreduce(cp, p, m)


# ---------------------------------------------------------------------------
# pipeline schedule


def test_equal_groups_forward_makespan():
    c = 1
    cells, _ = pipeline_schedule([c, c], [0, 0], 2, 2)
    fwd_end = max(cell.start + cell.duration for cell in cells if cell.kind == "forward")
    assert fwd_end == 3 * c


def test_single_stage_single_segment():
    assert simulate_pipeline_schedule([F(3)], [F(5)], 1, 4, 1) == 4 * (3 + 5)


def test_closed_form_example_matches_schedule():
    # p=2, S=2, FW=BW=1 per group, D=B=4: closed form 4*3/2*2 = 12
    assert simulate_pipeline_schedule([1, 1], [1, 1], 2, 4, 1) == 12


def test_unequal_groups_example():
    sim = simulate_pipeline_schedule([1, 3], [1, 3], 4, 8, 1)
    closed = F(8 * (2 + 4 - 1), 4) * (3 + 3)
    # the event simulation never exceeds the max-stage closed form
    assert sim <= closed


@given(st.lists(st.integers(0, 9), min_size=1, max_size=6), st.integers(1, 8), st.integers(1, 4))
def test_schedule_cells_respect_dependencies(costs, S, b):
    B = S * b
    cells, end = pipeline_schedule(costs, costs, S, B)
    p = len(costs)
    done = {(c.kind, c.pe, c.segment): c.start + c.duration for c in cells}
    for c in cells:
        if c.kind == "forward" and c.pe > 0:
            assert c.start >= done["forward", c.pe - 1, c.segment]
        if c.kind == "backward" and c.pe < p - 1:
            assert c.start >= done["backward", c.pe + 1, c.segment]
        if c.segment > 0:
            assert c.start >= done[c.kind, c.pe, c.segment - 1]
    # one PE runs one cell at a time
    for pe in range(p):
        spans = sorted((c.start, c.start + c.duration) for c in cells if c.pe == pe)
        assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))
    assert end == max(done.values())


@given(st.lists(st.integers(1, 20), min_size=1, max_size=8), st.integers(1, 8))
def test_p2p_clock_matches_closed_form(links, S):
    p = len(links) + 1
    assert simulate_pipeline_p2p(links, S, 3) == 2 * 3 * (p + S - 2) * max(links)


def test_overlap_bounds():
    assert overlap_bounds(3, 5) == (8, 5)


# ---------------------------------------------------------------------------
# halo enumeration


def test_halo_brute_force_examples():
    layer = model("c Conv C=3 F=3 X=226,226 K=3 pad=1", D=4, B=4).layers[0]
    assert brute_force_halo(layer, (2, 1)) == 678
    assert brute_force_halo(layer, (4, 1)) == 1356


@given(
    shape=st.lists(st.integers(4, 30), min_size=1, max_size=3),
    K=st.sampled_from([1, 3, 5, 7]),
    C=st.integers(1, 4),
    Fo=st.integers(1, 4),
    data=st.data(),
)
def test_halo_closed_form_matches_enumeration(shape, K, C, Fo, data):
    d = len(shape)
    split = tuple(data.draw(st.integers(1, 6)) for _ in range(d))
    layer = LayerDescriptor("c", LayerKind.CONV, C, Fo, tuple(shape), (K,) * d, (1,) * d, (K // 2,) * d)
    try:
        closed = halo_elements(layer, split)
    except SplitTooFine:
        return
    assert closed == brute_force_halo(layer, split)
    assert halo_grad_elements(layer, split, check=False) == brute_force_halo(layer, split, grad=True)


# ---------------------------------------------------------------------------
# buffers


def test_buffer_listing_serial_example():
    m = model("c Conv C=2 F=1 X=5 K=50 pad=27 bias=1", D=8, B=8)
    report = enumerate_buffers(m, Serial(), flat_system(delta=4))
    kinds = {b.kind: b.elems for b in report.buffers}
    assert kinds == {"x": 80, "dx": 80, "y": 80, "dy": 80, "w": 100, "dw": 100, "bias": 1}
    assert report.bytes == 2084


def test_filter_halves_only_weights():
    m = model("a Conv C=2 F=4 X=6,6 K=3 pad=1 bias=1", D=8, B=8)
    one = {b.kind: b.elems for b in enumerate_buffers(m, Serial(), flat_system()).buffers}
    two = {b.kind: b.elems for b in enumerate_buffers(m, Filter(2), flat_system()).buffers}
    for kind in one:
        assert two[kind] == (one[kind] / 2 if kind in ("w", "dw") else one[kind])


def test_data_full_split_is_single_sample():
    from paroracle.strategies import Data

    m = model("a Conv C=2 F=4 X=6,6 K=3 pad=1", D=8, B=8)
    bufs = {b.kind: b.elems for b in enumerate_buffers(m, Data(8), flat_system()).buffers}
    assert bufs["x"] == m.counts[0].x_elems and bufs["y"] == m.counts[0].y_elems


def test_simulate_comm_matches_prediction_on_random_instance():
    rng = random.Random(7)
    for _ in range(5):
        inst = random_instance(rng, max_p=16, max_G=12)
        for cfg in inst.configs:
            pred = predict(inst.model, inst.system, inst.profile, cfg)
            if not pred.feasible and any(r.kind.value == "SplitTooFine" for r in pred.verdict.reasons):
                continue
            sim = simulate_comm(inst.model, inst.system, inst.profile, cfg, exact=True)
            for phase in PhaseLabel:
                assert sim[phase] == pred.exact[phase.value], (cfg, phase)


def test_run_verification_small():
    report = run_verification(n=20, seed=3)
    assert report.ok and report.instances == 20 and report.checks > 0
