import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from paroracle.errors import ZeroMeasured
from paroracle.report import (
    BREAKDOWN_PHASES,
    MeasuredRun,
    compare,
    emit_breakdown,
    enumerate_configs,
    load_breakdown,
    load_measured,
    projection_accuracy,
    raw_accuracy,
    recommend,
)
from paroracle.strategies import Data, Filter, Serial, format_strategy, predict
from paroracle.strategies.predict import check_feasibility

from conftest import flat_system, model, uniform

TOY = "a Conv C=64 F=64 X=2 K=1\nb Conv C=64 F=64 X=2 K=1"
NET = """c1 Conv C=3 F=8 X=16,16 K=3 pad=1 bias=1
r1 ElementWise C=8 X=16,16
c2 Conv C=8 F=8 X=16,16 K=3 pad=1
fc FullyConnected C=8 F=4 X=16,16 bias=1"""


def test_budget_one_is_serial_only():
    rec = recommend(model(NET, D=16, B=4), flat_system(), uniform(), 1)
    assert [format_strategy(c) for c, _ in rec.ranked] == ["serial"]
    assert rec.rejected == ()


def test_recommend_is_deterministic_and_complete():
    m, sys_ = model(NET, D=64, B=8), flat_system(alpha=1e-6, beta=1e-9, memory=2e5)
    a = recommend(m, sys_, uniform(1e-3, 2e-3, 1e-4), 16)
    b = recommend(m, sys_, uniform(1e-3, 2e-3, 1e-4), 16)
    assert a == b
    seen = [format_strategy(c) for c, _ in a.ranked] + [format_strategy(r.config) for r in a.rejected]
    assert sorted(seen) == sorted(format_strategy(c) for c in enumerate_configs(m, 16))
    assert len(seen) == len(set(seen))
    assert a.rejected, "the memory cap should reject something"
    for cfg, pred in a.ranked:
        assert check_feasibility(pred, sys_).feasible
    keys = [(p.total, p.mem_peak, p.p_used, format_strategy(c)) for c, p in a.ranked]
    assert keys == sorted(keys)


def test_dense_enumeration_includes_odd_counts():
    m = model(NET, D=16, B=4)
    assert Data(3) not in enumerate_configs(m, 4)
    assert Data(3) in enumerate_configs(m, 4, dense=True)
    with pytest.raises(ValueError):
        enumerate_configs(m, 0)


def test_toy_ranking_flips_with_batch_size():
    # comm only: sum w = 8192, y = 128 per layer, delta = 4, beta = 1, D = 64
    sys_, prof = flat_system(), uniform(0, 0, 0)
    small = model(TOY, D=64, B=2)  # I = 32
    large = model(TOY, D=64, B=64)  # I = 1
    # data: I * 2(p-1) * delta*sum_w/p
    assert predict(small, sys_, prof, Data(2)).total == 32 * 32768
    assert predict(large, sys_, prof, Data(2)).total == 32768
    # filter: I * (allgather of B*delta*y/p before the last layer + allreduce of B*delta*y after the first)
    f_small = predict(small, sys_, prof, Filter(2)).total
    f_large = predict(large, sys_, prof, Filter(2)).total
    assert f_small == 32 * (2 * 4 * 128 // 2) + 32 * 2 * (2 * 4 * 128 // 2)
    assert f_large == (64 * 4 * 128 // 2) + 2 * (64 * 4 * 128 // 2)
    assert f_small < predict(small, sys_, prof, Data(2)).total
    assert f_large > predict(large, sys_, prof, Data(2)).total


# ---------------------------------------------------------------------------
# accuracy


@pytest.mark.parametrize("pred, measured, expected", [(1.0, 1.0, 1.0), (0.9, 1.0, 0.9), (1.5, 1.0, 0.5)])
def test_projection_accuracy_examples(pred, measured, expected):
    assert projection_accuracy(pred, MeasuredRun(None, 0.0, 0.0, measured)) == expected


def test_accuracy_errors_and_clamping():
    with pytest.raises(ZeroMeasured):
        projection_accuracy(1.0, 0.0)
    assert projection_accuracy(3.5, 1.0) == 0.0
    assert raw_accuracy(3.5, 1.0) == -1.5


@given(m=st.fractions(Fraction(1, 100), 100, max_denominator=1000), d=st.fractions(0, 100, max_denominator=1000))
def test_accuracy_symmetric(m, d):
    over, under = raw_accuracy(m + d, m), raw_accuracy(m - d, m)
    assert over == under
    assert (raw_accuracy(m + d, m) == 1.0) == (d == 0)


def test_compare_examples():
    for pred_total, expected in ((1.0, 1.0), (0.9, 0.9), (1.5, 0.5)):
        cmp = compare({"FB-compute": pred_total}, {"FB-compute": 1.0})
        assert cmp.accuracy == expected


# ---------------------------------------------------------------------------
# breakdown


def _nonzero(pred):
    doc = json.loads(emit_breakdown(pred, "json"))
    return {row["phase"] for row in doc["phases"] if row["per_epoch_s"] != 0}


def test_breakdown_rows():
    m = model(NET, D=64, B=8)
    sys_ = flat_system(alpha=1e-6, beta=1e-9)
    serial = predict(m, sys_, uniform(1e-3, 2e-3, 0), Serial())
    assert _nonzero(serial) == {"FB-compute"}
    data = predict(m, sys_, uniform(1e-3, 2e-3, 0), Data(4))
    assert _nonzero(data) == {"FB-compute", "GE-Allreduce"}
    doc = json.loads(emit_breakdown(data, "json"))
    assert [r["phase"] for r in doc["phases"]] == list(BREAKDOWN_PHASES)


def test_breakdown_bit_stable_and_round_trips():
    m = model(NET, D=64, B=8)
    pred = predict(m, flat_system(alpha=1e-6, beta=1e-9), uniform(1e-3, 2e-3, 1e-5), Filter(4))
    for fmt in ("csv", "json"):
        text = emit_breakdown(pred, fmt)
        again = predict(m, flat_system(alpha=1e-6, beta=1e-9), uniform(1e-3, 2e-3, 1e-5), Filter(4))
        assert emit_breakdown(again, fmt) == text
        rows = load_breakdown(text)
        assert sum(rows.values()) == pytest.approx(pred.per_iteration(pred.total), rel=1e-12)
    table = emit_breakdown(pred, "table", epochs=3)
    assert "s/run" in table and "filter" in table
    with pytest.raises(ValueError):
        emit_breakdown(pred, "xml")


def test_measured_loader():
    with pytest.warns(UserWarning, match="unknown phase"):
        phases, total = load_measured("phase,seconds\nFB-compute,0.5\nGE-Allreduce,0.25\nshuffle,1\n")
    assert phases == {"FB-compute": 0.5, "GE-Allreduce": 0.25} and total is None
    phases, total = load_measured("FB-compute,0.5\ntotal,0.8\n")
    assert total == 0.8
