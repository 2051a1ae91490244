import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from paroracle.calibration import (
    BenchmarkSample,
    CalibrationProfile,
    LayerTiming,
    Pattern,
    features,
    fit_alpha_beta,
    fit_tiers,
    load_benchmarks,
    load_layer_timings,
    load_profile,
)
from paroracle.cost import NetworkTier
from paroracle.data_files import data_path
from paroracle.errors import DegenerateFit, InsufficientSamples, MissingTiming, ParseError
from paroracle.model_ir import load_model


def synthetic(pattern, alpha, beta, ps=(2, 4, 8, 16), ms=(1 << 10, 1 << 16, 1 << 20, 1 << 24)):
    out = []
    for p in ps:
        for m in ms:
            fa, fb = features(pattern, p, m)
            out.append(BenchmarkSample(pattern, p, m, alpha * fa + beta * fb))
    return out


def test_two_point_p2p_fit():
    samples = [BenchmarkSample(Pattern.P2P, 2, 1, 2.0), BenchmarkSample(Pattern.P2P, 2, 3, 4.0)]
    alpha, beta = fit_alpha_beta(samples, "p2p")
    assert alpha == pytest.approx(1.0, rel=1e-12) and beta == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("pattern", list(Pattern))
def test_recovers_known_parameters(pattern):
    alpha, beta = fit_alpha_beta(synthetic(pattern, 5e-6, 1e-10), pattern)
    assert abs(alpha - 5e-6) <= 1e-9 * 5e-6
    assert abs(beta - 1e-10) <= 1e-9 * 1e-10


def test_identical_sizes_are_degenerate():
    samples = [BenchmarkSample(Pattern.P2P, 2, 64, t) for t in (1.0, 1.1, 0.9)]
    with pytest.raises(DegenerateFit):
        fit_alpha_beta(samples, Pattern.P2P)


def test_insufficient_samples():
    with pytest.raises(InsufficientSamples):
        fit_alpha_beta([BenchmarkSample(Pattern.P2P, 2, 64, 1.0)], Pattern.P2P)
    with pytest.raises(InsufficientSamples):
        fit_alpha_beta(synthetic(Pattern.ALLREDUCE, 1e-6, 1e-10), Pattern.ALLREDUCE, (100, 200))


def test_negative_intercept_clamped():
    samples = [BenchmarkSample(Pattern.P2P, 2, m, m * 1e-9 - 1e-7 + 2e-7) for m in (1000, 2000, 4000)]
    samples[0] = BenchmarkSample(Pattern.P2P, 2, 1000, 1e-7)  # pulls the line below zero
    alpha, beta = fit_alpha_beta(samples, Pattern.P2P)
    assert alpha == 0.0 and beta > 0


def test_non_positive_beta_rejected():
    samples = [BenchmarkSample(Pattern.P2P, 2, m, t) for m, t in ((10, 5.0), (20, 4.0), (30, 3.0))]
    with pytest.raises(DegenerateFit):
        fit_alpha_beta(samples, Pattern.P2P)


@given(
    alpha=st.floats(1e-7, 1e-4),
    beta=st.floats(1e-12, 1e-8),
    c=st.floats(1e-3, 1e3),
    pattern=st.sampled_from(list(Pattern)),
)
def test_scale_consistency(alpha, beta, c, pattern):
    samples = synthetic(pattern, alpha, beta)
    a1, b1 = fit_alpha_beta(samples, pattern)
    scaled = [BenchmarkSample(s.pattern, s.p, s.m, s.t * c) for s in samples]
    a2, b2 = fit_alpha_beta(scaled, pattern)
    assert a2 == pytest.approx(c * a1, rel=1e-9)
    assert b2 == pytest.approx(c * b1, rel=1e-9)


@given(alpha=st.floats(1e-7, 1e-4), beta=st.floats(1e-12, 1e-8), pattern=st.sampled_from(list(Pattern)))
def test_round_trip(alpha, beta, pattern):
    a1, b1 = fit_alpha_beta(synthetic(pattern, alpha, beta), pattern)
    a2, b2 = fit_alpha_beta(synthetic(pattern, a1, b1), pattern)
    assert a2 == pytest.approx(a1, rel=1e-9) and b2 == pytest.approx(b1, rel=1e-9)


def test_fit_tiers_by_pe_range():
    samples = synthetic(Pattern.ALLREDUCE, 5e-6, 5e-11, ps=(2, 3, 4)) + synthetic(
        Pattern.ALLREDUCE, 2e-5, 1e-10, ps=(8, 16, 32)
    )
    tiers = fit_tiers(samples, "allreduce", [NetworkTier("node", 4, 1, 1), NetworkTier("net", 64, 1, 1)])
    assert tiers[0].alpha == pytest.approx(5e-6, rel=1e-9) and tiers[1].beta == pytest.approx(1e-10, rel=1e-9)


def test_bundled_benchmarks_fit():
    samples = load_benchmarks(data_path("allreduce_benchmarks.csv").read_text())
    alpha, beta = fit_alpha_beta(samples, "allreduce", (5, 128))
    assert alpha == pytest.approx(1e-5, rel=1e-6) and beta == pytest.approx(8e-11, rel=1e-6)


def test_timings_csv():
    timings = load_layer_timings("layer,fw_s_per_sample,bw_s_per_sample,wu_s_per_iter\nconv1,0.002,0.004,0.0001\n")
    assert timings["conv1"] == LayerTiming("conv1", 0.002, 0.004, 0.0001)
    assert load_layer_timings("") == {}


def test_timings_missing_wu_and_duplicates_warn():
    with pytest.warns(UserWarning, match="no WU"):
        t = load_layer_timings("a,1,2\n")
    assert t["a"].wu == 0.0
    with pytest.warns(UserWarning, match="duplicate"):
        t = load_layer_timings("a,1,2,3\na,4,5,6\n")
    assert t["a"].fw == 4


def test_timings_parse_errors():
    with pytest.raises(ParseError) as info:
        load_layer_timings("a,1,x,3\n")
    assert info.value.line == 1 and info.value.field == "bw_s_per_sample"
    with pytest.raises(ParseError):
        load_layer_timings("a,1\n")
    with pytest.raises(ParseError):
        load_layer_timings("a,-1,1,1\n")


def test_benchmark_parse_errors():
    with pytest.raises(ParseError):
        load_benchmarks("pattern,p,bytes,seconds\nbroadcast,4,10,1\n")
    with pytest.raises(ParseError):
        load_benchmarks("allreduce,1,10,1\n")  # collectives need p >= 2
    with pytest.raises(ParseError):
        load_benchmarks("p2p,2,10,0\n")


def test_profile_default_row_and_coverage():
    prof = CalibrationProfile({"*": LayerTiming("*", 1, 2, 3), "a": LayerTiming("a", 4, 5, 6)})
    assert prof.timing("a").fw == 4 and prof.timing("zzz").wu == 3
    prof.check_covers(["a", "b"])
    strict = CalibrationProfile({"a": LayerTiming("a", 4, 5, 6)})
    with pytest.raises(MissingTiming):
        strict.timing("b")
    with pytest.raises(MissingTiming):
        strict.check_covers(["a", "b"])


def test_bundled_timings_cover_models():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for name in ("resnet50", "vgg16", "cosmoflow"):
            prof = load_profile(data_path(f"{name}.timings.csv"))
            prof.check_covers(layer.name for layer in load_model(data_path(f"{name}.model")).layers)
