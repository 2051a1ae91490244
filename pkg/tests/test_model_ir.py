import pytest
from hypothesis import given
from hypothesis import strategies as st

from paroracle.data_files import data_path
from paroracle.errors import NonPositiveOutput, ParseError, ValidationError
from paroracle.model_ir import (
    LayerDescriptor,
    LayerKind,
    adapt_layer,
    counts_for,
    infer_output_shape,
    layer_counts,
    load_model,
    parse_model,
    serialize_model,
)

from conftest import model


def placements(n, k, s, pad):
    """Count kernel positions on a padded axis by walking it."""
    count, start = 0, 0
    while start + k <= n + 2 * pad:
        count += 1
        start += s
    return count


def conv(C=3, F=64, X=(224, 224), K=(7, 7), stride=(2, 2), pad=(3, 3), bias=False, name="c"):
    return LayerDescriptor(name, LayerKind.CONV, C, F, X, K, stride, pad, bias)


def test_output_shape_examples():
    assert infer_output_shape(conv()) == (112, 112)
    assert infer_output_shape(conv(X=(226, 226), K=(1, 1), stride=(1, 1), pad=(0, 0))) == (226, 226)
    fc = LayerDescriptor("fc", LayerKind.FULLY_CONNECTED, 512, 1000, (7, 7))
    assert infer_output_shape(fc) == (1, 1)


@given(
    n=st.integers(1, 300),
    k=st.integers(1, 11),
    s=st.integers(1, 4),
    pad=st.integers(0, 5),
)
def test_output_shape_matches_placement_count(n, k, s, pad):
    layer_kwargs = dict(X=(n,), K=(k,), stride=(s,), pad=(pad,))
    expected = placements(n, k, s, pad)
    if expected < 1:
        with pytest.raises(NonPositiveOutput):
            infer_output_shape(conv(**layer_kwargs))
    else:
        assert infer_output_shape(conv(**layer_kwargs)) == (expected,)


def test_adapt_fc_relu_pool():
    fc = adapt_layer(LayerDescriptor("fc", LayerKind.FULLY_CONNECTED, 512, 1000, (7, 7)))
    assert fc.kind is LayerKind.CONV and fc.kernel == (7, 7)
    assert counts_for(fc).w_elems == 512 * 1000 * 49

    relu = LayerDescriptor("r", LayerKind.ELEMENT_WISE, 64, 64, (8, 8))
    assert adapt_layer(relu).out_channels == 64
    assert counts_for(relu).w_elems == 0

    pool = LayerDescriptor("p", LayerKind.POOL, 64, 64, (8, 8), (2, 2), (2, 2), has_bias=True)
    c = counts_for(pool)
    assert (c.w_elems, c.bias_elems, c.y_elems) == (0, 0, 64 * 16)


def test_conv_counts():
    c = counts_for(conv(X=(10, 10), K=(3, 3), stride=(1, 1), pad=(1, 1), bias=True))
    assert (c.w_elems, c.bias_elems) == (1728, 64)
    assert c.x_elems == 300 and c.y_elems == 6400


layers = st.sampled_from(
    [
        conv(),
        conv(X=(5, 9), K=(3, 1), stride=(1, 2), pad=(1, 0), bias=True),
        LayerDescriptor("fc", LayerKind.FULLY_CONNECTED, 8, 10, (3, 3), has_bias=True),
        LayerDescriptor("r", LayerKind.ELEMENT_WISE, 4, 4, (6,)),
        LayerDescriptor("n", LayerKind.NORM, 4, 4, (6, 6, 6)),
        LayerDescriptor("p", LayerKind.POOL, 4, 4, (6, 6), (3, 3), (2, 2), (1, 1)),
    ]
)


@given(layers)
def test_adapt_is_idempotent(layer):
    once = adapt_layer(layer)
    assert adapt_layer(once) == once
    assert counts_for(once) == counts_for(adapt_layer(once)) == counts_for(layer)


TOY = """
c1 Conv C=3 F=8 X=16,16 K=3 pad=1 bias=1
r1 ElementWise C=8 X=16,16
p1 Pool C=8 X=16,16 K=2 stride=2
fc FullyConnected C=8 F=10 X=8,8 bias=1
"""


def test_parse_toy_and_chain():
    m = model(TOY)
    assert m.G == 4
    counts = layer_counts(m)
    for a, b in zip(counts, counts[1:]):
        assert a.y_elems == b.x_elems
    assert m.total_weights() == 3 * 8 * 9 + 8 * 10 * 64
    assert m.total_parameters() == m.total_weights() + 8 + 10


def test_minimal_file():
    m = parse_model("dataset D=10 B=2\nc Conv C=1 F=1 X=4 K=3")
    assert m.G == 1 and m.epochs == 1 and m.iterations == 5


def test_round_trip():
    m = model(TOY)
    assert parse_model(serialize_model(m)) == m
    assert serialize_model(parse_model(serialize_model(m))) == serialize_model(m)


def test_bundled_round_trip():
    for name in ("resnet50", "vgg16", "cosmoflow"):
        m = load_model(data_path(f"{name}.model"))
        assert parse_model(serialize_model(m)) == m


def test_batch_larger_than_dataset():
    with pytest.raises(ValidationError):
        parse_model("dataset D=4 B=8\nc Conv C=1 F=1 X=4 K=3")


@pytest.mark.parametrize(
    "text, line, field",
    [
        ("dataset D=4 B=2\nc Conv C=x F=1 X=4 K=3", 2, "C"),
        ("dataset D=4 B=2\nc Blob C=1 F=1 X=4", 2, "kind"),
        ("dataset D=4 B=2\n\n# note\nc Conv F=1 X=4 K=3", 4, "C"),
        ("dataset D=4 B=2\nc Conv C=1 F=1 X=4 K=3 bias=2", 2, "bias"),
    ],
)
def test_parse_errors_carry_location(text, line, field):
    with pytest.raises(ParseError) as info:
        parse_model(text)
    assert info.value.line == line and info.value.field == field


def test_missing_header():
    with pytest.raises(ParseError):
        parse_model("c Conv C=1 F=1 X=4 K=3")


def test_broken_chain():
    with pytest.raises(ValidationError):
        parse_model("dataset D=4 B=2\na Conv C=1 F=2 X=4 K=3\nb Conv C=1 F=1 X=5 K=3")


def test_sources_validate_concat():
    text = """dataset D=4 B=2
a Conv C=1 F=2 X=8 K=3 pad=1
b Conv C=2 F=3 X=8 K=3 pad=1
c Conv C=5 F=1 X=8 K=1 src=b,a
"""
    m = parse_model(text)
    assert m.layers[2].sources == ("b", "a")
    with pytest.raises(ValidationError):
        parse_model(text.replace("C=5", "C=4"))
    with pytest.raises(ValidationError):
        parse_model(text.replace("src=b,a", "src=b,z"))


def test_kernel_larger_than_input():
    with pytest.raises(NonPositiveOutput):
        parse_model("dataset D=4 B=2\nc Conv C=1 F=1 X=4 K=5")


def test_bundled_layer_counts():
    assert load_model(data_path("resnet50.model")).G == 50
    assert load_model(data_path("vgg16.model")).G == 38
    cosmo = load_model(data_path("cosmoflow.model"))
    assert cosmo.G == 20 and cosmo.layers[0].input_shape == (256, 256, 256) and cosmo.layers[0].in_channels == 4
