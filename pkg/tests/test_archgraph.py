import json

import pytest
from hypothesis import given, settings, strategies as st

from phinet import ArchitectureSpec, GraphConstructionError, build_phinet, deserialize_graph, serialize_graph
from phinet.archgraph import (
    GraphParseError,
    bottleneck_filters,
    downsample_schedule,
    expansion_factor,
    round_channels,
    spec_from_document,
    spec_to_document,
)

specs = st.builds(
    ArchitectureSpec,
    width=st.sampled_from([32, 64, 96, 128, 160]),
    height=st.sampled_from([32, 64, 96, 128]),
    alpha=st.sampled_from([0.1, 0.15, 0.2, 0.25, 0.35, 0.5, 0.75, 1.0]),
    num_blocks=st.integers(1, 10),
    beta=st.sampled_from([0.25, 0.5, 1.0, 1.5, 2.0]),
    t_zero=st.sampled_from([1.0, 2.0, 4.0, 6.0, 8.0]),
    num_classes=st.integers(1, 3),
    num_anchors=st.integers(1, 5),
    include_head=st.booleans(),
)


def test_expansion_factor_examples():
    assert expansion_factor(0, 6, 1, 7) == 6.0
    assert expansion_factor(3, 6, 1, 7) == 6.0
    assert expansion_factor(6, 7, 0.5, 7) == pytest.approx(4.0)


def test_expansion_factor_out_of_range():
    with pytest.raises(IndexError):
        expansion_factor(7, 6, 1, 7)
    with pytest.raises(IndexError):
        expansion_factor(-1, 6, 1, 7)


def test_bottleneck_filters_examples():
    sched = downsample_schedule(7)
    assert bottleneck_filters(0, 1.0, sched) == 24
    assert bottleneck_filters(0, 0.25, sched) == 6


def test_bottleneck_filters_doubled_twice():
    # Two doublings past the first bottleneck: round(24 * 0.35 * 4) = 34.
    sched = downsample_schedule(7)
    assert bottleneck_filters(4, 0.35, sched) == 34
    g = build_phinet(ArchitectureSpec(128, 128, 0.35, 7, 1.0, 6.0))
    start, end = g.block_boundaries[4]
    assert g.layers[end - 1].output_shape[2] == 34


def test_round_channels_minimum():
    assert round_channels(0.4) == 2
    assert round_channels(3.5) == 4
    assert round_channels(8.4) == 8


def test_stride_schedule():
    assert downsample_schedule(7) == (1, 0, 1, 0, 1, 0, 1)
    for b in range(1, 12):
        assert sum(downsample_schedule(b)) == 4


def test_tiny_backbone_reaches_stride_32():
    g = build_phinet(ArchitectureSpec(64, 64, 0.1, 1, 1.0, 2.0, include_head=False))
    assert g.backbone_output_shape[:2] == (2, 2)


def test_bad_resolution_rejected():
    with pytest.raises(GraphConstructionError):
        build_phinet(ArchitectureSpec(100, 96, 0.25))
    with pytest.raises(GraphConstructionError):
        build_phinet(ArchitectureSpec(96, 96, 2.5))


@settings(max_examples=60, deadline=None)
@given(specs)
def test_structure_invariants(spec):
    g = build_phinet(spec)
    strided = [l for l in g.layers if l.stride == 2]
    assert len(strided) == 5
    assert g.backbone_output_shape[:2] == (spec.height // 32, spec.width // 32)
    post_neck = (spec.height // 16, spec.width // 16)
    assert g.output_shape[:2] == post_neck
    if spec.include_head:
        assert g.output_shape[2] == spec.num_anchors * (5 + spec.num_classes)
    for i, layer in enumerate(g.layers):
        if layer.skip_source is not None:
            assert -1 <= layer.skip_source < i
        if layer.kind == "add-skip":
            assert layer.input_shapes[0] == layer.input_shapes[1] == layer.output_shape
        if layer.kind == "concat-skip":
            assert layer.input_shapes[0][:2] == layer.input_shapes[1][:2]
        assert layer.macc_count >= 0 and layer.parameter_count >= 0


@settings(max_examples=40, deadline=None)
@given(specs)
def test_beta_one_keeps_t_zero(spec):
    for n in range(spec.num_blocks):
        assert expansion_factor(n, spec.t_zero, 1.0, spec.num_blocks) == spec.t_zero


@settings(max_examples=40, deadline=None)
@given(specs, st.sampled_from([0.05, 0.1, 0.25, 0.5]))
def test_alpha_monotone_channels(spec, bump):
    a = build_phinet(spec)
    b = build_phinet(spec.replace(alpha=min(2.0, spec.alpha + bump)))
    assert len(a.layers) == len(b.layers)
    for la, lb in zip(a.layers, b.layers):
        assert lb.output_shape[2] >= la.output_shape[2]


@settings(max_examples=30, deadline=None)
@given(specs)
def test_more_blocks_more_layers(spec):
    a = build_phinet(spec)
    b = build_phinet(spec.replace(num_blocks=spec.num_blocks + 1))
    assert len(b.layers) >= len(a.layers)


def test_determinism():
    from phinet.archgraph import _build_cached

    # Bypass the cache so two genuinely separate constructions are compared.
    s = ArchitectureSpec(160, 160, 0.3, 7, 1.0, 5.0)
    first, second = _build_cached.__wrapped__(s), _build_cached.__wrapped__(s)
    assert first is not second
    assert first == second
    assert serialize_graph(first) == serialize_graph(second)


@settings(max_examples=40, deadline=None)
@given(specs)
def test_round_trip(spec):
    g = build_phinet(spec)
    assert deserialize_graph(serialize_graph(g)) == g


def test_spec_document_round_trip():
    s = ArchitectureSpec(96, 64, 0.15, 5, 0.5, 3.0, 2, 3, False)
    assert spec_from_document(json.dumps(spec_to_document(s))) == s


def _doc():
    return json.loads(serialize_graph(build_phinet(ArchitectureSpec(64, 64, 0.25, 4, 1.0, 4.0))))


def test_parse_rejects_forward_skip():
    doc = _doc()
    i = next(k for k, l in enumerate(doc["layers"]) if l["kind"] == "concat-skip")
    doc["layers"][i]["skip_source"] = i
    with pytest.raises(GraphParseError) as exc:
        deserialize_graph(json.dumps(doc))
    assert exc.value.layer_index == i


def test_parse_rejects_empty_layers():
    doc = _doc()
    doc["layers"] = []
    with pytest.raises(GraphParseError):
        deserialize_graph(json.dumps(doc))


def test_parse_rejects_tampered_counts():
    doc = _doc()
    doc["layers"][3]["macc_count"] += 1
    with pytest.raises(GraphParseError) as exc:
        deserialize_graph(json.dumps(doc))
    assert exc.value.layer_index == 3


def test_parse_rejects_shape_chain_break():
    doc = _doc()
    doc["layers"][2]["input_shapes"][0][2] += 1
    with pytest.raises(GraphParseError) as exc:
        deserialize_graph(json.dumps(doc))
    assert exc.value.layer_index == 2


def test_parse_rejects_bad_tag_and_kind():
    doc = _doc()
    doc["format"] = "other/2"
    with pytest.raises(GraphParseError):
        deserialize_graph(json.dumps(doc))
    doc = _doc()
    doc["layers"][1]["kind"] = "mystery"
    with pytest.raises(GraphParseError) as exc:
        deserialize_graph(json.dumps(doc))
    assert exc.value.layer_index == 1
    with pytest.raises(GraphParseError):
        deserialize_graph("{not json")
