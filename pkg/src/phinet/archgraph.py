"""PhiNet graph construction and (de)serialization.

A PhiNet is a stride-2 stem, ``num_blocks`` inverted residual blocks
(pointwise expand -> depthwise 3x3 -> squeeze-excite -> pointwise project)
and a neck that upsamples the stride-32 features and concatenates them with
the last stride-16 bottleneck. An optional single-scale YOLO head sits on the
stride-16 grid.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache
from typing import List, Optional, Sequence

from .graph import (
    LAYER_KINDS,
    ArchitectureSpec,
    ComputationGraph,
    GraphConstructionError,
    LayerDescriptor,
)
from .resources import count_layer

FORMAT_TAG = "phinet-graph/1"

BASE_FILTERS = 24
NUM_DOWNSAMPLINGS = 5  # stem + 4 in the blocks -> output stride 32
DW_KERNEL = 3
STEM_KERNEL = 3
SE_RATIO = 4
ACTIVATION = "swish"


class GraphParseError(ValueError):
    def __init__(self, message: str, layer_index: Optional[int] = None):
        self.layer_index = layer_index
        where = f"layer {layer_index}: " if layer_index is not None else ""
        super().__init__(where + message)


def round_channels(x: float) -> int:
    """Nearest integer, never below 2."""
    return max(2, int(math.floor(x + 0.5)))


def expansion_factor(block_index: int, t_zero: float, beta: float, num_blocks: int) -> float:
    """Expansion ratio of block ``block_index``, linear in the block index.

    beta=1 keeps every block at t_zero; beta<1 shrinks later blocks.
    """
    if num_blocks < 1:
        raise ValueError("num_blocks must be >= 1")
    if not 0 <= block_index < num_blocks:
        raise IndexError(f"block index {block_index} out of range for {num_blocks} blocks")
    return t_zero * ((beta - 1) * block_index + num_blocks) / num_blocks


@lru_cache(maxsize=None)
def downsample_schedule(num_blocks: int) -> tuple:
    """Number of stride-2 depthwise convs in each block (4 in total).

    With four or more blocks the strided blocks are spread evenly starting at
    block 0 (blocks 0, 2, 4, 6 for B=7). Fewer blocks stack several stride-2
    depthwise convs inside a block, front-loaded.
    """
    n_block_strides = NUM_DOWNSAMPLINGS - 1
    if num_blocks < 1:
        raise ValueError("num_blocks must be >= 1")
    if num_blocks >= n_block_strides:
        sched = [0] * num_blocks
        for i in range(n_block_strides):
            sched[round(i * (num_blocks - 1) / (n_block_strides - 1))] += 1
        return tuple(sched)
    base, extra = divmod(n_block_strides, num_blocks)
    return tuple(base + (1 if i < extra else 0) for i in range(num_blocks))


def bottleneck_filters(block_index: int, alpha: float, downsample_schedule: Sequence[int]) -> int:
    """Projection width of a block: 24*alpha, doubled per later downsampling.

    Block 0 carries the first bottleneck (24*alpha) even though it is strided,
    so doubling counts the downsamplings up to and including this block minus
    that first one.
    """
    if not 0 <= block_index < len(downsample_schedule):
        raise IndexError(f"block index {block_index} out of range")
    d = max(0, sum(downsample_schedule[: block_index + 1]) - 1)
    return round_channels(BASE_FILTERS * alpha * 2**d)


def _same_out(size: int, stride: int) -> int:
    return -(-size // stride)


class _Builder:
    def __init__(self, input_shape):
        self.layers: List[LayerDescriptor] = []
        self.input_shape = input_shape

    @property
    def shape(self):
        return self.layers[-1].output_shape if self.layers else self.input_shape

    def add(self, kind, out_shape, extra_inputs=(), **kw) -> int:
        desc = LayerDescriptor(
            kind=kind,
            input_shapes=(self.shape,) + tuple(extra_inputs),
            output_shape=tuple(out_shape),
            **kw,
        )
        macc, params = count_layer(desc)
        # Counts are derived from the shapes just set; fill them in place.
        object.__setattr__(desc, "macc_count", macc)
        object.__setattr__(desc, "parameter_count", params)
        self.layers.append(desc)
        return len(self.layers) - 1

    def conv(self, kind, channels, kernel, stride, activation):
        h, w, _ = self.shape
        out = (_same_out(h, stride), _same_out(w, stride), channels)
        return self.add(kind, out, kernel=kernel, stride=stride, activation=activation)


def build_phinet(spec: ArchitectureSpec) -> ComputationGraph:
    spec.validate()
    return _build_cached(spec)


@lru_cache(maxsize=4096)
def _build_cached(spec: ArchitectureSpec) -> ComputationGraph:
    B = spec.num_blocks
    sched = downsample_schedule(B)
    b = _Builder((spec.height, spec.width, 3))

    b.conv("standard-conv", round_channels(BASE_FILTERS * spec.alpha), (STEM_KERNEL, STEM_KERNEL), 2, ACTIVATION)

    boundaries = []
    block_outputs = []
    for n in range(B):
        start = len(b.layers)
        in_idx = start - 1
        c_in = b.shape[2]
        t = expansion_factor(n, spec.t_zero, spec.beta, B)
        expanded = round_channels(c_in * t)
        filters = bottleneck_filters(n, spec.alpha, sched)

        b.conv("pointwise-conv", expanded, (1, 1), 1, ACTIVATION)
        b.conv("depthwise-conv", expanded, (DW_KERNEL, DW_KERNEL), 2 if sched[n] else 1, ACTIVATION)
        for _ in range(sched[n] - 1):
            b.conv("depthwise-conv", expanded, (DW_KERNEL, DW_KERNEL), 2, ACTIVATION)
        b.add("squeeze-excite", b.shape, hidden_channels=round_channels(c_in / SE_RATIO))
        b.conv("pointwise-conv", filters, (1, 1), 1, None)
        if sched[n] == 0 and filters == c_in:
            b.add("add-skip", b.shape, extra_inputs=(b.layers[in_idx].output_shape,), skip_source=in_idx)
        boundaries.append((start, len(b.layers)))
        block_outputs.append(len(b.layers) - 1)

    backbone_end = len(b.layers) - 1
    h32, w32, c32 = b.shape
    if (h32, w32) != (spec.height // 32, spec.width // 32):
        raise GraphConstructionError(f"backbone output {h32}x{w32} is not input/32")

    # Neck: 2x nearest upsample + concat with the latest stride-16 tensor,
    # preferring a block output.
    target = (2 * h32, 2 * w32)
    skip = next((i for i in reversed(block_outputs) if b.layers[i].output_shape[:2] == target), None)
    if skip is None:
        skip = next(i for i in range(len(b.layers) - 1, -1, -1) if b.layers[i].output_shape[:2] == target)
    b.add("upsample", (2 * h32, 2 * w32, c32), stride=1)
    skip_shape = b.layers[skip].output_shape
    b.add("concat-skip", (2 * h32, 2 * w32, c32 + skip_shape[2]), extra_inputs=(skip_shape,), skip_source=skip)

    if spec.include_head:
        b.conv("detection-head-conv", spec.num_anchors * (5 + spec.num_classes), (1, 1), 1, None)

    return ComputationGraph(
        layers=tuple(b.layers),
        input_shape=b.input_shape,
        output_shape=b.shape,
        block_boundaries=tuple(boundaries),
        spec=spec,
        backbone_end=backbone_end,
    )


# --- serialization -------------------------------------------------------


def spec_to_document(spec: ArchitectureSpec) -> dict:
    return {"format": FORMAT_TAG, "document": "spec", "spec": spec.to_dict()}


def spec_from_document(doc: dict | str) -> ArchitectureSpec:
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise GraphParseError(f"invalid JSON: {exc}") from exc
    if doc.get("format") != FORMAT_TAG:
        raise GraphParseError(f"unsupported format tag {doc.get('format')!r}")
    body = doc.get("spec", doc)
    try:
        return ArchitectureSpec(
            width=int(body["width"]),
            height=int(body["height"]),
            alpha=float(body["alpha"]),
            num_blocks=int(body["num_blocks"]),
            beta=float(body["beta"]),
            t_zero=float(body["t_zero"]),
            num_classes=int(body.get("num_classes", 1)),
            num_anchors=int(body.get("num_anchors", 5)),
            include_head=bool(body.get("include_head", True)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphParseError(f"bad spec field: {exc}") from exc


def serialize_graph(graph: ComputationGraph) -> str:
    doc = {
        "format": FORMAT_TAG,
        "document": "graph",
        "spec": graph.spec.to_dict() if graph.spec is not None else None,
        "input_shape": list(graph.input_shape),
        "output_shape": list(graph.output_shape),
        "block_boundaries": [list(r) for r in graph.block_boundaries],
        "backbone_end": graph.backbone_end,
        "layers": [layer.to_dict() for layer in graph.layers],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def _shape(value, idx, name):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise GraphParseError(f"{name} must be a 3-element shape", idx)
    try:
        shape = tuple(int(v) for v in value)
    except (TypeError, ValueError):
        raise GraphParseError(f"{name} has non-integer entries", idx) from None
    if any(v <= 0 for v in shape):
        raise GraphParseError(f"{name} has non-positive entries", idx)
    return shape


def _parse_layer(raw: dict, idx: int) -> LayerDescriptor:
    if not isinstance(raw, dict):
        raise GraphParseError("layer entry is not a mapping", idx)
    kind = raw.get("kind")
    if kind not in LAYER_KINDS:
        raise GraphParseError(f"unknown layer kind {kind!r}", idx)
    inputs = raw.get("input_shapes")
    if not isinstance(inputs, list) or not inputs:
        raise GraphParseError("input_shapes must be a non-empty list", idx)
    skip = raw.get("skip_source")
    if skip is not None:
        if not isinstance(skip, int) or skip >= idx or skip < -1:
            raise GraphParseError(f"skip_source {skip!r} must precede layer {idx}", idx)
    kernel = raw.get("kernel")
    try:
        layer = LayerDescriptor(
            kind=kind,
            input_shapes=tuple(_shape(s, idx, "input shape") for s in inputs),
            output_shape=_shape(raw.get("output_shape"), idx, "output_shape"),
            kernel=tuple(int(k) for k in kernel) if kernel is not None else None,
            stride=int(raw.get("stride", 1)),
            parameter_count=int(raw.get("parameter_count", 0)),
            macc_count=int(raw.get("macc_count", 0)),
            skip_source=skip,
            activation=raw.get("activation"),
            hidden_channels=raw.get("hidden_channels"),
        )
        macc, params = count_layer(layer)
    except GraphParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise GraphParseError(str(exc), idx) from exc
    if (macc, params) != (layer.macc_count, layer.parameter_count):
        raise GraphParseError(
            f"counts ({layer.macc_count}, {layer.parameter_count}) disagree with shapes ({macc}, {params})", idx
        )
    return layer


def deserialize_graph(document: str) -> ComputationGraph:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise GraphParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        raise GraphParseError("missing or unsupported format tag")
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise GraphParseError("graph has no layers")
    input_shape = _shape(doc.get("input_shape"), None, "input_shape")
    layers = []
    prev = input_shape
    for idx, raw in enumerate(raw_layers):
        layer = _parse_layer(raw, idx)
        if layer.input_shapes[0] != prev:
            raise GraphParseError(f"input shape {layer.input_shapes[0]} does not match producer {prev}", idx)
        if layer.skip_source is not None:
            src = input_shape if layer.skip_source == -1 else layers[layer.skip_source].output_shape
            if len(layer.input_shapes) < 2 or layer.input_shapes[1] != src:
                raise GraphParseError("skip input shape does not match its source", idx)
        layers.append(layer)
        prev = layer.output_shape
    output_shape = _shape(doc.get("output_shape"), None, "output_shape")
    if output_shape != prev:
        raise GraphParseError("output_shape does not match the last layer")
    spec = spec_from_document({"format": FORMAT_TAG, "spec": doc["spec"]}) if doc.get("spec") else None
    return ComputationGraph(
        layers=tuple(layers),
        input_shape=input_shape,
        output_shape=output_shape,
        block_boundaries=tuple(tuple(int(v) for v in r) for r in doc.get("block_boundaries", [])),
        spec=spec,
        backbone_end=int(doc.get("backbone_end", -1)),
    )
