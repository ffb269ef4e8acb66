"""Reference forward pass over a ComputationGraph.

Weights are synthesized per layer from the seed, so runs are reproducible
without any stored model. The interpreter counts the multiply-accumulates it
actually performs and tracks resident tensor bytes, which makes it an
independent check on the analytic estimator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .graph import ComputationGraph, LayerDescriptor
from .tracker.boxes import Detection, iou

WEIGHT_RANGE = 0.1

# Normalized (width, height) priors; arbitrary pedestrian-like aspect ratios.
DEFAULT_ANCHORS: Tuple[Tuple[float, float], ...] = (
    (0.04, 0.10),
    (0.07, 0.18),
    (0.11, 0.28),
    (0.17, 0.42),
    (0.26, 0.65),
)


class ShapeMismatchError(ValueError):
    def __init__(self, layer_index: int, expected, got):
        self.layer_index = layer_index
        super().__init__(f"layer {layer_index}: expected shape {tuple(expected)}, got {tuple(got)}")


@dataclass
class ExecutionTrace:
    macc_performed: int = 0
    peak_live_bytes: int = 0
    per_layer_macc: List[int] = field(default_factory=list)
    per_layer_output_checksums: List[str] = field(default_factory=list)


def sigmoid(x):
    # exp of a non-positive argument only, so neither tail overflows or cancels.
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def swish(x):
    return x * sigmoid(x)


def _checksum(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes()).hexdigest()[:16]


def _pad_same(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    h, w, _ = x.shape
    pads = []
    for size in (h, w):
        out = -(-size // stride)
        total = max((out - 1) * stride + k - size, 0)
        pads.append((total // 2, total - total // 2))
    return np.pad(x, pads + [(0, 0)])


def _windows(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    """(Ho, Wo, C, k, k) patches under same padding."""
    xp = _pad_same(x, k, stride)
    return sliding_window_view(xp, (k, k), axis=(0, 1))[::stride, ::stride]


class _Weights:
    def __init__(self, seed: int, index: int):
        self.rng = np.random.default_rng([seed, index])

    def __call__(self, *shape):
        return self.rng.uniform(-WEIGHT_RANGE, WEIGHT_RANGE, size=shape)


def _execute(layer: LayerDescriptor, x: np.ndarray, skip: Optional[np.ndarray], wts: _Weights):
    """Run one layer; returns (output, macc performed)."""
    kind = layer.kind
    co = layer.output_shape[2]
    if kind == "standard-conv":
        k = layer.kernel[0]
        patches = _windows(x, k, layer.stride)  # Ho, Wo, Ci, k, k
        ho, wo = patches.shape[:2]
        cols = patches.transpose(0, 1, 3, 4, 2).reshape(ho * wo, -1)
        w = wts(cols.shape[1], co)
        out = (cols @ w + wts(co)).reshape(ho, wo, co)
        macc = cols.shape[0] * cols.shape[1] * w.shape[1]
    elif kind == "depthwise-conv":
        k = layer.kernel[0]
        patches = _windows(x, k, layer.stride)
        w = wts(x.shape[2], k, k)
        out = np.einsum("hwcij,cij->hwc", patches, w) + wts(x.shape[2])
        macc = patches.size
    elif kind in ("pointwise-conv", "detection-head-conv"):
        h, wd, ci = x.shape
        flat = x.reshape(-1, ci)
        w = wts(ci, co)
        out = (flat @ w + wts(co)).reshape(h, wd, co)
        macc = flat.shape[0] * ci * co
    elif kind == "squeeze-excite":
        c, r = x.shape[2], layer.hidden_channels
        pooled = x.mean(axis=(0, 1))
        w1, b1, w2, b2 = wts(c, r), wts(r), wts(r, c), wts(c)
        hidden = swish(pooled @ w1 + b1)
        gate = sigmoid(hidden @ w2 + b2)
        out = x * gate
        macc = x.size + w1.size + w2.size
    elif kind == "global-pool":
        out = x.mean(axis=(0, 1), keepdims=True)
        macc = x.size
    elif kind == "add-skip":
        out = x + skip
        macc = out.size
    elif kind == "concat-skip":
        out = np.concatenate([x, skip], axis=-1)
        macc = 0
    elif kind == "upsample":
        f = layer.output_shape[0] // x.shape[0]
        out = np.repeat(np.repeat(x, f, axis=0), f, axis=1)
        macc = 0
    elif kind == "activation":
        out = swish(x)
        macc = 0
    else:
        raise ValueError(f"unknown layer kind {kind!r}")
    if layer.activation == "swish":
        out = swish(out)
    return out, int(macc)


def run(
    graph: ComputationGraph,
    x: np.ndarray,
    seed: int = 0,
    bytes_per_element: int = 1,
) -> Tuple[np.ndarray, ExecutionTrace]:
    """Execute ``graph`` on a channel-last input tensor."""
    x = np.asarray(x, dtype=float)
    if x.shape != tuple(graph.input_shape):
        raise ShapeMismatchError(0, graph.input_shape, x.shape)
    if not np.all(np.isfinite(x)):
        raise ValueError("input tensor has non-finite values")

    n = len(graph.layers)
    pending = {-1: 0}
    for i in range(n):
        for src in {i - 1, graph.layers[i].skip_source} - {None}:
            pending[src] = pending.get(src, 0) + 1

    store = {-1: x}
    trace = ExecutionTrace()
    for i, layer in enumerate(graph.layers):
        inp = store[i - 1]
        if inp.shape != tuple(layer.input_shapes[0]):
            raise ShapeMismatchError(i, layer.input_shapes[0], inp.shape)
        skip = None
        if layer.skip_source is not None:
            skip = store[layer.skip_source]
            if len(layer.input_shapes) < 2 or skip.shape != tuple(layer.input_shapes[1]):
                expected = layer.input_shapes[1] if len(layer.input_shapes) > 1 else ()
                raise ShapeMismatchError(i, expected, skip.shape)
        out, macc = _execute(layer, inp, skip, _Weights(seed, i))
        if out.shape != tuple(layer.output_shape):
            raise ShapeMismatchError(i, layer.output_shape, out.shape)
        store[i] = out

        live = sum(a.size for a in store.values()) * bytes_per_element
        trace.peak_live_bytes = max(trace.peak_live_bytes, live)
        trace.macc_performed += macc
        trace.per_layer_macc.append(macc)
        trace.per_layer_output_checksums.append(_checksum(out))

        for src in {i - 1, layer.skip_source} - {None}:
            pending[src] -= 1
            if pending[src] == 0 and src != n - 1:
                del store[src]
    return store[n - 1], trace


def random_input(graph: ComputationGraph, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=graph.input_shape)


# --- YOLO-style head decoding ---------------------------------------------


def decode_head(
    head: np.ndarray,
    anchors: Sequence[Tuple[float, float]],
    conf_threshold: float,
    image_size: Tuple[float, float] = (1.0, 1.0),
    frame: int = 0,
) -> List[Detection]:
    """Decode a (H, W, A*(5+C)) head tensor into detections.

    Per anchor the channels are ``tx, ty, tw, th, to`` followed by class
    logits. Anchors are (width, height) fractions of the image; boxes are
    returned in pixels of ``image_size = (width, height)``.
    """
    head = np.asarray(head, dtype=float)
    gh, gw, ch = head.shape
    na = len(anchors)
    if na == 0 or ch % na or ch // na < 6:
        raise ValueError(f"head has {ch} channels, not a multiple of {na} anchors x (5 + classes)")
    per = ch // na
    t = head.reshape(gh, gw, na, per)
    cy, cx = np.meshgrid(np.arange(gh), np.arange(gw), indexing="ij")
    anchors = np.asarray(anchors, dtype=float)

    bx = (sigmoid(t[..., 0]) + cx[..., None]) / gw
    by = (sigmoid(t[..., 1]) + cy[..., None]) / gh
    bw = anchors[:, 0] * np.exp(t[..., 2])
    bh = anchors[:, 1] * np.exp(t[..., 3])
    logits = t[..., 5:]
    probs = np.exp(logits - logits.max(axis=-1, keepdims=True))
    probs /= probs.sum(axis=-1, keepdims=True)
    cls = probs.argmax(axis=-1)
    conf = sigmoid(t[..., 4]) * probs.max(axis=-1)

    img_w, img_h = image_size
    dets = []
    for y, x, a in zip(*np.nonzero(conf > conf_threshold)):
        w, h = bw[y, x, a], bh[y, x, a]
        dets.append(
            Detection(
                frame=frame,
                bbox=(
                    float((bx[y, x, a] - w / 2) * img_w),
                    float((by[y, x, a] - h / 2) * img_h),
                    float(w * img_w),
                    float(h * img_h),
                ),
                confidence=float(conf[y, x, a]),
                class_id=int(cls[y, x, a]),
            )
        )
    return dets


def encode_box(center, size, grid_shape, anchor):
    """Inverse of the decode transform for one box in normalized units.

    Returns ``(cell_y, cell_x, (tx, ty, tw, th))``.
    """
    gh, gw = grid_shape
    gx, gy = center[0] * gw, center[1] * gh
    cx, cy = int(np.floor(gx)), int(np.floor(gy))
    fx, fy = gx - cx, gy - cy
    tx, ty = np.log(fx / (1 - fx)), np.log(fy / (1 - fy))
    tw, th = np.log(size[0] / anchor[0]), np.log(size[1] / anchor[1])
    return cy, cx, (float(tx), float(ty), float(tw), float(th))


def nms(detections: Sequence[Detection], iou_threshold: float = 0.45) -> List[Detection]:
    """Greedy non-maximum suppression, highest confidence first."""
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].confidence, i))
    kept: List[Detection] = []
    for i in order:
        d = detections[i]
        if all(iou(d.bbox, k.bbox) <= iou_threshold for k in kept):
            kept.append(d)
    return kept
