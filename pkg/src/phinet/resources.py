"""Analytic resource accounting: MACC, parameter memory and peak working memory.

Exact figures come from walking a built graph; ``closed_form_wm`` and
``closed_form_params`` are the cheap approximations the tuner uses to pick
``t_zero`` and ``beta`` before verifying against the exact walk.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Tuple

from .graph import ArchitectureSpec, ComputationGraph, LayerDescriptor

# 8-bit quantized weights and activations.
BYTES_PER_ELEMENT = 1


def _elements(shape) -> int:
    h, w, c = shape
    return h * w * c


def count_layer(layer: LayerDescriptor) -> Tuple[int, int]:
    """Return ``(macc, params)`` for a single layer.

    Conv parameter counts include one bias per output channel. Squeeze-excite
    counts the global pool as one accumulate per input element plus two dense
    layers; the channel rescale is a plain multiply and is not counted.
    """
    kind = layer.kind
    ho, wo, co = layer.output_shape
    if kind == "standard-conv":
        kh, kw = layer.kernel
        ci = layer.input_shapes[0][2]
        return kh * kw * ci * co * ho * wo, kh * kw * ci * co + co
    if kind == "depthwise-conv":
        kh, kw = layer.kernel
        return kh * kw * co * ho * wo, kh * kw * co + co
    if kind in ("pointwise-conv", "detection-head-conv"):
        ci = layer.input_shapes[0][2]
        return ci * co * ho * wo, ci * co + co
    if kind == "squeeze-excite":
        r = layer.hidden_channels
        hi, wi, ci = layer.input_shapes[0]
        return hi * wi * ci + 2 * ci * r, ci * r + r + r * ci + ci
    if kind == "global-pool":
        return _elements(layer.input_shapes[0]), 0
    if kind == "add-skip":
        return _elements(layer.output_shape), 0
    if kind in ("upsample", "concat-skip", "activation"):
        return 0, 0
    raise ValueError(f"unknown layer kind {kind!r}")


@dataclass
class ResourceReport:
    macc_total: int
    param_memory: int
    peak_working_memory: int
    # (layer index, macc, params, live bytes while the layer executes)
    per_layer: List[Tuple[int, int, int, int]] = field(default_factory=list)
    bytes_per_element: int = BYTES_PER_ELEMENT

    @property
    def param_count(self) -> int:
        return self.param_memory // self.bytes_per_element

    def to_dict(self) -> dict:
        return {
            "macc_total": self.macc_total,
            "param_memory": self.param_memory,
            "peak_working_memory": self.peak_working_memory,
            "bytes_per_element": self.bytes_per_element,
            "per_layer": [list(row) for row in self.per_layer],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ResourceReport":
        return cls(
            macc_total=int(data["macc_total"]),
            param_memory=int(data["param_memory"]),
            peak_working_memory=int(data["peak_working_memory"]),
            per_layer=[tuple(int(v) for v in row) for row in data.get("per_layer", [])],
            bytes_per_element=int(data.get("bytes_per_element", BYTES_PER_ELEMENT)),
        )

    def to_table(self, graph: ComputationGraph | None = None) -> str:
        head = f"{'idx':>4} {'kind':<20} {'output':>16} {'macc':>12} {'params':>9} {'live_bytes':>11}"
        lines = [head, "-" * len(head)]
        for idx, macc, params, live in self.per_layer:
            kind, shape = "", ""
            if graph is not None:
                kind = graph.layers[idx].kind
                shape = "x".join(str(v) for v in graph.layers[idx].output_shape)
            lines.append(f"{idx:>4} {kind:<20} {shape:>16} {macc:>12} {params:>9} {live:>11}")
        lines.append("-" * len(head))
        lines.append(
            f"total MACC {self.macc_total / 1e6:.2f} M | params {self.param_count / 1e3:.1f} K"
            f" | PM {self.param_memory} B | peak WM {self.peak_working_memory} B"
        )
        return "\n".join(lines)


def liveness(graph: ComputationGraph, bytes_per_element: int = BYTES_PER_ELEMENT) -> List[int]:
    """Live bytes while each layer executes under in-order, unfused execution.

    A tensor is live from the layer that produces it until its last consumer
    has run. While layer i runs, its inputs, its output and every tensor held
    for a later skip connection are resident.
    """
    last = graph.last_use()
    sizes = {-1: _elements(graph.input_shape)}
    resident = sizes[-1]
    out = []
    for i, layer in enumerate(graph.layers):
        sizes[i] = _elements(layer.output_shape)
        resident += sizes[i]
        out.append(resident * bytes_per_element)
        for src in set(graph.input_sources(i)):
            if last.get(src) == i:
                resident -= sizes[src]
    return out


def estimate(graph: ComputationGraph, bytes_per_element: int = BYTES_PER_ELEMENT) -> ResourceReport:
    live = liveness(graph, bytes_per_element)
    rows = []
    macc_total = params_total = 0
    for i, layer in enumerate(graph.layers):
        macc, params = count_layer(layer)
        macc_total += macc
        params_total += params
        rows.append((i, macc, params, live[i]))
    return ResourceReport(
        macc_total=macc_total,
        param_memory=params_total * bytes_per_element,
        peak_working_memory=max(live) if live else 0,
        per_layer=rows,
        bytes_per_element=bytes_per_element,
    )


@lru_cache(maxsize=200_000)
def resource_triple(spec: ArchitectureSpec) -> Tuple[int, int, int]:
    """Cached ``(macc, param_memory, peak_working_memory)`` of the built spec."""
    from .archgraph import build_phinet

    r = estimate(build_phinet(spec))
    return r.macc_total, r.param_memory, r.peak_working_memory


def closed_form_wm(spec: ArchitectureSpec) -> float:
    """Working-memory approximation from the first block's expanded tensors.

    Bytes needed for the expanded input (w/2 x h/2) and the strided depthwise
    output (w/4 x h/4) of block 0, each with ``24 * alpha * t_zero`` channels.
    Skip-connection retention is ignored.
    """
    w, h, a = spec.width, spec.height, spec.alpha
    return (w / 2 * h / 2 * 24 * a + w / 4 * h / 4 * 24 * a) * spec.t_zero


def closed_form_params(base_params: float, beta: float) -> float:
    """Parameter count predicted for shape factor ``beta`` from the beta=1 count."""
    return base_params * (1 + beta) / 2
