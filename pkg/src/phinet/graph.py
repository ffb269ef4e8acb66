"""Core data types shared by the builder, the estimator and the executor."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional, Tuple

Shape = Tuple[int, int, int]  # (H, W, C), channel-last

LAYER_KINDS = (
    "standard-conv",
    "depthwise-conv",
    "pointwise-conv",
    "squeeze-excite",
    "upsample",
    "concat-skip",
    "add-skip",
    "global-pool",
    "activation",
    "detection-head-conv",
)


class GraphConstructionError(ValueError):
    """Raised when an ArchitectureSpec cannot be materialized into a graph."""


@dataclass(frozen=True)
class ArchitectureSpec:
    width: int
    height: int
    alpha: float
    num_blocks: int = 7
    beta: float = 1.0
    t_zero: float = 6.0
    num_classes: int = 1
    num_anchors: int = 5
    include_head: bool = True

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise GraphConstructionError(f"resolution must be positive, got {self.width}x{self.height}")
        if self.width % 32 or self.height % 32:
            raise GraphConstructionError(
                f"resolution {self.width}x{self.height} is not divisible by 32"
            )
        if not 0 < self.alpha <= 2:
            raise GraphConstructionError(f"alpha={self.alpha} outside (0, 2]")
        if not 0 < self.beta <= 2:
            raise GraphConstructionError(f"beta={self.beta} outside (0, 2]")
        if not 1 <= self.t_zero <= 10:
            raise GraphConstructionError(f"t_zero={self.t_zero} outside [1, 10]")
        if self.num_blocks < 1:
            raise GraphConstructionError(f"num_blocks={self.num_blocks} must be >= 1")
        if self.num_classes < 1 or self.num_anchors < 1:
            raise GraphConstructionError("num_classes and num_anchors must be >= 1")

    def replace(self, **changes) -> "ArchitectureSpec":
        data = asdict(self)
        data.update(changes)
        return ArchitectureSpec(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LayerDescriptor:
    """One node of a computation graph.

    The primary input of layer ``i`` is the output of layer ``i - 1`` (or the
    graph input for ``i == 0``); ``skip_source`` names the second input of
    ``add-skip`` and ``concat-skip`` layers (-1 is the graph input). ``activation`` is applied in place
    to the output of conv layers. ``hidden_channels`` is the reduced width of a
    squeeze-excite layer.
    """

    kind: str
    input_shapes: Tuple[Shape, ...]
    output_shape: Shape
    kernel: Optional[Tuple[int, int]] = None
    stride: int = 1
    parameter_count: int = 0
    macc_count: int = 0
    skip_source: Optional[int] = None
    activation: Optional[str] = None
    hidden_channels: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "input_shapes": [list(s) for s in self.input_shapes],
            "output_shape": list(self.output_shape),
            "kernel": list(self.kernel) if self.kernel is not None else None,
            "stride": self.stride,
            "parameter_count": self.parameter_count,
            "macc_count": self.macc_count,
            "skip_source": self.skip_source,
            "activation": self.activation,
            "hidden_channels": self.hidden_channels,
        }


@dataclass(frozen=True)
class ComputationGraph:
    layers: Tuple[LayerDescriptor, ...]
    input_shape: Shape
    output_shape: Shape
    block_boundaries: Tuple[Tuple[int, int], ...]
    spec: Optional[ArchitectureSpec] = None
    # Index of the last backbone layer (output of the final block).
    backbone_end: int = field(default=-1)

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def backbone_output_shape(self) -> Shape:
        idx = self.backbone_end if self.backbone_end >= 0 else len(self.layers) - 1
        return self.layers[idx].output_shape

    def input_sources(self, i: int) -> list[int]:
        """Tensor indices read by layer i; -1 is the graph input."""
        srcs = [i - 1]
        skip = self.layers[i].skip_source
        if skip is not None:
            srcs.append(skip)
        return srcs

    def last_use(self) -> dict[int, int]:
        """Map tensor index (-1 = graph input) to the last layer reading it.

        The graph output is never freed and is absent from the map.
        """
        last: dict[int, int] = {}
        for i in range(len(self.layers)):
            for src in self.input_sources(i):
                last[src] = i
        last.pop(len(self.layers) - 1, None)
        return last
