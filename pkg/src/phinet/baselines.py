"""The seven benchmarked baseline configurations with their reported costs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

from .graph import ArchitectureSpec


@dataclass(frozen=True)
class Baseline:
    spec: ArchitectureSpec
    reported_macc: float
    reported_params: float
    task: str


def _b(res, alpha, t_zero, macc_m, params_k, task):
    return Baseline(ArchitectureSpec(res, res, alpha, 7, 1.0, float(t_zero)), macc_m * 1e6, params_k * 1e3, task)


BASELINE_CONFIGS: Tuple[Baseline, ...] = (
    _b(128, 0.35, 6, 9.85, 61.2, "detection"),
    _b(128, 0.25, 6, 6.08, 37.9, "detection"),
    _b(96, 0.25, 5, 3.01, 31.8, "detection"),
    _b(96, 0.15, 5, 1.23, 14.3, "detection"),
    _b(160, 0.30, 5, 10.42, 39.9, "tracking"),
    _b(160, 0.20, 5, 4.96, 21.6, "tracking"),
    _b(128, 0.20, 5, 3.18, 21.6, "tracking"),
)

# Acceptance bands on the ratio built / reported.
MACC_TOLERANCE = 0.15
PARAM_TOLERANCE = 0.20
