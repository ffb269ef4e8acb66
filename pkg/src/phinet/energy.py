"""Per-inference energy, average power at a frame rate, and solar endurance.

Energy is modelled as proportional to MACC count (mJ per million MACC); the
coefficient and idle floor are configurable. Measured current traces can be
integrated directly instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np


@dataclass(frozen=True)
class EnergyModel:
    mj_per_mmacc: float = 1.2
    idle_power_mw: float = 0.0
    supply_voltage: float = 1.8  # informational; used by trace integration

    def __post_init__(self):
        if self.mj_per_mmacc <= 0:
            raise ValueError("mj_per_mmacc must be positive")
        if self.idle_power_mw < 0:
            raise ValueError("idle_power_mw must be non-negative")


@dataclass(frozen=True)
class CurrentTrace:
    samples_ma: Sequence[float]
    sample_period_s: float = 10e-6


def energy_per_inference(macc: float, model: EnergyModel = EnergyModel()) -> float:
    """Energy in mJ for one inference of ``macc`` multiply-accumulates."""
    if macc <= 0:
        raise ValueError("macc must be positive")
    return macc / 1e6 * model.mj_per_mmacc


def integrate_trace(trace: CurrentTrace, v_dd: float = 1.8) -> float:
    """Energy in mJ from sampled current: V * sum(I) * t_s.

    mA * V * s = mJ, so no unit scaling is needed.
    """
    samples = np.asarray(trace.samples_ma, dtype=float)
    if samples.size == 0:
        raise ValueError("empty current trace")
    if not np.all(np.isfinite(samples)) or np.any(samples < 0):
        raise ValueError("current samples must be finite and non-negative")
    return float(v_dd * samples.sum() * trace.sample_period_s)


def power_at_fps(energy_mj: float, fps: float, model: EnergyModel = EnergyModel()) -> float:
    """Average power in mW when running one inference per frame."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    return energy_mj * fps + model.idle_power_mw


def solar_endurance(panel_peak_mw: float, efficiency: float, charge_hours: float, load_mw: float) -> float:
    """Hours of operation bought by ``charge_hours`` of peak sun."""
    if panel_peak_mw <= 0 or charge_hours <= 0 or load_mw <= 0:
        raise ValueError("panel power, charge time and load must be positive")
    if not 0 < efficiency <= 1:
        raise ValueError("efficiency must be in (0, 1]")
    return panel_peak_mw * efficiency * charge_hours / load_mw


@dataclass(frozen=True)
class WorkingPoint:
    label: str
    macc: int
    energy_mj: float
    fps: float
    power_mw: float


def working_points(
    items: Iterable,
    model: EnergyModel = EnergyModel(),
    fps_grid: Sequence[float] = (1, 5, 10, 20, 50),
) -> List[WorkingPoint]:
    """Cartesian (network x frame rate) table.

    ``items`` holds ``(label, macc)`` pairs or ArchitectureSpecs (estimated on
    the fly). Rows are ordered by MACC, then fps.
    """
    from .archgraph import build_phinet
    from .graph import ArchitectureSpec
    from .resources import estimate

    nets = []
    for item in items:
        if isinstance(item, ArchitectureSpec):
            label = f"{item.width}x{item.height} a={item.alpha:g} B={item.num_blocks} t0={item.t_zero:g} b={item.beta:g}"
            nets.append((label, estimate(build_phinet(item)).macc_total))
        else:
            label, macc = item
            nets.append((str(label), int(macc)))
    nets.sort(key=lambda n: n[1])
    rows = []
    for label, macc in nets:
        e = energy_per_inference(macc, model)
        for fps in fps_grid:
            rows.append(WorkingPoint(label, macc, e, float(fps), power_at_fps(e, fps, model)))
    return rows


def format_working_points(rows: Sequence[WorkingPoint]) -> str:
    lines = [f"{'network':<40} {'MACC (M)':>9} {'E (mJ)':>8} {'fps':>6} {'P (mW)':>9}"]
    for r in rows:
        lines.append(f"{r.label:<40} {r.macc / 1e6:>9.2f} {r.energy_mj:>8.3f} {r.fps:>6.1f} {r.power_mw:>9.2f}")
    return "\n".join(lines)
