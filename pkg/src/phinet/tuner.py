"""Budget-driven hyperparameter selection.

Operations are fixed first by choosing resolution, width multiplier and depth;
``t_zero`` is then sized to the RAM budget and ``beta`` to the Flash budget.
Because ``t_zero`` and ``beta`` also move the operation count, the sequence is
repeated (at most ``max_passes`` times) and every candidate is checked with the
exact estimator before it can be returned.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from .graph import ArchitectureSpec
from .resources import ResourceReport, closed_form_wm, estimate, resource_triple
from .archgraph import build_phinet

log = logging.getLogger(__name__)

RESOLUTIONS: Tuple[int, ...] = (64, 96, 128, 160, 192, 224)
ALPHAS: Tuple[float, ...] = tuple(round(0.10 + 0.05 * i, 2) for i in range(39))
BLOCKS: Tuple[int, ...] = tuple(range(4, 10))
T_ZERO_RANGE = (2, 8)
BETA_RANGE = (0.25, 2.0)
ALPHA_BACKOFF = 0.95
MAX_PASSES = 5
# Stop iterating once this fraction of the MACC budget is used.
SATURATION = 0.97
REFINE_BETAS = (0.25, 0.5, 1.0, 1.5, 2.0)

# Reference point for the compound-scaling balance score.
REFERENCE = (128, 0.35, 7)


class InfeasibleError(ValueError):
    """No architecture satisfies the budget; ``constraint`` names the binding one."""

    def __init__(self, constraint: str, required: float, available: float, detail: str = ""):
        self.constraint = constraint
        self.required = required
        self.available = available
        msg = f"infeasible: {constraint} needs at least {required:.0f}, budget is {available:.0f}"
        super().__init__(msg + (f" ({detail})" if detail else ""))


@dataclass(frozen=True)
class PlatformBudget:
    macc_budget: Optional[float] = None
    ram_bytes: float = math.inf
    flash_bytes: float = math.inf
    fps_target: Optional[float] = None
    macc_per_second: Optional[float] = None

    def __post_init__(self):
        if self.fps_target is not None and self.macc_per_second is not None:
            if self.fps_target <= 0 or self.macc_per_second <= 0:
                raise InfeasibleError("macc", 1, 0, "fps and MACC/s must be positive")
            derived = self.macc_per_second / self.fps_target
            if self.macc_budget is not None and not math.isclose(self.macc_budget, derived, rel_tol=1e-9):
                raise ValueError("macc_budget disagrees with macc_per_second / fps_target")
            object.__setattr__(self, "macc_budget", derived)
        if self.macc_budget is None:
            object.__setattr__(self, "macc_budget", math.inf)
        for name in ("macc_budget", "ram_bytes", "flash_bytes"):
            if not getattr(self, name) > 0:
                raise InfeasibleError(name.split("_")[0], 1, getattr(self, name), "budget must be positive")


@dataclass
class TuningResult:
    spec: ArchitectureSpec
    report: ResourceReport
    utilization: Tuple[float, float, float]
    iterations: int
    notes: List[str] = field(default_factory=list)


def solve_beta(p_target: float, p_zero: float) -> float:
    """Shape factor giving roughly ``p_target`` parameters from a beta=1 count ``p_zero``.

    Clamped to [0.25, 2]; a clamp is logged.
    """
    if p_zero <= 0:
        raise ValueError("p_zero must be positive")
    beta = 2.0 * p_target / p_zero - 1.0
    lo, hi = BETA_RANGE
    if not lo <= beta <= hi:
        log.info("beta %.3f clamped to [%g, %g]", beta, lo, hi)
    return min(max(beta, lo), hi)


def solve_t_zero(budget_ram: float, spec: ArchitectureSpec, integer: bool = True) -> float:
    """Largest t_zero in [2, 8] whose closed-form working memory fits ``budget_ram``."""
    per_unit = closed_form_wm(spec.replace(t_zero=1.0))
    if per_unit <= 0:
        raise ValueError("closed-form working memory must be positive")
    lo, hi = T_ZERO_RANGE
    if per_unit * lo > budget_ram:
        raise InfeasibleError("ram", per_unit * lo, budget_ram, "closed form at t_zero=2")
    if integer:
        for t in range(hi, lo - 1, -1):
            if per_unit * t <= budget_ram:
                return float(t)
    return float(min(hi, budget_ram / per_unit))


def _fits(spec: ArchitectureSpec, macc: float, ram: float, flash: float) -> bool:
    m, pm, wm = resource_triple(spec)
    return m <= macc and wm <= ram and pm <= flash


def _balance(w: int, alpha: float, blocks: int) -> float:
    """Spread of the per-dimension MACC scaling factors (0 = perfectly compound)."""
    rw, ra, rb = REFERENCE
    logs = (2 * math.log(w / rw), 2 * math.log(alpha / ra), math.log(blocks / rb))
    return max(logs) - min(logs)


@dataclass(frozen=True)
class SelectionPolicy:
    """How select_base breaks near-ties.

    Candidates within ``tie_tolerance`` (relative MACC) of the best are
    considered equal; among them the most balanced scaling wins, then larger
    alpha, larger resolution and fewer blocks.
    """

    tie_tolerance: float = 0.01
    resolutions: Sequence[int] = RESOLUTIONS
    alphas: Sequence[float] = ALPHAS
    blocks: Sequence[int] = BLOCKS


DEFAULT_POLICY = SelectionPolicy()


def _largest_feasible(items: Sequence, ok: Callable) -> Optional[int]:
    """Index of the last item satisfying a monotone (True...False) predicate."""
    lo, hi = 0, len(items) - 1
    if not ok(items[lo]):
        return None
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ok(items[mid]):
            lo = mid
        else:
            hi = mid - 1
    return lo


def select_base(
    budget_macc: float,
    policy: SelectionPolicy = DEFAULT_POLICY,
    *,
    t_zero: float = 6.0,
    beta: float = 1.0,
    ram_bytes: float = math.inf,
    flash_bytes: float = math.inf,
) -> Tuple[int, int, float, int]:
    """Pick ``(w, h, alpha, B)`` with the most MACC that stays within budget.

    Every resource grows monotonically with alpha, so for each (resolution,
    depth) pair the largest feasible alpha is found by bisection; that is
    equivalent to scanning the whole alpha grid.
    """
    if not budget_macc > 0:
        raise InfeasibleError("macc", 1, budget_macc)
    candidates = []
    for w in policy.resolutions:
        for b in policy.blocks:
            def ok(a, w=w, b=b):
                return _fits(ArchitectureSpec(w, w, a, b, beta, t_zero), budget_macc, ram_bytes, flash_bytes)

            k = _largest_feasible(policy.alphas, ok)
            if k is not None:
                a = policy.alphas[k]
                macc = resource_triple(ArchitectureSpec(w, w, a, b, beta, t_zero))[0]
                candidates.append((macc, w, a, b))
    if not candidates:
        raise _diagnose(budget_macc, ram_bytes, flash_bytes, t_zero, beta, policy)
    best = max(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] >= best * (1 - policy.tie_tolerance)]
    tied.sort(key=lambda c: (_balance(c[1], c[2], c[3]), -c[2], -c[1], c[3], -c[0]))
    _, w, a, b = tied[0]
    return w, w, a, b


def _diagnose(macc, ram, flash, t_zero, beta, policy) -> InfeasibleError:
    """Name the constraint that even the smallest candidate violates."""
    smallest = ArchitectureSpec(
        min(policy.resolutions), min(policy.resolutions), min(policy.alphas), min(policy.blocks), beta, t_zero
    )
    m, pm, wm = resource_triple(smallest)
    for name, need, have in (("ram", wm, ram), ("flash", pm, flash), ("macc", m, macc)):
        if need > have:
            return InfeasibleError(name, need, have, "smallest grid candidate")
    return InfeasibleError("macc", m, macc, "no grid candidate satisfies all budgets jointly")


def _report(spec: ArchitectureSpec) -> ResourceReport:
    return estimate(build_phinet(spec))


def _utilization(report: ResourceReport, budget: PlatformBudget) -> Tuple[float, float, float]:
    def frac(used, avail):
        return 0.0 if math.isinf(avail) else used / avail

    return (
        frac(report.macc_total, budget.macc_budget),
        frac(report.peak_working_memory, budget.ram_bytes),
        frac(report.param_memory, budget.flash_bytes),
    )


def _fit_t_zero(base: ArchitectureSpec, ram: float, integer: bool) -> float:
    """Closed-form t_zero, stepped down until the exact working memory fits."""
    try:
        t = solve_t_zero(ram, base, integer)
    except InfeasibleError:
        return T_ZERO_RANGE[0]
    while t > T_ZERO_RANGE[0] and resource_triple(base.replace(t_zero=t))[2] > ram:
        t = t - 1 if integer else max(T_ZERO_RANGE[0], round(t * 0.95, 4))
    return float(t)


def _fit_beta(base: ArchitectureSpec, flash: float) -> float:
    """Closed-form beta, stepped down until the exact parameter memory fits."""
    p0 = resource_triple(base.replace(beta=1.0))[1]
    beta = round(solve_beta(flash, p0), 4)
    while beta > BETA_RANGE[0] and resource_triple(base.replace(beta=beta))[1] > flash:
        beta = max(BETA_RANGE[0], round(beta - 0.05, 4))
    return beta


def _try_base(consider, macc_b, policy, t_zero, beta, ram, flash) -> None:
    try:
        w, h, a, b = select_base(macc_b, policy, t_zero=t_zero, beta=beta, ram_bytes=ram, flash_bytes=flash)
    except InfeasibleError:
        return
    consider(ArchitectureSpec(w, h, a, b, beta, t_zero))


def tune(
    budget: PlatformBudget,
    *,
    integer_t_zero: bool = True,
    max_passes: int = MAX_PASSES,
    policy: SelectionPolicy = DEFAULT_POLICY,
) -> TuningResult:
    macc_b, ram, flash = budget.macc_budget, budget.ram_bytes, budget.flash_bytes
    t_zero = 6.0 if macc_b > 5e6 else 5.0
    beta = 1.0
    # Ceilings that only move down once memory is found to bind.
    t_cap, beta_cap = float(T_ZERO_RANGE[1]), BETA_RANGE[1]
    notes: List[str] = []
    best: Optional[ArchitectureSpec] = None
    best_macc = -1

    def consider(spec: ArchitectureSpec):
        nonlocal best, best_macc
        m = resource_triple(spec)[0]
        if _fits(spec, macc_b, ram, flash) and m > best_macc:
            best, best_macc = spec, m

    passes = 0
    for passes in range(1, max_passes + 1):
        try:
            w, h, a, b = select_base(macc_b, policy, t_zero=t_zero, beta=beta, ram_bytes=ram, flash_bytes=flash)
        except InfeasibleError:
            lo_t, lo_b = T_ZERO_RANGE[0], BETA_RANGE[0]
            if (t_zero, beta) == (lo_t, lo_b):
                raise
            notes.append(f"pass {passes}: no base at t0={t_zero:g}, beta={beta:g}; retrying at minimum")
            t_zero, beta = float(lo_t), lo_b
            continue
        base = ArchitectureSpec(w, h, a, b, beta, t_zero)
        consider(base)

        t_new = min(_fit_t_zero(base, ram, integer_t_zero), t_cap)
        beta_new = min(_fit_beta(base.replace(t_zero=t_new), flash), beta_cap)
        cand = base.replace(t_zero=t_new, beta=beta_new)
        alpha = cand.alpha
        while resource_triple(cand)[0] > macc_b and alpha * ALPHA_BACKOFF >= min(policy.alphas):
            alpha = round(alpha * ALPHA_BACKOFF, 4)
            cand = cand.replace(alpha=alpha)
        consider(cand)
        notes.append(
            f"pass {passes}: base {w}x{h} a={a:g} B={b} -> t0={t_new:g} beta={beta_new:g} a={alpha:g}"
        )

        if best_macc >= SATURATION * macc_b:
            break
        if (t_new, beta_new) != (t_zero, beta):
            t_zero, beta = t_new, beta_new
            continue
        # Converged without saturating MACC: memory binds. Operations grow
        # like alpha^2 * t0 but working memory like alpha * t0, so trading t0
        # for width buys MACC under a RAM limit; beta mostly moves parameters,
        # so lowering it frees Flash for width.
        _, pm, wm = resource_triple(cand)
        ram_frac = wm / ram if math.isfinite(ram) else 0.0
        flash_frac = pm / flash if math.isfinite(flash) else 0.0
        lo_t, lo_b = T_ZERO_RANGE[0], BETA_RANGE[0]
        if ram_frac >= flash_frac and t_zero > lo_t:
            t_zero = t_cap = float(lo_t)
        elif beta > lo_b:
            beta = beta_cap = lo_b
        elif t_zero > lo_t:
            t_zero = t_cap = float(lo_t)
        else:
            break

    # Refinement when memory binds: re-select the base at every (t_zero, beta)
    # level pair. RAM and Flash can bind together, and the best trade then
    # moves both knobs at once (low t_zero with high beta, or the reverse),
    # which a one-knob step cannot reach.
    if best is not None and best_macc < SATURATION * macc_b:
        lo_t, hi_t = T_ZERO_RANGE
        for t_try in range(lo_t, hi_t + 1):
            for b_try in REFINE_BETAS:
                _try_base(consider, macc_b, policy, float(t_try), b_try, ram, flash)
        notes.append(f"refine: t0={best.t_zero:g} beta={best.beta:g}")

    if best is None:
        raise _diagnose(macc_b, ram, flash, T_ZERO_RANGE[0], BETA_RANGE[0], policy)
    report = _report(best)
    return TuningResult(best, report, _utilization(report, budget), passes, notes)


def grid_table(
    t_zeros: Sequence[float] = tuple(float(t) for t in range(2, 9)),
    betas: Sequence[float] = (0.25, 0.5, 1.0, 1.5, 2.0),
    policy: SelectionPolicy = DEFAULT_POLICY,
):
    """Exact resources of every grid point: ``(specs, macc, param_memory, wm)`` arrays."""
    import numpy as np

    specs = [
        ArchitectureSpec(w, w, a, b, be, t)
        for w in policy.resolutions
        for a in policy.alphas
        for b in policy.blocks
        for t in t_zeros
        for be in betas
    ]
    rows = np.array([resource_triple(s) for s in specs], dtype=float).reshape(-1, 3)
    return specs, rows[:, 0], rows[:, 1], rows[:, 2]


def grid_optimum(budget: PlatformBudget, table=None) -> Optional[Tuple[int, ArchitectureSpec]]:
    """Exhaustive search: the feasible grid point with the most MACC, or None."""
    import numpy as np

    specs, macc, pm, wm = table if table is not None else grid_table()
    ok = (macc <= budget.macc_budget) & (wm <= budget.ram_bytes) & (pm <= budget.flash_bytes)
    if not ok.any():
        return None
    i = int(np.argmax(np.where(ok, macc, -1)))
    return int(macc[i]), specs[i]
