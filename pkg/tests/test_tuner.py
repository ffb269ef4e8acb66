import math

import pytest
from hypothesis import given, settings, strategies as st

from oracle import exhaustive_best, random_budgets
from phinet import ArchitectureSpec, build_phinet, closed_form_wm, estimate
from phinet.resources import resource_triple
from phinet.tuner import (
    ALPHAS,
    BLOCKS,
    RESOLUTIONS,
    InfeasibleError,
    PlatformBudget,
    grid_optimum,
    select_base,
    solve_beta,
    solve_t_zero,
    tune,
)


def test_solve_beta_examples():
    assert solve_beta(1000, 1000) == 1.0
    assert solve_beta(800, 1000) == pytest.approx(0.6)
    assert solve_beta(1500, 1000) == pytest.approx(2.0)
    assert solve_beta(5000, 1000) == 2.0
    assert solve_beta(10, 1000) == 0.25
    with pytest.raises(ValueError):
        solve_beta(10, 0)


def test_solve_t_zero_boundaries():
    spec = ArchitectureSpec(96, 96, 0.25, 7, 1.0, 1.0)
    at_five = closed_form_wm(spec.replace(t_zero=5.0))
    assert solve_t_zero(at_five, spec) == 5.0
    assert solve_t_zero(0.99 * at_five, spec) == 4.0
    assert solve_t_zero(90_000, spec) == 5.0
    assert solve_t_zero(1e9, spec) == 8.0
    assert solve_t_zero(0.99 * at_five, spec, integer=False) == pytest.approx(4.95)


def test_solve_t_zero_infeasible():
    spec = ArchitectureSpec(96, 96, 0.25, 7, 1.0, 1.0)
    with pytest.raises(InfeasibleError) as exc:
        solve_t_zero(1000, spec)
    assert exc.value.constraint == "ram"
    assert exc.value.required == pytest.approx(2 * 17_280)


def _best_base(budget, t_zero=6.0, beta=1.0):
    best = 0
    for w in RESOLUTIONS:
        for a in ALPHAS:
            for b in BLOCKS:
                m = resource_triple(ArchitectureSpec(w, w, a, b, beta, t_zero))[0]
                if m <= budget:
                    best = max(best, m)
    return best


def test_select_base_ten_million():
    w, h, a, b = select_base(10e6)
    m = resource_triple(ArchitectureSpec(w, h, a, b, 1.0, 6.0))[0]
    assert 9e6 < m <= 10e6


@pytest.mark.parametrize("budget", [1.5e6, 4e6, 10e6, 25e6])
def test_select_base_near_exhaustive(budget):
    w, h, a, b = select_base(budget)
    m = resource_triple(ArchitectureSpec(w, h, a, b, 1.0, 6.0))[0]
    assert m <= budget
    assert m >= 0.99 * _best_base(budget)


def test_select_base_exact_budget():
    ref = ArchitectureSpec(128, 128, 0.35, 7, 1.0, 6.0)
    budget = resource_triple(ref)[0]
    assert select_base(budget) == (128, 128, 0.35, 7)
    r = tune(PlatformBudget(budget))
    assert r.report.macc_total <= budget


def test_select_base_infeasible():
    with pytest.raises(InfeasibleError) as exc:
        select_base(1)
    assert exc.value.constraint == "macc"


def _fits(r, macc, ram, flash):
    rep = estimate(build_phinet(r.spec))
    return rep.macc_total <= macc and rep.peak_working_memory <= ram and rep.param_memory <= flash


def test_tune_example_budget():
    r = tune(PlatformBudget(10e6, 400e3, 100e3))
    assert _fits(r, 10e6, 400e3, 100e3)
    assert all(0 <= u <= 1 for u in r.utilization)
    assert r.utilization[0] > 0.95


def test_tune_unconstrained():
    r = tune(PlatformBudget())
    assert r.spec == ArchitectureSpec(max(RESOLUTIONS), max(RESOLUTIONS), max(ALPHAS), max(BLOCKS), 2.0, 8.0)
    assert r.utilization == (0.0, 0.0, 0.0)


def test_tune_infeasible_names_ram():
    with pytest.raises(InfeasibleError) as exc:
        tune(PlatformBudget(10e6, 1e3, 100e3))
    assert exc.value.constraint == "ram"


def test_tune_infeasible_flash_and_macc():
    with pytest.raises(InfeasibleError) as exc:
        tune(PlatformBudget(10e6, 1e6, 500))
    assert exc.value.constraint == "flash"
    with pytest.raises(InfeasibleError) as exc:
        tune(PlatformBudget(1e3, 1e6, 1e6))
    assert exc.value.constraint == "macc"


def test_budget_from_fps():
    b = PlatformBudget(fps_target=10, macc_per_second=80e6, ram_bytes=256e3)
    assert b.macc_budget == pytest.approx(8e6)
    with pytest.raises(InfeasibleError):
        PlatformBudget(macc_budget=0)
    with pytest.raises(InfeasibleError):
        PlatformBudget(fps_target=0, macc_per_second=1e6)
    with pytest.raises(ValueError):
        PlatformBudget(macc_budget=1e6, fps_target=10, macc_per_second=80e6)


def test_tune_deterministic():
    b = PlatformBudget(6e6, 150e3, 60e3)
    first, second = tune(b), tune(b)
    assert first.spec == second.spec
    assert first.report == second.report
    assert first.notes == second.notes


budget_st = st.tuples(
    st.floats(math.log(5e5), math.log(5e7)),
    st.floats(math.log(16e3), math.log(2e6)),
    st.floats(math.log(8e3), math.log(4e6)),
)


@settings(max_examples=30, deadline=None)
@given(budget_st, st.booleans())
def test_tune_sound(logs, integer):
    macc, ram, flash = (math.exp(v) for v in logs)
    try:
        r = tune(PlatformBudget(macc, ram, flash), integer_t_zero=integer)
    except InfeasibleError:
        return
    assert _fits(r, macc, ram, flash)
    assert 2 <= r.spec.t_zero <= 8
    assert r.iterations <= 5


@settings(max_examples=15, deadline=None)
@given(budget_st, st.sampled_from([0, 1, 2]))
def test_larger_budget_stays_feasible(logs, which):
    vals = [math.exp(v) for v in logs]
    try:
        small = tune(PlatformBudget(*vals))
    except InfeasibleError:
        return
    vals[which] *= 2
    big = tune(PlatformBudget(*vals))
    assert _fits(big, *vals)
    assert _fits(small, *vals)


def test_grid_optimum_matches_oracle(oracle_grid):
    for macc, ram, flash in random_budgets(77, 10):
        b = PlatformBudget(macc, ram, flash)
        mine, ref = grid_optimum(b), exhaustive_best(oracle_grid, macc, ram, flash)
        assert (mine is None) == (ref is None)
        if ref:
            assert mine[0] == ref[0]


def test_tune_near_oracle_small_set(oracle_grid):
    for macc, ram, flash in random_budgets(5, 12):
        ref = exhaustive_best(oracle_grid, macc, ram, flash)
        r = tune(PlatformBudget(macc, ram, flash))
        assert r.report.macc_total >= 0.95 * ref[0]
