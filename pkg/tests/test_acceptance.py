"""Acceptance suite: one test per criterion, each also reported as a PASS/FAIL line."""

import filecmp
import subprocess
import sys
import time

import numpy as np

from oracle import brute_force_assignment, exhaustive_best, random_budgets
from phinet import ArchitectureSpec, build_phinet, closed_form_wm, estimate
from phinet.archgraph import _build_cached
from phinet.baselines import BASELINE_CONFIGS, MACC_TOLERANCE, PARAM_TOLERANCE
from phinet.energy import energy_per_inference, power_at_fps, solar_endurance
from phinet.executor import random_input, run
from phinet.resources import resource_triple
from phinet.tracker import IouTracker, SortTracker, hungarian, run_tracker, score
from phinet.tracker.assignment import assignment_cost
from phinet.tracker.synthetic import crossing_sequence, linear_sequence
from phinet.tuner import InfeasibleError, PlatformBudget, tune


def _cold():
    resource_triple.cache_clear()
    _build_cached.cache_clear()


def test_criterion_1_table2_reproduction(verdict):
    _cold()
    start = time.perf_counter()
    ratios = []
    for b in BASELINE_CONFIGS:
        r = estimate(build_phinet(b.spec))
        ratios.append((r.macc_total / b.reported_macc, r.param_count / b.reported_params))
    elapsed = time.perf_counter() - start
    macc_ok = all(abs(m - 1) <= MACC_TOLERANCE for m, _ in ratios)
    param_ok = all(abs(p - 1) <= PARAM_TOLERANCE for _, p in ratios)
    worst_m = max(abs(m - 1) for m, _ in ratios)
    worst_p = max(abs(p - 1) for _, p in ratios)
    ok = verdict(
        macc_ok and param_ok and elapsed < 1.0,
        f"worst MACC dev {worst_m:.1%} (<=15%), worst params dev {worst_p:.1%} (<=20%), {elapsed:.3f} s",
    )
    assert ok


def test_criterion_2_counter_oracle_equality(verdict):
    rng = np.random.default_rng(20)
    n, exact, bounded = 24, 0, 0
    for _ in range(n):
        spec = ArchitectureSpec(
            width=int(rng.choice([32, 64, 96, 128])),
            height=int(rng.choice([32, 64, 96])),
            alpha=float(rng.choice([0.1, 0.15, 0.2, 0.25, 0.35, 0.5])),
            num_blocks=int(rng.integers(1, 10)),
            beta=float(rng.choice([0.5, 0.75, 1.0, 1.5, 2.0])),
            t_zero=float(rng.integers(2, 9)),
            num_classes=int(rng.integers(1, 4)),
            num_anchors=int(rng.integers(1, 6)),
            include_head=bool(rng.integers(0, 2)),
        )
        g = build_phinet(spec)
        rep = estimate(g)
        _, trace = run(g, random_input(g, seed=int(rng.integers(1 << 30))), seed=int(rng.integers(1 << 30)))
        exact += trace.macc_performed == rep.macc_total
        bounded += 0.7 * rep.peak_working_memory <= trace.peak_live_bytes <= rep.peak_working_memory
    ok = verdict(exact == n and bounded == n, f"{exact}/{n} MACC equal, {bounded}/{n} peak within [0.7, 1.0] of estimate")
    assert ok


def test_criterion_3_scaling_laws(verdict):
    base = ArchitectureSpec(96, 96, 0.25, 7, 1.0, 5.0)
    wm_drop = 1 - closed_form_wm(base.replace(t_zero=4.0)) / closed_form_wm(base)
    ref = ArchitectureSpec(128, 128, 0.35, 7, 1.0, 6.0)
    p1 = estimate(build_phinet(ref)).param_count
    beta_dev = max(
        abs(estimate(build_phinet(ref.replace(beta=b))).param_count / p1 - (1 + b) / 2) for b in (0.5, 0.75, 1.25, 1.5)
    )
    doubling = estimate(build_phinet(ref.replace(alpha=0.7))).macc_total / estimate(build_phinet(ref)).macc_total
    ok = verdict(
        abs(wm_drop - 0.2) < 1e-12 and beta_dev <= 0.10 and 3.0 <= doubling <= 4.5,
        f"WM drop {wm_drop:.6f} (0.2), max beta dev {beta_dev:.3f} (<=0.10), alpha doubling {doubling:.2f} ([3, 4.5])",
    )
    assert ok


def test_criterion_4_tuner(verdict, oracle_grid):
    budgets = random_budgets(1234, 50)
    _cold()
    start = time.perf_counter()
    results = []
    for macc, ram, flash in budgets:
        try:
            results.append(tune(PlatformBudget(macc, ram, flash)))
        except InfeasibleError as exc:
            results.append(exc)
    elapsed = time.perf_counter() - start

    sound, ratios, agree = 0, [], 0
    for (macc, ram, flash), res in zip(budgets, results):
        best = exhaustive_best(oracle_grid, macc, ram, flash)
        if isinstance(res, InfeasibleError):
            agree += best is None
            continue
        agree += best is not None
        rep = estimate(build_phinet(res.spec))
        sound += rep.macc_total <= macc and rep.peak_working_memory <= ram and rep.param_memory <= flash
        ratios.append(rep.macc_total / best[0])
    feasible = len(ratios)
    worst = min(ratios) if ratios else float("nan")
    ok = verdict(
        sound == feasible and agree == len(budgets) and worst >= 0.95 and elapsed < 60,
        f"{sound}/{feasible} sound, feasibility agrees {agree}/50, worst MACC ratio {worst:.3f} (>=0.95), {elapsed:.1f} s",
    )
    assert ok


def test_criterion_5_energy(verdict):
    e_big = energy_per_inference(9.85e6)
    e_small = energy_per_inference(1.23e6)
    p = power_at_fps(1.3, 10)
    hours = solar_endurance(913, 0.85, 1, 16)
    checks = [
        abs(e_big / 11.8 - 1) <= 0.01,
        abs(e_small / 1.3 - 1) <= 0.15,
        p == 13.0,
        abs(hours / 48.5 - 1) <= 0.05,
    ]
    ok = verdict(
        all(checks),
        f"{e_big:.2f} mJ vs 11.8, {e_small:.3f} mJ vs 1.3, {p:g} mW vs 13, {hours:.1f} h ({hours / 24:.2f} days)",
    )
    assert ok


def test_criterion_6_tracker(verdict):
    rng = np.random.default_rng(6)
    optimal = 0
    for _ in range(1000):
        n, m = rng.integers(1, 8, size=2)
        cost = rng.uniform(0, 10, (n, m))
        optimal += abs(assignment_cost(cost, hungarian(cost)) - brute_force_assignment(cost)) < 1e-9

    seq = linear_sequence(num_objects=5, num_frames=100, seed=0)
    tracker = SortTracker()
    by_frame = {}
    for d in seq.detections:
        by_frame.setdefault(d.frame, []).append(d)
    hyps, min_eig = [], np.inf
    for f in range(1, seq.num_frames + 1):
        hyps += [(f, tid, box) for tid, box in tracker.step(by_frame.get(f, []))]
        for t in tracker.tracks:
            min_eig = min(min_eig, np.linalg.eigvalsh(t.P).min())
            assert np.allclose(t.P, t.P.T)
    linear = score(hyps, seq.ground_truth)

    cross = crossing_sequence(speed=8.0)
    sort_sw = score(run_tracker(SortTracker(), cross.detections, cross.num_frames), cross.ground_truth).id_switches
    iou_sw = score(run_tracker(IouTracker(), cross.detections, cross.num_frames), cross.ground_truth).id_switches

    ok = verdict(
        optimal == 1000 and linear.mota == 1.0 and linear.id_switches == 0 and sort_sw <= iou_sw and min_eig >= -1e-9,
        f"hungarian {optimal}/1000 optimal, MOTA {linear.mota:.3f} IDSW {linear.id_switches}, "
        f"crossing IDSW SORT {sort_sw} vs IoU {iou_sw}, min cov eigenvalue {min_eig:.2e}",
    )
    assert ok


def _cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "phinet.cli", *args], cwd=cwd, capture_output=True)


def test_criterion_7_cli_determinism(verdict, tmp_path):
    commands = {
        "plan": ["plan", "--macc-budget", "5e6", "--ram", "96000", "--flash", "64000", "-o", "spec.json"],
        "build": ["build", "--spec", "spec.json", "-o", "graph.json"],
        "estimate": ["estimate", "--graph", "graph.json", "-o", "report.txt"],
        "exec": ["exec", "--graph", "graph.json", "--frames", "2", "--seed", "11", "-o", "dets.txt"],
        "track": ["track", "--detections", "dets.txt", "-o", "hyps.txt"],
        "track-synthetic": ["track", "--synthetic", "crossing", "--seed", "11", "--jitter", "1.0", "-o", "syn.txt"],
        "energy": ["energy", "--graph", "graph.json", "--idle-mw", "0.5", "--columns", "power.csv"],
        "report": ["report", "--table2", "-o", "table2.txt"],
    }
    runs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        outs = {}
        for name, args in commands.items():
            proc = _cli(args, d)
            outs[name] = (proc.returncode, proc.stdout, proc.stderr)
        runs.append((d, outs))
    (d0, a), (d1, b) = runs
    files = sorted(p.name for p in d0.iterdir())
    same_files = all(filecmp.cmp(d0 / f, d1 / f, shallow=False) for f in files)
    same_streams = a == b
    all_ok = all(code == 0 for code, _, _ in a.values())
    ok = verdict(
        same_files and same_streams and all_ok and len(files) >= 9,
        f"{len(commands)} invocations, {len(files)} files byte-identical: {same_files}, stdout/stderr identical: {same_streams}",
    )
    assert ok
