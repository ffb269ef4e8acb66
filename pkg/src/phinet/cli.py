"""Command-line entry point: ``phinet <command> ...``.

Exit codes:
  0  success
  2  bad flags or arguments
  3  budget infeasible
  4  file could not be read or written
  5  malformed input file (graph, spec or MOT text)
  6  graph construction or execution shape error
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import List, Optional


from . import __version__
from .archgraph import GraphParseError, build_phinet, deserialize_graph, serialize_graph, spec_from_document, spec_to_document
from .baselines import BASELINE_CONFIGS
from .energy import EnergyModel, format_working_points, working_points
from .executor import DEFAULT_ANCHORS, ShapeMismatchError, decode_head, nms, random_input, run
from .graph import ArchitectureSpec, GraphConstructionError
from .resources import estimate
from .tracker import IouTracker, SortTracker, run_tracker, score
from .tracker.metrics import format_table
from .tracker.motio import format_detections, format_tracks, read_detections, read_tracks
from .tracker.synthetic import crossing_sequence, linear_sequence
from .tuner import InfeasibleError, PlatformBudget, tune

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4
EXIT_PARSE = 5
EXIT_CONSTRUCTION = 6


class UsageError(Exception):
    pass


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read(path: str) -> str:
    return Path(path).read_text()


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("architecture")
    g.add_argument("--spec", help="spec or graph JSON document (overrides the flags below)")
    g.add_argument("--resolution", type=int, default=128, help="square input size (default 128)")
    g.add_argument("--alpha", type=float, default=0.35)
    g.add_argument("--blocks", type=int, default=7)
    g.add_argument("--beta", type=float, default=1.0)
    g.add_argument("--t-zero", type=float, default=6.0)
    g.add_argument("--classes", type=int, default=1)
    g.add_argument("--anchors", type=int, default=5)
    g.add_argument("--no-head", action="store_true")


def _spec_from_args(args) -> ArchitectureSpec:
    if args.spec:
        doc = json.loads(_read(args.spec))
        if isinstance(doc, dict) and doc.get("document") == "graph":
            return deserialize_graph(json.dumps(doc)).spec
        return spec_from_document(doc)
    return ArchitectureSpec(
        width=args.resolution,
        height=args.resolution,
        alpha=args.alpha,
        num_blocks=args.blocks,
        beta=args.beta,
        t_zero=args.t_zero,
        num_classes=args.classes,
        num_anchors=args.anchors,
        include_head=not args.no_head,
    )


def _graph_from_args(args):
    if getattr(args, "graph", None):
        return deserialize_graph(_read(args.graph))
    return build_phinet(_spec_from_args(args))


def _spec_line(s: ArchitectureSpec) -> str:
    return f"{s.width}x{s.height} alpha={s.alpha:g} B={s.num_blocks} beta={s.beta:g} t0={s.t_zero:g}"


# --- commands -------------------------------------------------------------


def cmd_plan(args) -> int:
    budget = PlatformBudget(
        macc_budget=args.macc_budget,
        ram_bytes=args.ram if args.ram is not None else math.inf,
        flash_bytes=args.flash if args.flash is not None else math.inf,
        fps_target=args.fps,
        macc_per_second=args.macc_per_sec,
    )
    result = tune(budget)
    r, (um, ur, uf) = result.report, result.utilization
    if args.format == "structured":
        doc = spec_to_document(result.spec)
        doc["report"] = {k: v for k, v in r.to_dict().items() if k != "per_layer"}
        doc["utilization"] = {"macc": um, "ram": ur, "flash": uf}
        doc["passes"] = result.iterations
        _write(args.output, json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return EXIT_OK
    lines = [
        f"selected   {_spec_line(result.spec)}",
        f"MACC       {r.macc_total / 1e6:.2f} M   ({100 * um:.1f}% of budget)",
        f"peak WM    {r.peak_working_memory} B ({100 * ur:.1f}% of RAM)",
        f"param mem  {r.param_memory} B ({100 * uf:.1f}% of Flash)",
        f"passes     {result.iterations}",
    ]
    lines += [f"  {n}" for n in result.notes]
    sys.stdout.write("\n".join(lines) + "\n")
    if args.output:
        _write(args.output, json.dumps(spec_to_document(result.spec), indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_build(args) -> int:
    graph = build_phinet(_spec_from_args(args))
    _write(args.output, serialize_graph(graph) + "\n")
    return EXIT_OK


def cmd_estimate(args) -> int:
    graph = _graph_from_args(args)
    report = estimate(graph)
    if args.format == "structured":
        _write(args.output, json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    else:
        _write(args.output, report.to_table(graph) + "\n")
    return EXIT_OK


def cmd_exec(args) -> int:
    graph = _graph_from_args(args)
    if not graph.spec or not graph.spec.include_head:
        raise UsageError("exec needs a graph with a detection head")
    anchors = DEFAULT_ANCHORS[: graph.spec.num_anchors]
    if len(anchors) < graph.spec.num_anchors:
        raise UsageError(f"only {len(DEFAULT_ANCHORS)} default anchors are defined")
    h, w, _ = graph.input_shape
    dets = []
    for frame in range(1, args.frames + 1):
        x = random_input(graph, seed=args.seed * 100_003 + frame)
        out, _ = run(graph, x, seed=args.seed)
        found = decode_head(out, anchors, args.conf, image_size=(w, h), frame=frame)
        dets.extend(nms(found, args.nms))
    _write(args.output, format_detections(dets))
    return EXIT_OK


def cmd_track(args) -> int:
    if args.synthetic:
        make = linear_sequence if args.synthetic == "linear" else crossing_sequence
        seq = make(seed=args.seed, dropout=args.dropout, jitter=args.jitter)
        dets, gt, frames = seq.detections, seq.ground_truth, seq.num_frames
    elif args.detections:
        dets = read_detections(args.detections)
        gt = read_tracks(args.gt) if args.gt else None
        frames = None
    else:
        raise UsageError("track needs --detections or --synthetic")

    kinds = ["sort", "iou"] if args.tracker == "both" else [args.tracker]
    rows = []
    for kind in kinds:
        if kind == "sort":
            tracker = SortTracker(args.max_age, args.min_hits, args.iou_threshold)
        else:
            tracker = IouTracker(args.max_age, args.min_hits, args.iou_threshold)
        hyps = run_tracker(tracker, dets, frames)
        if args.output:
            out = args.output if len(kinds) == 1 else f"{args.output}.{kind}"
            _write(out, format_tracks(hyps))
        if gt is not None:
            rows.append((kind.upper(), score(hyps, gt)))
    if rows:
        sys.stdout.write(format_table(rows) + "\n")
    return EXIT_OK


def cmd_energy(args) -> int:
    try:
        model = EnergyModel(mj_per_mmacc=args.mj_per_mmacc, idle_power_mw=args.idle_mw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        fps = [float(v) for v in args.fps.split(",") if v]
    except ValueError:
        raise UsageError(f"bad --fps list {args.fps!r}") from None
    if not fps:
        raise UsageError("--fps list is empty")
    if args.macc is not None:
        items = [(f"{args.macc / 1e6:.2f} MMACC", args.macc)]
    else:
        graph = _graph_from_args(args)
        label = _spec_line(graph.spec) if graph.spec else "graph"
        items = [(label, estimate(graph).macc_total)]
    rows = working_points(items, model, fps)
    sys.stdout.write(format_working_points(rows) + "\n")
    if args.columns:
        _write(args.columns, "fps,mW\n" + "".join(f"{r.fps:g},{r.power_mw:.4f}\n" for r in rows))
    return EXIT_OK


def cmd_report(args) -> int:
    if not args.table2:
        raise UsageError("report needs --table2")
    records = []
    for b in BASELINE_CONFIGS:
        r = estimate(build_phinet(b.spec))
        records.append((b, r))
    if args.format == "structured":
        doc = [
            {
                "spec": b.spec.to_dict(),
                "task": b.task,
                "macc": r.macc_total,
                "parameters": r.param_count,
                "peak_working_memory": r.peak_working_memory,
                "reference_macc": b.reported_macc,
                "reference_parameters": b.reported_params,
            }
            for b, r in records
        ]
        _write(args.output, json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return EXIT_OK
    head = (
        f"{'Resolution':<11} {'α':>5} {'B':>2} {'β':>4} {'t₀':>3} {'MACC':>8} {'Parameters':>10}"
        f" {'ref MACC':>9} {'ref Params':>10} {'WM (B)':>8} {'Task':<9}"
    )
    lines = [head]
    for b, r in records:
        s = b.spec
        lines.append(
            f"{f'{s.width}x{s.height}':<11} {s.alpha:>5.2f} {s.num_blocks:>2d} {s.beta:>4g} {s.t_zero:>3g}"
            f" {r.macc_total / 1e6:>6.2f} M {r.param_count / 1e3:>8.1f} K"
            f" {b.reported_macc / 1e6:>7.2f} M {b.reported_params / 1e3:>8.1f} K"
            f" {r.peak_working_memory:>8d} {b.task:<9}"
        )
    _write(args.output, "\n".join(lines) + "\n")
    return EXIT_OK


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phinet", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"phinet {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="pick hyperparameters for a platform budget")
    sp.add_argument("--macc-budget", type=float, help="MACC per inference")
    sp.add_argument("--ram", type=float, help="RAM bytes for activations")
    sp.add_argument("--flash", type=float, help="Flash bytes for weights")
    sp.add_argument("--fps", type=float, help="target frame rate (with --macc-per-sec)")
    sp.add_argument("--macc-per-sec", type=float, help="device throughput (with --fps)")
    sp.add_argument("--format", choices=("text", "structured"), default="text")
    sp.add_argument("-o", "--output", help="write the spec document here")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("build", help="build a graph and write it as JSON")
    _add_spec_flags(sp)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("estimate", help="MACC, parameter memory and peak working memory")
    sp.add_argument("--graph", help="graph JSON from `build`")
    _add_spec_flags(sp)
    sp.add_argument("--format", choices=("text", "structured"), default="text")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("exec", help="run the graph on seeded random frames and write detections")
    sp.add_argument("--graph")
    _add_spec_flags(sp)
    sp.add_argument("--frames", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--conf", type=float, default=0.5, help="confidence threshold")
    sp.add_argument("--nms", type=float, default=0.45, help="NMS IoU threshold")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_exec)

    sp = sub.add_parser("track", help="track detections and score against ground truth")
    sp.add_argument("--detections", help="MOT-format detection file")
    sp.add_argument("--gt", help="MOT-format ground truth file")
    sp.add_argument("--synthetic", choices=("linear", "crossing"))
    sp.add_argument("--tracker", choices=("sort", "iou", "both"), default="both")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dropout", type=float, default=0.0)
    sp.add_argument("--jitter", type=float, default=0.0)
    sp.add_argument("--max-age", type=int, default=1)
    sp.add_argument("--min-hits", type=int, default=3)
    sp.add_argument("--iou-threshold", type=float, default=0.3)
    sp.add_argument("-o", "--output", help="hypothesis file (suffixed .sort/.iou for both)")
    sp.set_defaults(func=cmd_track)

    sp = sub.add_parser("energy", help="energy per inference and power at frame rates")
    sp.add_argument("--macc", type=float, help="MACC count instead of a graph")
    sp.add_argument("--graph")
    _add_spec_flags(sp)
    sp.add_argument("--mj-per-mmacc", type=float, default=1.2)
    sp.add_argument("--idle-mw", type=float, default=0.0)
    sp.add_argument("--fps", default="1,5,10,20,50", help="comma-separated frame rates")
    sp.add_argument("--columns", help="write an fps,mW column file here")
    sp.set_defaults(func=cmd_energy)

    sp = sub.add_parser("report", help="summary table for the benchmarked baselines")
    sp.add_argument("--table2", action="store_true", help="the seven baseline configurations")
    sp.add_argument("--format", choices=("text", "structured"), default="text")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        msg, code = f"usage error: {exc}", EXIT_USAGE
    except InfeasibleError as exc:
        msg, code = str(exc), EXIT_INFEASIBLE
    except GraphParseError as exc:
        msg, code = f"parse error: {exc}", EXIT_PARSE
    except (GraphConstructionError, ShapeMismatchError) as exc:
        msg, code = f"construction error: {exc}", EXIT_CONSTRUCTION
    except (OSError, UnicodeDecodeError) as exc:
        msg, code = f"i/o error: {exc}", EXIT_IO
    except (json.JSONDecodeError, ValueError) as exc:
        msg, code = f"parse error: {exc}", EXIT_PARSE
    print(f"phinet: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
