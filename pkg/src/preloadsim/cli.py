"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 infeasible (a fallback plan
was emitted instead).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import InfeasibleAllPruned, PreloadError, SpaceTooLarge
from .model import DeviceModel, Plan, Weights
from .planner import (
    BITRATE_RULES,
    ROLLOUT_POLICIES,
    PlannerConfig,
    plan_bruteforce,
    plan_fixed_nextk_baseline,
    plan_mcts,
    plan_sequential_baseline,
)
from .scoring import schedule_utility
from .sim import (
    CSV_COLUMNS,
    SimConfig,
    StrategyId,
    chunk_size_sweep,
    compare_strategies,
    run_session,
    sweep_to_csv,
)
from .sim.experiments import SWEEP_CONFIG, _fmt
from .timeline import PlaybackState, evaluate_plan
from .traceio import (
    BANDWIDTH_PATTERNS,
    SuiteCase,
    gen_synthetic_bandwidth,
    gen_synthetic_feed,
    gen_synthetic_sessions,
    load_bandwidth_trace,
    load_manifest,
    load_session_trace,
    save_bandwidth_trace,
    save_manifest,
    save_session_trace,
    stress_suite,
    synthetic_suite,
)

CONFIG_ENV = "PRELOADSIM_CONFIG"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _weights(text: str) -> Weights:
    try:
        parts = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be four numbers, got {text!r}")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("weights are quality,variation,stall,bandwidth")
    try:
        return Weights(*parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_planner_flags(p):
    g = p.add_argument_group("planner")
    g.add_argument("--horizon", type=int, help="planning horizon in chunks (default 4)")
    g.add_argument("--exploration", type=float, help="UCT exploration constant (default 0.1)")
    g.add_argument("--budget", type=int, help="MCTS simulation budget")
    g.add_argument("--time-budget", type=float, help="MCTS wall-clock budget in ms")
    g.add_argument("--rollout", choices=ROLLOUT_POLICIES, help="rollout policy (default greedy)")
    g.add_argument("--weights", type=_weights, help="quality,variation,stall,bandwidth (default 1,1,3,0.3)")
    g.add_argument("--seed", type=int, help="master seed (default 0)")


def _add_sim_flags(p):
    g = p.add_argument_group("session")
    g.add_argument("--startup-delay", type=int, help="ms between a swipe and the first chunk's deadline (default 200)")
    g.add_argument("--replan-interval", type=int, help="replan timer period in ms (default 500)")
    g.add_argument("--bitrate-rule", choices=sorted(BITRATE_RULES), help="fixed-K bitrate rule")
    g.add_argument("--predictor-window", type=int, help="bandwidth samples in the harmonic mean (default 5)")


def _add_output(p, formats, default):
    p.add_argument("--format", choices=formats, default=None, help=f"output format (default {default})")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="preloadsim", description="Hybrid-codec preload planning and session simulation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV} if set)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="plan one preload window")
    p.add_argument("--manifest", help="feed manifest (JSON)")
    p.add_argument("--bandwidth", help="bandwidth trace (CSV)")
    p.add_argument("--strategy", choices=("mcts", "brute", "sequential", "fixed"), help="planner (default mcts)")
    p.add_argument("--k", type=int, help="chunks ahead for the fixed strategy (default 2)")
    p.add_argument("--startup-delay", type=int, help="ms until the first chunk is due (default 200)")
    p.add_argument("--video-startup-delay", type=int, help="extra ms before a new video's first chunk (default 0)")
    p.add_argument("--bitrate-rule", choices=sorted(BITRATE_RULES), help="fixed-K bitrate rule")
    _add_planner_flags(p)
    _add_output(p, ("text", "json"), "text")

    p = sub.add_parser("simulate", help="simulate one viewing session")
    p.add_argument("--manifest", help="feed manifest (JSON)")
    p.add_argument("--bandwidth", help="bandwidth trace (CSV)")
    p.add_argument("--session", help="session trace (CSV)")
    p.add_argument("--strategy", help="mcts, sequential, fixed[:K] or hybrid_off (default mcts)")
    _add_planner_flags(p)
    _add_sim_flags(p)
    _add_output(p, ("csv", "json-summary", "event-log"), "csv")

    for name, help_ in (("compare", "compare strategies over a trace suite"), ("sweep", "chunk-size sweep")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--suite", choices=("synthetic", "stress"), help="bundled synthetic suite")
        p.add_argument("--sessions", type=int, help="sessions in the bundled suite")
        p.add_argument("--manifest", help="feed manifest (JSON), instead of a bundled suite")
        p.add_argument("--bandwidth", help="bandwidth trace (CSV) used with --manifest")
        p.add_argument("--session", action="append", help="session trace (CSV); repeatable")
        p.add_argument("--workers", type=int, help="parallel worker processes (default 1)")
        if name == "compare":
            p.add_argument("--strategies", help="comma-separated, first is the baseline (default fixed:2,mcts)")
            _add_output(p, ("csv", "json-summary"), "csv")
        else:
            p.add_argument("--strategy", help="strategy to sweep (default fixed:2)")
            p.add_argument("--scales", type=_floats, help="size factors (default 1.0,0.7,0.5,0.3)")
            _add_output(p, ("csv", "json-summary"), "csv")
        _add_planner_flags(p)
        _add_sim_flags(p)

    p = sub.add_parser("gen", help="write a synthetic feed, bandwidth trace and session traces")
    p.add_argument("--seed", type=int, help="generator seed (default 0)")
    p.add_argument("--out", help="output directory (default ./fixtures)")
    p.add_argument("--videos", type=int, help="videos in the feed (default 5)")
    p.add_argument("--chunks", type=int, help="chunks per video (default 6)")
    p.add_argument("--sessions", type=int, help="session traces to write (default 1)")
    p.add_argument("--pattern", choices=BANDWIDTH_PATTERNS, help="bandwidth pattern (default random-walk)")
    p.add_argument("--swipe-prob", type=float, help="per-chunk swipe probability (default 0.25)")
    return parser


DEFAULTS = {
    "strategy": None,
    "k": 2,
    "horizon": 4,
    "exploration": 0.1,
    "budget": None,
    "time_budget": None,
    "rollout": "greedy",
    "weights": None,
    "seed": 0,
    "startup_delay": 200,
    "video_startup_delay": 0,
    "replan_interval": 500,
    "bitrate_rule": None,
    "predictor_window": 5,
    "format": None,
    "sessions": None,
    "workers": 1,
    "suite": None,
    "strategies": "fixed:2,mcts",
    "scales": [1.0, 0.7, 0.5, 0.3],
    "out": "fixtures",
    "videos": 5,
    "chunks": 6,
    "pattern": "random-walk",
    "swipe_prob": 0.25,
}


def _load_config(path: str | None) -> dict:
    if path is None:
        path = os.environ.get(CONFIG_ENV)
        if not path:
            return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}")
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    out = {}
    for key, value in data.items():
        key = key.replace("-", "_")
        if key == "weights":
            if isinstance(value, dict):
                value = Weights(**value)
            elif isinstance(value, (list, tuple)):
                value = Weights(*value)
            else:
                value = _weights(str(value))
        elif key == "scales" and isinstance(value, str):
            value = _floats(value)
        elif key == "strategies" and isinstance(value, list):
            value = ",".join(value)
        out[key] = value
    return out


def _resolve(args, config: dict):
    """Fill unset flags from the config file, then from built-in defaults."""
    for key, value in vars(args).items():
        if value is None:
            if key in config:
                setattr(args, key, config[key])
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])
    if getattr(args, "weights", None) is None:
        args.weights = Weights()
    return args


def _require_files(args, *names):
    for name in names:
        value = getattr(args, name, None)
        paths = value if isinstance(value, list) else [value]
        for path in paths:
            if path is None:
                raise UsageError(f"--{name} is required")
            if not Path(path).is_file():
                raise UsageError(f"file not found: {path}")


def _planner_config(args, default_budget: int) -> PlannerConfig:
    return PlannerConfig(
        horizon=args.horizon,
        exploration=args.exploration,
        simulation_budget=args.budget or default_budget,
        time_budget_ms=args.time_budget,
        rollout_policy=args.rollout,
        rng_seed=args.seed,
    )


def _sim_config(args, base: SimConfig | None = None) -> SimConfig:
    base = base or SimConfig()
    return SimConfig(
        planner=_planner_config(args, base.planner.simulation_budget),
        startup_delay_ms=args.startup_delay,
        replan_interval_ms=args.replan_interval,
        bitrate_rule=args.bitrate_rule or base.bitrate_rule,
        predictor_window=args.predictor_window,
        master_seed=args.seed,
    )


def _emit(text: str, args):
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _plan_report(plan: Plan, feed, bw, state, w, utility, stats, strategy, note=None) -> dict:
    schedule = evaluate_plan(plan, DeviceModel(), bw, state, feed)
    if utility is None:
        utility = schedule_utility(schedule, feed, w, state)
    doc = {
        "strategy": strategy,
        "utility": utility,
        "total_stall_ms": schedule.total_stall,
        "plan": [{"chunk": str(s.chunk), "variant": s.variant_index} for s in plan.steps],
        "schedule": [
            {
                "chunk": str(t.chunk),
                "variant": t.variant_index,
                "unit": t.decode_unit.value,
                "download_start": t.download_start,
                "download_end": t.download_end,
                "decode_end": t.decode_end,
                "deadline": t.buffer_deadline,
                "playback_start": t.playback_start,
                "stall": t.stall,
                "compute_stall": t.compute_stall,
            }
            for t in schedule.timings
        ],
    }
    if stats is not None:
        doc["stats"] = {
            "simulations": stats.simulations,
            "best_utility": stats.best_utility,
            "best_found_at": stats.best_found_at,
            "nodes": stats.nodes,
            "complete": stats.complete,
            "exhausted": stats.exhausted,
        }
    if note:
        doc["note"] = note
    return doc


def _plan_text(doc: dict) -> str:
    lines = [f"strategy: {doc['strategy']}", f"utility: {doc['utility']:.6f}", f"total_stall_ms: {doc['total_stall_ms']}"]
    if "note" in doc:
        lines.append(f"note: {doc['note']}")
    lines.append("plan: " + " ".join(f"{s['chunk']}/{s['variant']}" for s in doc["plan"]))
    lines.append("chunk  var  unit           dl_end  dec_end  deadline  stall")
    for t in doc["schedule"]:
        lines.append(
            f"{t['chunk']:<6} {t['variant']:>3}  {t['unit']:<13} {t['download_end']:>7}  {t['decode_end']:>7}  {t['deadline']:>8}  {t['stall']:>5}"
        )
    if "stats" in doc:
        lines.append("stats: " + ", ".join(f"{k}={v}" for k, v in doc["stats"].items()))
    return "\n".join(lines) + "\n"


def cmd_plan(args) -> int:
    _require_files(args, "manifest", "bandwidth")
    feed = load_manifest(args.manifest)
    bw = load_bandwidth_trace(args.bandwidth)
    strategy = args.strategy or "mcts"
    w = args.weights
    state = PlaybackState(now=0, startup_delay=args.startup_delay, video_startup_delay=args.video_startup_delay)
    device = DeviceModel()
    stats = None
    utility = None
    code = EXIT_OK
    note = None
    try:
        if strategy == "mcts":
            cfg = _planner_config(args, PlannerConfig().simulation_budget)
            plan, stats = plan_mcts(state, feed, device, bw, w, cfg)
        elif strategy == "brute":
            plan = plan_bruteforce(state, feed, device, bw, w, args.horizon)
        elif strategy == "sequential":
            plan = plan_sequential_baseline(state, feed, device, bw, w, args.horizon)
        else:
            plan = plan_fixed_nextk_baseline(state, feed, args.k, args.bitrate_rule or "highest_fit", bw)
    except InfeasibleAllPruned as exc:
        plan, code = exc.fallback, EXIT_INFEASIBLE
        note = "every first decision stalls decode; emitted the lowest-bitrate in-order fallback"
    doc = _plan_report(plan, feed, bw, state, w, utility, stats, strategy, note)
    fmt = args.format or "text"
    _emit(json.dumps(doc, indent=2) + "\n" if fmt == "json" else _plan_text(doc), args)
    if code == EXIT_INFEASIBLE:
        print(f"infeasible: {note}", file=sys.stderr)
    return code


def cmd_simulate(args) -> int:
    _require_files(args, "manifest", "bandwidth", "session")
    feed = load_manifest(args.manifest)
    bw = load_bandwidth_trace(args.bandwidth)
    trace = load_session_trace(args.session)
    strategy = StrategyId.parse(args.strategy or "mcts")
    cfg = _sim_config(args)
    trace_id = Path(args.session).stem
    result = run_session(feed, bw, trace, strategy, DeviceModel(), args.weights, cfg, trace_id)
    m = result.metrics
    fmt = args.format or "csv"
    if fmt == "event-log":
        text = result.event_log()
    elif fmt == "json-summary":
        doc = {k: v for k, v in vars(m).items() if k != "per_video"}
        doc["strategy"] = str(strategy)
        doc["trace_id"] = trace_id
        doc["per_video"] = [vars(v) for v in m.per_video]
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        row = m.as_row()
        text = ",".join(CSV_COLUMNS) + "\n"
        text += ",".join([str(strategy), trace_id] + [_fmt(row[c]) for c in CSV_COLUMNS[2:]]) + "\n"
    _emit(text, args)
    return EXIT_OK


def _suite(args, stress_default: bool):
    if args.manifest:
        _require_files(args, "manifest", "bandwidth", "session")
        feed = tuple(load_manifest(args.manifest))
        bw = load_bandwidth_trace(args.bandwidth)
        return [SuiteCase(Path(p).stem, feed, bw, load_session_trace(p)) for p in args.session]
    kind = args.suite or ("stress" if stress_default else "synthetic")
    if kind == "stress":
        return stress_suite(args.seed, args.sessions or 10)
    return synthetic_suite(args.seed, args.sessions or 20)


def cmd_compare(args) -> int:
    suite = _suite(args, stress_default=False)
    try:
        strategies = [StrategyId.parse(s) for s in args.strategies.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(str(exc))
    if len(strategies) < 2:
        raise UsageError("--strategies needs at least two entries")
    report = compare_strategies(suite, strategies, args.weights, _sim_config(args), args.workers)
    _emit(report.to_json() if args.format == "json-summary" else report.to_csv(), args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    suite = _suite(args, stress_default=True)
    try:
        strategy = StrategyId.parse(args.strategy or "fixed:2")
    except ValueError as exc:
        raise UsageError(str(exc))
    rows = chunk_size_sweep(suite, strategy, args.scales, args.weights, _sim_config(args, SWEEP_CONFIG), args.workers)
    if args.format == "json-summary":
        base = rows[0]
        doc = [
            {
                "scale": r.scale,
                "stall_ms": r.stall_ms,
                "wasted_bytes": r.wasted_bytes,
                "downloaded_bytes": r.downloaded_bytes,
                "qoe": r.qoe,
                "stall_pct": 100.0 * r.stall_ms / base.stall_ms if base.stall_ms else None,
                "waste_pct": 100.0 * r.wasted_bytes / base.wasted_bytes if base.wasted_bytes else None,
            }
            for r in rows
        ]
        text = json.dumps(doc, indent=2) + "\n"
    else:
        text = sweep_to_csv(rows)
    _emit(text, args)
    return EXIT_OK


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    feed = gen_synthetic_feed(args.seed, args.videos, args.chunks)
    save_manifest(feed, out / "manifest.json")
    save_bandwidth_trace(gen_synthetic_bandwidth(args.seed, args.pattern), out / "bandwidth.csv")
    traces = gen_synthetic_sessions(args.seed, feed, args.sessions or 1, args.swipe_prob)
    for i, trace in enumerate(traces):
        save_session_trace(trace, out / f"session_{i:03d}.csv")
    print(f"wrote {len(traces) + 2} files to {out}")
    return EXIT_OK


COMMANDS = {
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "gen": cmd_gen,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        args = _resolve(args, _load_config(args.config))
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PreloadError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
