"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict; ``conftest.py`` prints them in the
terminal summary, and running this file directly prints them as well.
"""

import itertools
import json
import math
import random
import time

import pytest

from instances import FIXTURES, fuzz_instance, random_instance, toy_feed
from preloadsim.errors import InfeasibleAllPruned, SpaceTooLarge
from preloadsim.model import BandwidthModel, ChunkId, DeviceModel, Plan, Weights
from preloadsim.planner import (
    PlannerConfig,
    SearchSpace,
    expand,
    plan_bruteforce,
    plan_mcts,
    plan_sequential_baseline,
)
from preloadsim.sim import (
    HYBRID_OFF,
    MCTS,
    SEQUENTIAL,
    FixedNextK,
    chunk_size_sweep,
    compare_strategies,
    run_session,
)
from preloadsim.timeline import PlaybackState, evaluate_plan
from preloadsim.traceio import load_manifest, stress_suite, synthetic_suite

DEV = DeviceModel()
RESULTS = {}


def verdict(n, ok, elapsed, limit, detail):
    ok = bool(ok) and elapsed < limit
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s / {limit:.0f}s) {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def _no_compute_stall(plan, state, feed, bw):
    """Oracle: every download-order prefix evaluated from scratch has zero compute stall."""
    for k in range(1, len(plan.steps) + 1):
        r = evaluate_plan(Plan(plan.steps[:k]), DEV, bw, state, feed)
        if any(t.compute_stall > 0 for t in r.timings):
            return False
    return True


# 1 -------------------------------------------------------------------------------


def test_criterion_1_timelines_exact():
    t0 = time.perf_counter()
    g = json.loads((FIXTURES / "toy_timeline.json").read_text())
    bw = BandwidthModel.constant(g["bandwidth_kbps"])
    state = PlaybackState(now=0, startup_delay=g["startup_delay_ms"])
    mismatches = 0
    cells = 0
    for case in g["timelines"].values():
        plan = Plan(tuple(((0, c), v) for c, v in case["steps"]))
        r = evaluate_plan(plan, DEV, bw, state, toy_feed())
        for k, (c, _) in enumerate(case["steps"]):
            t = r.timing(ChunkId(0, c))
            got = (t.download_end, t.decode_end, t.buffer_deadline, t.stall)
            want = (case["download_end"][k], case["decode_end"][k], case["deadline"][k], case["stall"][k])
            mismatches += sum(a != b for a, b in zip(got, want))
            cells += 4
    ok = verdict(1, mismatches == 0, time.perf_counter() - t0, 1, f"{cells - mismatches}/{cells} timeline values exact")
    assert ok


# 2 -------------------------------------------------------------------------------


def test_criterion_2_toy_out_of_order():
    t0 = time.perf_counter()
    g = json.loads((FIXTURES / "toy_timeline.json").read_text())
    feed = toy_feed(g["window_chunks"])
    bw = BandwidthModel.constant(g["bandwidth_kbps"])
    state = PlaybackState(now=0, startup_delay=g["startup_delay_ms"])
    # every in-order variant assignment, stall-free ones only
    best_in = max(
        sum(a)
        for a in itertools.product((0, 1), repeat=len(feed[0].chunks))
        if evaluate_plan(Plan(tuple(((0, i), v) for i, v in enumerate(a))), DEV, bw, state, feed).total_stall == 0
    )
    plan, _ = plan_mcts(state, feed, DEV, bw, Weights(), PlannerConfig(horizon=8, simulation_budget=5000, rng_seed=0))
    r = evaluate_plan(plan, DEV, bw, state, feed)
    prompts = sum(s.variant_index for s in plan.steps)
    out_of_order = [s.chunk for s in plan.steps] != sorted(s.chunk for s in plan.steps)
    ok = best_in == g["in_order_best_prompts"] == 3 and prompts >= 4 and r.total_stall == 0 and out_of_order
    detail = f"in-order best {best_in} prompts, out-of-order plan {prompts} prompts with stall {r.total_stall} ms"
    assert verdict(2, ok, time.perf_counter() - t0, 5, detail)


# 3 -------------------------------------------------------------------------------


def test_criterion_3_mcts_matches_oracle():
    t0 = time.perf_counter()
    matches = worse = skipped = 0
    for seed in range(100):
        state, feed, dev, bw, w = random_instance(seed, horizon=4, variants=3)
        space = SearchSpace(state, feed, dev, bw, w, 4)
        try:
            brute = plan_bruteforce(state, feed, dev, bw, w, 4)
        except InfeasibleAllPruned:
            # nothing feasible: both planners return the same fallback
            skipped += 1
            matches += 1
            continue
        mcts, _ = plan_mcts(state, feed, dev, bw, w, PlannerConfig(horizon=4, simulation_budget=20_000, rng_seed=seed))
        seq = plan_sequential_baseline(state, feed, dev, bw, w, 4)
        u_b, u_m, u_s = (space.prefix_of(p).utility for p in (brute, mcts, seq))
        matches += math.isclose(u_b, u_m, abs_tol=1e-9)
        worse += u_m < u_s - 1e-9
    ok = matches >= 95 and worse == 0
    detail = f"{matches}/100 match brute force ({skipped} infeasible), {worse} worse than sequential"
    assert verdict(3, ok, time.perf_counter() - t0, 120, detail)


# 4 -------------------------------------------------------------------------------


def test_criterion_4_large_space():
    inst = json.loads((FIXTURES / "reference_instance.json").read_text())
    feed = load_manifest(FIXTURES / inst["manifest"])
    bw = BandwidthModel.constant(inst["bandwidth_kbps"])
    w = Weights(**inst["weights"])
    state = PlaybackState(now=0, startup_delay=inst["startup_delay_ms"], video_startup_delay=inst["video_startup_delay_ms"])
    h = inst["horizon"]
    size = SearchSpace(state, feed, DEV, bw, w, h).space_size()
    refused = False
    try:
        plan_bruteforce(state, feed, DEV, bw, w, h)
    except SpaceTooLarge:
        refused = True
    t0 = time.perf_counter()
    cfg = PlannerConfig(horizon=h, exploration=0.1, simulation_budget=120_000, rng_seed=0)
    plan, stats = plan_mcts(state, feed, DEV, bw, w, cfg)
    elapsed = time.perf_counter() - t0
    want = Plan(tuple(((v, c), r) for v, c, r in inst["optimal_plan"]))
    found = math.isclose(stats.best_utility, inst["optimal_utility"], abs_tol=1e-9)
    ok = size == math.factorial(7) * 6**7 and refused and found and stats.simulations <= 120_000
    detail = (
        f"space {size:,} (~{size:.1e}), brute force refused={refused}, "
        f"optimum {'found' if found else 'missed'} at simulation {stats.best_found_at}"
        f"{' (same plan)' if plan == want else ''}"
    )
    assert verdict(4, ok, elapsed, 60, detail)


# 5 -------------------------------------------------------------------------------


def _surviving_plans(space, rng, full_limit=400, samples=12):
    """All complete survivors of pruning for small spaces, random survivor descents otherwise."""
    if space.space_size() <= full_limit:
        stack = [space.root]
        while stack:
            p = stack.pop()
            kids = expand(space, p)
            if not kids:
                yield p
            stack.extend(kids)
        return
    for _ in range(samples):
        p = space.root
        while kids := expand(space, p):
            p = rng.choice(kids)
        yield p


def test_criterion_5_pruning_soundness():
    t0 = time.perf_counter()
    checked = violations = 0
    for seed in range(1000):
        state, feed, dev, bw, w = fuzz_instance(seed)
        h = random.Random(f"h:{seed}").randint(1, 4)
        space = SearchSpace(state, feed, dev, bw, w, h)
        for prefix in _surviving_plans(space, random.Random(seed)):
            if prefix.depth == 0:
                continue
            checked += 1
            if not _no_compute_stall(space.to_plan(prefix), state, feed, bw):
                violations += 1
    ok = violations == 0 and checked > 1000
    assert verdict(5, ok, time.perf_counter() - t0, 60, f"{checked} surviving plans over 1000 instances, {violations} with compute stall")


# 6 -------------------------------------------------------------------------------


def test_criterion_6_chunk_size_sweep():
    t0 = time.perf_counter()
    rows = chunk_size_sweep(stress_suite(0), FixedNextK(2), scales=(1.0, 0.7, 0.5, 0.3))
    stall = [r.stall_ms for r in rows]
    waste = [r.wasted_bytes for r in rows]
    cut_stall = 100 * (1 - stall[-1] / stall[0])
    cut_waste = 100 * (1 - waste[-1] / waste[0])
    monotone = all(a >= b for a, b in zip(stall, stall[1:])) and all(a >= b for a, b in zip(waste, waste[1:]))
    ok = cut_stall >= 50 and cut_waste >= 50 and monotone
    detail = f"stall -{cut_stall:.1f}%, waste -{cut_waste:.1f}% at scale 0.3, monotone={monotone}"
    assert verdict(6, ok, time.perf_counter() - t0, 120, detail)


# 7 -------------------------------------------------------------------------------


def test_criterion_7_end_to_end():
    t0 = time.perf_counter()
    suite = synthetic_suite(0, sessions=20)
    rep = compare_strategies(suite, [FixedNextK(2), MCTS])
    base, ours = rep.means["fixed:2"], rep.means["mcts"]
    ok = (
        len(suite) >= 20
        and ours["stall_ms"] < base["stall_ms"]
        and ours["wasted_bytes"] < base["wasted_bytes"]
        and ours["qoe"] > base["qoe"]
        and ",ratio_pct," in rep.to_csv()
    )
    r = rep.ratios["mcts"]
    detail = (
        f"mcts/fixed:2 stall {r['stall_ms']:.1f}%, waste {r['wasted_bytes']:.1f}%, "
        f"qoe {ours['qoe']:.2f} vs {base['qoe']:.2f}"
    )
    print(rep.to_csv())
    assert verdict(7, ok, time.perf_counter() - t0, 300, detail)


# 8 -------------------------------------------------------------------------------


def test_criterion_8_conservation_and_determinism():
    t0 = time.perf_counter()
    suite = synthetic_suite(1, sessions=8)
    sessions = broken = 0
    for case in suite:
        for strategy in (MCTS, SEQUENTIAL, FixedNextK(2), HYBRID_OFF):
            m = run_session(case.feed, case.bandwidth, case.session, strategy, trace_id=case.trace_id).metrics
            sessions += 1
            broken += m.downloaded_bytes != m.played_bytes + m.wasted_bytes + m.end_buffered_bytes
    case = suite[0]
    logs = {run_session(case.feed, case.bandwidth, case.session, MCTS, trace_id=case.trace_id).event_log() for _ in range(2)}
    reports = {compare_strategies(suite[:3], [FixedNextK(2), MCTS]).to_csv() for _ in range(2)}
    ok = broken == 0 and len(logs) == 1 and len(reports) == 1
    detail = f"conservation held on {sessions - broken}/{sessions} sessions, identical logs={len(logs) == 1}, reports={len(reports) == 1}"
    assert verdict(8, ok, time.perf_counter() - t0, 60, detail)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
