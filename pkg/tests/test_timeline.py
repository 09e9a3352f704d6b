import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import FIXTURES, toy_feed
from preloadsim.errors import InvalidPlan, StaleChunk
from preloadsim.model import (
    BandwidthModel,
    Chunk,
    ChunkId,
    ChunkVariant,
    DeviceModel,
    PixelCodec,
    Plan,
    PromptCodec,
    VideoManifest,
)
from preloadsim.timeline import (
    BufferedChunk,
    PlaybackState,
    compute_stall_of,
    compute_stall_value,
    download_duration,
    evaluate_plan,
)

BW1000 = BandwidthModel.constant(1000)
DEV = DeviceModel()


def _feed(variants, n):
    return [VideoManifest("v", tuple(Chunk(ChunkId(0, i), 1000, tuple(variants)) for i in range(n)))]


PIXEL = ChunkVariant(PixelCodec(700), 87500, 0.5, 0)
PROMPT = ChunkVariant(PromptCodec(), 25000, 0.5, 1500)


def test_download_duration_toy_sizes():
    assert download_duration(PIXEL, BW1000, 0) == 700
    assert download_duration(PROMPT, BW1000, 0) == 200


def test_download_duration_piecewise_rounds_up():
    bw = BandwidthModel(((0, 500), (1000, 1500)))
    # 500 kbit in the first second, 500 kbit more at 1500 kbps = 333.3 ms
    assert download_duration(125_000, bw, 0) == 1334


def test_download_duration_rejects_negative_start():
    with pytest.raises(ValueError):
        download_duration(PIXEL, BW1000, -1)


def test_single_pixel_chunk():
    feed = _feed([PIXEL], 1)
    r = evaluate_plan(Plan((((0, 0), 0),)), DEV, BW1000, PlaybackState(startup_delay=1000), feed)
    (t,) = r.timings
    assert (t.download_end, t.decode_end, t.buffer_deadline, t.stall, t.playback_start) == (700, 700, 1000, 0, 1000)


def test_two_prompts_share_neural_unit():
    feed = _feed([PROMPT], 2)
    plan = Plan((((0, 0), 0), ((0, 1), 0)))
    r = evaluate_plan(plan, DEV, BW1000, PlaybackState(startup_delay=1000), feed)
    a, b = r.timings
    assert (a.download_end, b.download_end) == (200, 400)
    assert (a.decode_end, b.decode_end) == (1700, 3200)
    assert a.playback_start == 1700 and b.buffer_deadline == 2700
    assert (a.stall, b.stall) == (700, 500)
    assert r.total_stall == 1200
    assert compute_stall_of(b) == 500


def test_empty_plan():
    r = evaluate_plan(Plan(), DEV, BW1000, PlaybackState(), _feed([PIXEL], 2))
    assert r.timings == () and r.total_stall == 0


def test_compute_stall_examples():
    assert compute_stall_value(700, 0, 700, 1000) == 0
    assert compute_stall_value(400, 1500, 3200, 2700) == 500
    assert compute_stall_value(1500, 0, 1500, 1000) == 0
    # late download, then queued behind another decode
    assert compute_stall_value(1500, 100, 2000, 1000) == 400


def test_stale_and_invalid_plans():
    feed = _feed([PIXEL, PROMPT], 3)
    state = PlaybackState(playhead=ChunkId(0, 1))
    with pytest.raises(StaleChunk):
        evaluate_plan(Plan((((0, 0), 0),)), DEV, BW1000, state, feed)
    with pytest.raises(InvalidPlan):
        evaluate_plan(Plan((((0, 1), 5),)), DEV, BW1000, state, feed)
    buffered = PlaybackState(buffered={ChunkId(0, 0): BufferedChunk(0, 0)})
    with pytest.raises(InvalidPlan):
        evaluate_plan(Plan((((0, 0), 0),)), DEV, BW1000, buffered, feed)


def test_buffered_chunks_set_early_deadlines():
    feed = _feed([PIXEL], 2)
    state = PlaybackState(now=0, startup_delay=0, buffered={ChunkId(0, 0): BufferedChunk(0, 300)})
    r = evaluate_plan(Plan((((0, 1), 0),)), DEV, BW1000, state, feed)
    (t,) = r.timings
    # chunk 0 starts at 300 once decoded, so chunk 1 is due at 1300
    assert t.buffer_deadline == 1300 and t.stall == 0


def test_video_boundary_adds_startup_allowance():
    feed = [
        VideoManifest("a", (Chunk(ChunkId(0, 0), 1000, (PIXEL,)),)),
        VideoManifest("b", (Chunk(ChunkId(1, 0), 1000, (PIXEL,)),)),
    ]
    state = PlaybackState(startup_delay=1000, video_startup_delay=200)
    r = evaluate_plan(Plan((((0, 0), 0), ((1, 0), 0))), DEV, BW1000, state, feed)
    assert [t.buffer_deadline for t in r.timings] == [1000, 2200]


def _golden():
    return json.loads((FIXTURES / "toy_timeline.json").read_text())


@pytest.mark.parametrize("name", list(_golden()["timelines"]))
def test_golden_toy_timelines(name):
    g = _golden()
    case = g["timelines"][name]
    plan = Plan(tuple(((0, c), v) for c, v in case["steps"]))
    state = PlaybackState(now=0, startup_delay=g["startup_delay_ms"])
    r = evaluate_plan(plan, DEV, BandwidthModel.constant(g["bandwidth_kbps"]), state, toy_feed())
    for k, (c, _) in enumerate(case["steps"]):
        t = r.timing(ChunkId(0, c))
        assert t.download_end == case["download_end"][k]
        assert t.decode_end == case["decode_end"][k]
        assert t.buffer_deadline == case["deadline"][k]
        assert t.stall == case["stall"][k]
    assert r.total_stall == sum(case["stall"])


# -- properties ---------------------------------------------------------------

variant_st = st.builds(
    lambda prompt, size, dec, q: ChunkVariant(PromptCodec() if prompt else PixelCodec(500), size, q, dec),
    st.booleans(),
    st.integers(1, 200_000),
    st.integers(0, 2000),
    st.floats(0, 1),
)


@st.composite
def scenario(draw):
    n = draw(st.integers(1, 5))
    variants = [draw(variant_st) for _ in range(n)]
    feed = [
        VideoManifest("v", tuple(Chunk(ChunkId(0, i), draw(st.integers(200, 2000)), (variants[i],)) for i in range(n)))
    ]
    order = draw(st.permutations(list(range(n))))
    plan = Plan(tuple(((0, i), 0) for i in order))
    rates = draw(st.lists(st.integers(100, 5000), min_size=1, max_size=4))
    bw = BandwidthModel(tuple((k * 700, r) for k, r in enumerate(rates)))
    state = PlaybackState(now=draw(st.integers(0, 500)), startup_delay=draw(st.integers(0, 1500)))
    return feed, plan, bw, state


@settings(max_examples=150, deadline=None)
@given(scenario())
def test_unit_serialization_and_work_conservation(sc):
    feed, plan, bw, state = sc
    r = evaluate_plan(plan, DEV, bw, state, feed)
    by_chunk = {t.chunk: t for t in r.timings}
    prev_end = {}
    net = state.now
    for step in plan.steps:
        t = by_chunk[step.chunk]
        assert t.download_start == net
        net = t.download_end
        assert t.download_end == t.download_start + t.download_duration
        start = max(t.download_end, prev_end.get(t.decode_unit, 0))
        assert t.decode_end == start + t.decode_duration
        prev_end[t.decode_unit] = t.decode_end
    for t in r.timings:
        assert t.stall == max(0, t.decode_end - t.buffer_deadline)
        assert t.playback_start == max(t.decode_end, t.buffer_deadline)
    assert r.total_stall == sum(t.stall for t in r.timings)


@settings(max_examples=150, deadline=None)
@given(scenario(), st.integers(0, 4), st.integers(1, 50_000), st.integers(0, 1000))
def test_bigger_or_slower_never_reduces_stall(sc, which, extra_size, extra_decode):
    feed, plan, bw, state = sc
    base = evaluate_plan(plan, DEV, bw, state, feed).total_stall
    video = feed[0]
    k = which % len(video.chunks)
    c = video.chunks[k]
    v = c.variants[0]
    bigger = ChunkVariant(v.codec, v.size + extra_size, v.quality, v.decode_latency + extra_decode)
    chunks = list(video.chunks)
    chunks[k] = Chunk(c.id, c.playout_duration, (bigger,))
    feed2 = [VideoManifest("v", tuple(chunks))]
    assert evaluate_plan(plan, DEV, bw, state, feed2).total_stall >= base


@settings(max_examples=50, deadline=None)
@given(scenario())
def test_evaluation_is_deterministic(sc):
    feed, plan, bw, state = sc
    assert evaluate_plan(plan, DEV, bw, state, feed) == evaluate_plan(plan, DEV, bw, state, feed)


def test_single_unit_in_order_matches_recursion():
    # independent restatement of the recursion on one pipeline from time 0
    sizes = [87500, 25000, 60000, 25000]
    decodes = [0, 1500, 0, 1500]
    feed = [
        VideoManifest(
            "v",
            tuple(
                Chunk(ChunkId(0, i), 1000, (ChunkVariant(PixelCodec(700), s, 0.5, d),))
                for i, (s, d) in enumerate(zip(sizes, decodes))
            ),
        )
    ]
    plan = Plan(tuple(((0, i), 0) for i in range(4)))
    r = evaluate_plan(plan, DEV, BW1000, PlaybackState(startup_delay=0), feed)
    delta = gamma = 0
    beta = 0
    for i, t in enumerate(r.timings):
        delta += sizes[i] * 8 // 1000
        gamma = max(delta, gamma) + decodes[i]
        assert (t.download_end, t.decode_end) == (delta, gamma)
        assert t.stall == max(0, gamma - beta)
        beta = max(gamma, beta) + 1000
