import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import FIXTURES
from preloadsim.errors import InvalidManifest, ParseError
from preloadsim.model import BandwidthModel, DecodeUnit, SessionTrace, validate_manifest
from preloadsim.traceio import (
    KEYFRAME_TABLE,
    default_profiles,
    dumps_bandwidth_trace,
    dumps_manifest,
    dumps_session_trace,
    gen_synthetic_bandwidth,
    gen_synthetic_feed,
    gen_synthetic_sessions,
    load_bandwidth_trace,
    load_manifest,
    loads_bandwidth_trace,
    loads_manifest,
    loads_session_trace,
    save_manifest,
    stress_suite,
    synthetic_suite,
)

# -- manifests --------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 6))
def test_manifest_round_trip(seed, videos, chunks):
    feed = gen_synthetic_feed(seed, videos, chunks)
    text = dumps_manifest(feed)
    assert loads_manifest(text) == feed
    assert dumps_manifest(loads_manifest(text)) == text


def test_manifest_file_round_trip(tmp_path):
    feed = gen_synthetic_feed(5, 2, 3)
    path = tmp_path / "m.json"
    save_manifest(feed, path)
    assert load_manifest(path) == feed


def test_generated_manifests_validate():
    for video in gen_synthetic_feed(11, 4, 8):
        assert validate_manifest(video) == []


def _doc():
    return json.loads(dumps_manifest(gen_synthetic_feed(1, 1, 2)))


def test_missing_variants_names_chunk():
    doc = _doc()
    del doc["videos"][0]["chunks"][1]["variants"]
    with pytest.raises(ParseError) as exc:
        loads_manifest(json.dumps(doc))
    assert "chunk 1" in str(exc.value) and exc.value.field == "variants"


def test_bad_json_reports_line():
    with pytest.raises(ParseError) as exc:
        loads_manifest('{\n  "schema_version": 1,\n  oops\n}')
    assert exc.value.line == 3


def test_wrong_schema_version():
    doc = _doc()
    doc["schema_version"] = 99
    with pytest.raises(ParseError):
        loads_manifest(json.dumps(doc))


def test_loader_lists_all_violations():
    doc = _doc()
    v = doc["videos"][0]["chunks"][0]["variants"]
    v[0]["size"] = 0
    v[1]["quality"] = 2.0
    doc["videos"][0]["chunks"][1]["variants"] = []
    with pytest.raises(InvalidManifest) as exc:
        loads_manifest(json.dumps(doc))
    text = "\n".join(exc.value.violations)
    assert "non-positive size" in text and "quality outside" in text and "empty variants" in text


def test_loader_rejects_misrouted_prompt():
    doc = _doc()
    doc["videos"][0]["chunks"][0]["variants"][-1]["decode_unit"] = "VIDEO_DECODER"
    with pytest.raises(InvalidManifest):
        loads_manifest(json.dumps(doc))


def test_loader_rejects_duplicate_video_ids():
    doc = json.loads(dumps_manifest(gen_synthetic_feed(1, 2, 1)))
    doc["videos"][1]["video_id"] = doc["videos"][0]["video_id"]
    with pytest.raises(InvalidManifest):
        loads_manifest(json.dumps(doc))


def test_bundled_fixtures_load():
    assert len(load_manifest(FIXTURES / "reference_manifest.json")) == 2
    assert load_bandwidth_trace(FIXTURES / "toy_bandwidth.csv") == BandwidthModel.constant(1000)


# -- bandwidth traces ----------------------------------------------------------------


def test_two_line_trace():
    bw = loads_bandwidth_trace("0,1000\n5000,500")
    assert bw.samples == ((0, 1000), (5000, 500))


def test_header_is_optional():
    assert loads_bandwidth_trace("timestamp_ms,throughput_kbps\n0,1000\n") == loads_bandwidth_trace("0,1000")


@pytest.mark.parametrize(
    "text",
    ["", "\n\n", "0,-5", "0,0", "0,1000\n0,900", "0,1000\n500,900\n400,800", "10,1000", "0,abc", "0", "x,1000"],
)
def test_bad_bandwidth_traces(text):
    with pytest.raises(ParseError):
        loads_bandwidth_trace(text)


def test_nonmonotonic_reports_line():
    with pytest.raises(ParseError) as exc:
        loads_bandwidth_trace("0,1000\n500,900\n400,800")
    assert exc.value.line == 3


bw_st = st.lists(
    st.tuples(st.integers(1, 10_000), st.one_of(st.integers(1, 10**6), st.floats(0.001, 1e6, allow_nan=False))),
    min_size=1,
    max_size=20,
).map(lambda xs: BandwidthModel(tuple((sum(d for d, _ in xs[:i]) - xs[0][0], r) for i, (_, r) in enumerate(xs, 1))))


@given(bw_st)
def test_bandwidth_round_trip(bw):
    assert loads_bandwidth_trace(dumps_bandwidth_trace(bw)) == bw


# -- session traces --------------------------------------------------------------


def test_session_trace_parse():
    trace = loads_session_trace("video_id,watch_ms\nv000,1500\nv001,0\n")
    assert trace == SessionTrace((("v000", 1500), ("v001", 0)))


@pytest.mark.parametrize("text", ["", "v000,-1", "v000,abc", ",100", "v000,1,2"])
def test_bad_session_traces(text):
    with pytest.raises(ParseError):
        loads_session_trace(text)


session_st = st.lists(
    st.tuples(
        st.text(st.characters(blacklist_characters=",", blacklist_categories=("Cc", "Cs", "Zs", "Zl", "Zp")), min_size=1, max_size=8),
        st.integers(0, 10**7),
    ),
    min_size=1,
    max_size=10,
).filter(lambda xs: xs[0][0] != "video_id")


@given(session_st)
def test_session_round_trip(entries):
    trace = SessionTrace(tuple(entries))
    assert loads_session_trace(dumps_session_trace(trace)) == trace


def test_unwritable_session_id():
    with pytest.raises(ValueError):
        dumps_session_trace(SessionTrace((("a,b", 1),)))


# -- profiles ----------------------------------------------------------------------


def test_default_profiles_follow_keyframe_table():
    pixel, prompt = default_profiles()
    rates = [lvl.bitrate_kbps for lvl in pixel.levels]
    assert rates == [200, 400, 600, 900, 1200]
    for lvl in pixel.levels:
        if lvl.bitrate_kbps in KEYFRAME_TABLE:
            assert lvl.quality == round(1 - KEYFRAME_TABLE[lvl.bitrate_kbps][2], 3)
        assert lvl.decode_latency_per_second == 1
        assert lvl.decode_unit is DecodeUnit.VIDEO_DECODER
    qualities = [lvl.quality for lvl in pixel.levels]
    assert qualities == sorted(qualities)
    assert qualities[-1] == 0.546
    (p,) = prompt.levels
    assert p.quality == 0.541
    assert p.decode_unit is DecodeUnit.NEURAL_ACCEL
    v = p.variant(1000)
    assert v.size == 8800 + 200 and v.decode_latency == 1500


def test_interpolated_900kbps_quality():
    pixel, _ = default_profiles()
    lvl = next(lvl for lvl in pixel.levels if lvl.bitrate_kbps == 900)
    assert lvl.quality == round(1 - (0.494 + 0.454) / 2, 3)


def test_pixel_sizes_follow_bitrate():
    pixel, _ = default_profiles()
    assert [v.size for v in pixel.variants(1000)] == [25000, 50000, 75000, 112500, 150000]


# -- generators ----------------------------------------------------------------------


def test_same_seed_same_feed():
    assert gen_synthetic_feed(3, 2, 4) == gen_synthetic_feed(3, 2, 4)
    assert gen_synthetic_feed(3, 2, 4) != gen_synthetic_feed(4, 2, 4)


def test_generator_rejects_zero_counts():
    with pytest.raises(ValueError):
        gen_synthetic_feed(0, 0, 1)
    with pytest.raises(ValueError):
        gen_synthetic_sessions(0, gen_synthetic_feed(0, 1, 1), count=0)


def test_constant_bandwidth_is_single_sample():
    assert gen_synthetic_bandwidth(0, "constant", kbps=1000).samples == ((0, 1000),)


def test_random_walk_stays_in_bounds():
    bw = gen_synthetic_bandwidth(1, "random-walk", low=300, high=900, samples=10_000)
    assert len(bw.samples) == 10_000
    assert all(300 <= r <= 900 for _, r in bw.samples)


@pytest.mark.parametrize("pattern", ["step", "sawtooth", "random-walk"])
def test_patterns_are_bounded_and_deterministic(pattern):
    a = gen_synthetic_bandwidth(2, pattern, low=200, high=1800)
    assert a == gen_synthetic_bandwidth(2, pattern, low=200, high=1800)
    assert all(200 <= r <= 1800 for _, r in a.samples)


def test_unknown_pattern():
    with pytest.raises(ValueError):
        gen_synthetic_bandwidth(0, "square")


def test_sessions_follow_feed_and_retention():
    feed = gen_synthetic_feed(0, 6, 5)
    traces = gen_synthetic_sessions(0, feed, count=50, swipe_prob=0.3)
    for trace in traces:
        assert [e.video_id for e in trace] == [v.video_id for v in feed]
        for e, v in zip(trace, feed):
            assert 0 <= e.watch_duration <= v.duration
    full = gen_synthetic_sessions(0, feed, count=3, swipe_prob=0.0)
    assert all(e.watch_duration == v.duration for t in full for e, v in zip(t, feed))
    none = gen_synthetic_sessions(0, feed, count=3, swipe_prob=1.0)
    assert all(e.watch_duration < v.chunks[0].playout_duration for t in none for e, v in zip(t, feed))


def test_suites_are_deterministic_and_sized():
    a = synthetic_suite(0, sessions=20)
    assert len(a) == 20 and a == synthetic_suite(0, sessions=20)
    assert len({c.trace_id for c in a}) == 20
    assert len(stress_suite(0)) == 10
