"""Seeded generators for desk-scale feeds, bandwidth traces and swipe traces."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from ..model import (
    BandwidthModel,
    Chunk,
    ChunkId,
    SessionTrace,
    VideoManifest,
)
from .profiles import CodecProfile, default_profiles

BANDWIDTH_PATTERNS = ("constant", "step", "sawtooth", "random-walk")


def _rng(kind: str, seed) -> random.Random:
    return random.Random(f"{kind}:{seed}")


def gen_synthetic_feed(
    seed,
    videos: int,
    chunks_per_video: int,
    profiles: tuple[CodecProfile, ...] | None = None,
    chunk_ms: int = 1000,
    size_jitter: float = 0.2,
) -> list[VideoManifest]:
    """Feed whose pixel sizes vary per video (content complexity) and per chunk.

    Prompt levels carry fixed-size embeddings and are not jittered.
    """
    if videos < 1 or chunks_per_video < 1:
        raise ValueError("videos and chunks_per_video must be >= 1")
    if profiles is None:
        profiles = default_profiles()
    rng = _rng("feed", seed)
    feed = []
    for v in range(videos):
        complexity = rng.uniform(1 - size_jitter, 1 + size_jitter)
        chunks = []
        for c in range(chunks_per_video):
            factor = complexity * rng.uniform(0.9, 1.1)
            variants = []
            for profile in profiles:
                for level in profile.levels:
                    jitter = 1.0 if level.bitrate_kbps is None else factor
                    variants.append(level.variant(chunk_ms, jitter))
            pixel = sorted((v_ for v_ in variants if not v_.is_prompt), key=lambda x: x.bitrate_kbps)
            prompt = [v_ for v_ in variants if v_.is_prompt]
            chunks.append(Chunk(ChunkId(v, c), chunk_ms, tuple(pixel + prompt)))
        feed.append(VideoManifest(f"v{v:03d}", tuple(chunks)))
    return feed


def gen_synthetic_bandwidth(
    seed,
    pattern: str = "random-walk",
    *,
    kbps: int = 1000,
    low: int = 300,
    high: int = 3000,
    period_ms: int = 4000,
    interval_ms: int = 500,
    samples: int = 240,
    max_step: float = 0.3,
) -> BandwidthModel:
    if pattern not in BANDWIDTH_PATTERNS:
        raise ValueError(f"unknown bandwidth pattern {pattern!r}; choose from {BANDWIDTH_PATTERNS}")
    if pattern == "constant":
        return BandwidthModel.constant(kbps)
    if not 0 < low <= high:
        raise ValueError("need 0 < low <= high")
    if pattern == "step":
        n = max(2, samples * interval_ms // period_ms)
        return BandwidthModel(tuple((i * period_ms, high if i % 2 == 0 else low) for i in range(n)))
    if pattern == "sawtooth":
        steps = max(2, period_ms // interval_ms)
        return BandwidthModel(
            tuple(
                (i * interval_ms, round(low + (high - low) * (i % steps) / (steps - 1)))
                for i in range(samples)
            )
        )
    rng = _rng("bandwidth", seed)
    rate = rng.uniform(low, high)
    out = []
    for i in range(samples):
        out.append((i * interval_ms, min(high, max(low, round(rate)))))
        rate = min(high, max(low, rate * math.exp(rng.uniform(-max_step, max_step))))
    return BandwidthModel(tuple(out))


def gen_synthetic_sessions(seed, feed, count: int = 1, swipe_prob: float = 0.25) -> list[SessionTrace]:
    """Watch-through traces with truncated-geometric retention.

    At each chunk the viewer leaves with probability ``swipe_prob``,
    somewhere inside that chunk; surviving every chunk means a full watch.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 0 <= swipe_prob <= 1:
        raise ValueError("swipe_prob must be in [0, 1]")
    rng = _rng("sessions", seed)
    traces = []
    for _ in range(count):
        entries = []
        for video in feed:
            watched = 0
            for chunk in video.chunks:
                if rng.random() < swipe_prob:
                    watched += rng.randrange(chunk.playout_duration)
                    break
                watched += chunk.playout_duration
            entries.append((video.video_id, watched))
        traces.append(SessionTrace(tuple(entries)))
    return traces


@dataclass(frozen=True)
class SuiteCase:
    trace_id: str
    feed: tuple[VideoManifest, ...]
    bandwidth: BandwidthModel
    session: SessionTrace


def synthetic_suite(
    seed=0,
    sessions: int = 20,
    videos: int = 5,
    chunks_per_video: int = 6,
    low: int = 250,
    high: int = 2000,
    swipe_prob: float = 0.25,
    patterns=("random-walk", "sawtooth", "step", "random-walk"),
) -> list[SuiteCase]:
    """Sessions cycling through bandwidth patterns, each with its own feed and swipes."""
    cases = []
    for i in range(sessions):
        sub = f"{seed}/{i}"
        pattern = patterns[i % len(patterns)]
        feed = tuple(gen_synthetic_feed(sub, videos, chunks_per_video))
        bw = gen_synthetic_bandwidth(
            sub, pattern, low=low, high=high, period_ms=4000 + 1000 * (i % 3), samples=400
        )
        session = gen_synthetic_sessions(sub, feed, 1, swipe_prob)[0]
        cases.append(SuiteCase(f"s{i:03d}-{pattern}", feed, bw, session))
    return cases


def stress_suite(seed=0, sessions: int = 10) -> list[SuiteCase]:
    """Low-bandwidth sessions where chunk size is the bottleneck."""
    return synthetic_suite(seed, sessions, low=120, high=700, swipe_prob=0.3)
