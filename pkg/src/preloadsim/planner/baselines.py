"""Comparator strategies and the bandwidth predictor."""

from __future__ import annotations

from typing import Callable, Iterable

from ..model import (
    BandwidthModel,
    Chunk,
    ChunkId,
    DeviceModel,
    Feed,
    Plan,
    PlanStep,
    Weights,
)
from ..timeline import PlaybackState, download_duration
from .mcts import greedy_step
from .space import SearchSpace

PREDICTOR_WINDOW = 5


def harmonic_mean(values: Iterable[float]) -> float:
    values = list(values)
    if not values:
        raise ValueError("harmonic mean of no samples")
    return len(values) / sum(1.0 / v for v in values)


def predict_bandwidth(samples_kbps: Iterable[float], window: int = PREDICTOR_WINDOW) -> BandwidthModel:
    """Constant model at the harmonic mean of the last ``window`` samples, floored to whole kbps."""
    recent = list(samples_kbps)[-window:]
    return BandwidthModel.constant(max(1, int(harmonic_mean(recent))))


def trace_samples_until(bw: BandwidthModel, now: int) -> list[float]:
    return [r for t, r in bw.samples if t <= now]


def plan_sequential_baseline(
    state: PlaybackState,
    feed: Feed,
    device: DeviceModel,
    bw: BandwidthModel,
    w: Weights,
    horizon: int,
) -> Plan:
    """Download in playback order, each chunk at its best non-stalling variant.

    A chunk with no compute-stall-free variant gets its lowest-bitrate
    pixel variant.
    """
    space = SearchSpace(state, feed, device, bw, w, horizon)
    prefix = space.root
    for pos in space.decisions:
        nxt = greedy_step(space, prefix, pos, None)
        if nxt is None:
            vi = space.chunks[pos].lowest_pixel_index()
            if vi not in space.static[pos]:
                vi = space.candidates[pos][0]
            nxt = space.extend(prefix, pos, vi, prune=False)
        prefix = nxt
    return space.to_plan(prefix)


BitrateRule = Callable[[Chunk, BandwidthModel, int], int]


def highest_fit(chunk: Chunk, bw: BandwidthModel, start: int) -> int:
    """Highest pixel bitrate that downloads within one playout duration, else the lowest."""
    best = chunk.lowest_pixel_index()
    best_rate = chunk.variants[best].bitrate_kbps or 0
    for i, v in enumerate(chunk.variants):
        if v.is_prompt:
            continue
        if download_duration(v, bw, start) <= chunk.playout_duration and v.bitrate_kbps > best_rate:
            best, best_rate = i, v.bitrate_kbps
    return best


def lowest(chunk: Chunk, bw: BandwidthModel, start: int) -> int:
    return chunk.lowest_pixel_index()


def highest(chunk: Chunk, bw: BandwidthModel, start: int) -> int:
    pixel = [(v.bitrate_kbps, i) for i, v in enumerate(chunk.variants) if not v.is_prompt]
    return max(pixel)[1] if pixel else chunk.lowest_pixel_index()


BITRATE_RULES: dict[str, BitrateRule] = {
    "highest_fit": highest_fit,
    "lowest": lowest,
    "highest": highest,
}


def plan_fixed_nextk_baseline(
    state: PlaybackState,
    feed: Feed,
    k: int,
    bitrate_rule: str | BitrateRule = "highest_fit",
    bw: BandwidthModel | None = None,
) -> Plan:
    """Preload up to ``k`` chunks of the current video plus the next video's first chunk.

    Pixel variants only; already-buffered chunks are skipped.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rule = BITRATE_RULES[bitrate_rule] if isinstance(bitrate_rule, str) else bitrate_rule
    if bw is None:
        bw = BandwidthModel.constant(10**9)
    head = state.playhead
    window = []
    if head.video_index < len(feed):
        video = feed[head.video_index]
        for c in range(head.chunk_index, min(head.chunk_index + k, len(video.chunks))):
            window.append(ChunkId(head.video_index, c))
        if head.video_index + 1 < len(feed) and feed[head.video_index + 1].chunks:
            window.append(ChunkId(head.video_index + 1, 0))
    steps = []
    t = state.download_start
    for cid in window:
        if cid in state.buffered:
            continue
        chunk = feed[cid.video_index].chunks[cid.chunk_index]
        vi = rule(chunk, bw, t)
        t += download_duration(chunk.variants[vi], bw, t)
        steps.append(PlanStep(cid, vi))
    return Plan(tuple(steps))


def fallback_plan(state: PlaybackState, feed: Feed, device: DeviceModel, horizon: int) -> Plan:
    return SearchSpace(state, feed, device, BandwidthModel.constant(1), Weights(), horizon).fallback()
