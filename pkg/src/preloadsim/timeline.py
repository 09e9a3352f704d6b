"""Download / decode / playback timing of a plan.

Downloads run back to back on the single network link in plan order.
Each decode unit is a FIFO queue fed in download-completion order, so a
job on a unit finishes at ``max(download_end, previous finish) + decode``.
Playback follows playback order: a chunk is due when its predecessor
finishes playing and starts at ``max(decode_end, due)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .errors import InvalidPlan, StaleChunk
from .model import (
    BandwidthModel,
    ChunkId,
    ChunkVariant,
    DecodeUnit,
    DeviceModel,
    Feed,
    Plan,
    chunk_at,
    iter_from,
)


@dataclass(frozen=True)
class BufferedChunk:
    """A chunk already fetched (or committed in flight) before planning.

    ``ready_at`` is its (possibly predicted) decode end time.
    """

    variant_index: int
    ready_at: int


@dataclass(frozen=True)
class PlaybackState:
    """Player state at the moment a plan is evaluated.

    ``playhead`` is the first chunk whose playback has not started yet and
    ``startup_delay`` is how long from ``now`` until it is due (the unplayed
    remainder of the current chunk, or the start-up allowance of a video).
    """

    now: int = 0
    playhead: ChunkId = ChunkId(0, 0)
    startup_delay: int = 200
    buffered: Mapping[ChunkId, BufferedChunk] = field(default_factory=dict)
    network_free_at: int | None = None
    unit_free_at: Mapping[DecodeUnit, int] = field(default_factory=dict)
    video_startup_delay: int = 0
    last_quality: float | None = None

    @property
    def download_start(self) -> int:
        if self.network_free_at is None:
            return self.now
        return max(self.now, self.network_free_at)

    @property
    def first_deadline(self) -> int:
        return self.now + self.startup_delay


@dataclass(frozen=True)
class ChunkTiming:
    chunk: ChunkId
    variant_index: int
    decode_unit: DecodeUnit
    download_start: int
    download_duration: int
    download_end: int
    decode_duration: int
    decode_end: int
    buffer_deadline: int
    playback_start: int
    stall: int
    compute_stall: int


@dataclass(frozen=True)
class ScheduleResult:
    timings: tuple[ChunkTiming, ...]
    total_stall: int

    def __len__(self):
        return len(self.timings)

    @property
    def compute_stalls(self) -> tuple[int, ...]:
        return tuple(t.compute_stall for t in self.timings)

    def timing(self, cid: ChunkId) -> ChunkTiming:
        for t in self.timings:
            if t.chunk == cid:
                return t
        raise KeyError(cid)

    def has_compute_stall(self) -> bool:
        return any(t.compute_stall > 0 for t in self.timings)


def _ceil_div(num, den):
    if isinstance(num, int) and isinstance(den, int):
        return -(-num // den)
    q = Fraction(num) / Fraction(den)
    return -(-q.numerator // q.denominator)


def download_duration(variant: ChunkVariant | int, bw: BandwidthModel, start: int) -> int:
    """Whole milliseconds needed to move ``variant.size`` bytes starting at ``start``.

    ``variant`` may also be a plain byte count.
    """
    if start < 0:
        raise ValueError("download start must be >= 0")
    size = variant if isinstance(variant, int) else variant.size
    remaining = size * 8
    samples = bw.samples
    i = max(0, bw.segment_index(start))
    t = start
    while True:
        rate = samples[i][1]
        if not isinstance(rate, int):
            rate = Fraction(rate)
        if i + 1 < len(samples):
            seg_end = samples[i + 1][0]
            capacity = (seg_end - t) * rate
            if capacity < remaining:
                remaining -= capacity
                t = seg_end
                i += 1
                continue
        return t - start + _ceil_div(remaining, rate)


def compute_stall_value(download_end, decode_duration, decode_end, deadline) -> int:
    """Stall attributable to decoding.

    When the download met its deadline, any lateness is the decoder's
    fault.  When the download itself was late, only queueing delay beyond
    ``download_end + decode_duration`` counts.
    """
    if download_end <= deadline:
        return max(0, decode_end - deadline)
    return max(0, decode_end - download_end - decode_duration)


def compute_stall_of(timing: ChunkTiming) -> int:
    return compute_stall_value(
        timing.download_end, timing.decode_duration, timing.decode_end, timing.buffer_deadline
    )


def _check_plan(plan: Plan, device: DeviceModel, state: PlaybackState, feed: Feed):
    plan.validate(feed)
    for step in plan.steps:
        if step.chunk < state.playhead:
            raise StaleChunk(f"chunk {step.chunk} is behind the playhead {state.playhead}")
        if step.chunk in state.buffered:
            raise InvalidPlan(f"chunk {step.chunk} is already buffered")
        variant = chunk_at(feed, step.chunk).variants[step.variant_index]
        if not device.supports(variant):
            raise InvalidPlan(f"device has no {variant.decode_unit.value} unit for {step.chunk}")


def evaluate_plan(
    plan: Plan,
    device: DeviceModel,
    bw: BandwidthModel,
    state: PlaybackState,
    feed: Feed,
) -> ScheduleResult:
    """Predict per-chunk timing for ``plan``.

    Chunks between the playhead and the last planned chunk that are
    neither planned nor buffered are treated as arriving on time, which
    gives the earliest possible deadline for everything behind them.
    """
    _check_plan(plan, device, state, feed)
    if not plan.steps:
        return ScheduleResult((), 0)

    unit_free = dict(state.unit_free_at)
    t = state.download_start
    jobs = {}
    for step in plan.steps:
        variant = chunk_at(feed, step.chunk).variants[step.variant_index]
        d = download_duration(variant, bw, t)
        end = t + d
        unit = variant.decode_unit
        decode_end = max(end, unit_free.get(unit, 0)) + variant.decode_latency
        unit_free[unit] = decode_end
        jobs[step.chunk] = (step.variant_index, unit, t, d, end, variant.decode_latency, decode_end)
        t = end

    last = max(jobs)
    timings = []
    deadline = state.first_deadline
    prev_end = None
    for cid in iter_from(feed, state.playhead):
        chunk = chunk_at(feed, cid)
        if prev_end is not None:
            deadline = prev_end
            if cid.chunk_index == 0:
                deadline += state.video_startup_delay
        if cid in jobs:
            vi, unit, start, d, end, chi, gamma = jobs[cid]
            stall = max(0, gamma - deadline)
            timings.append(
                ChunkTiming(
                    chunk=cid,
                    variant_index=vi,
                    decode_unit=unit,
                    download_start=start,
                    download_duration=d,
                    download_end=end,
                    decode_duration=chi,
                    decode_end=gamma,
                    buffer_deadline=deadline,
                    playback_start=max(gamma, deadline),
                    stall=stall,
                    compute_stall=compute_stall_value(end, chi, gamma, deadline),
                )
            )
            ready = gamma
        elif cid in state.buffered:
            ready = state.buffered[cid].ready_at
        else:
            ready = deadline
        prev_end = max(ready, deadline) + chunk.playout_duration
        if cid == last:
            break
    return ScheduleResult(tuple(timings), sum(x.stall for x in timings))
