"""Discrete-event playback of a feed against bandwidth and swipe traces.

The engine owns the ground truth: downloads progress at the traced
throughput, decodes run on the device's serial units and playback follows
the viewer's swipe trace.  Strategies only see a :class:`PlaybackState`
and a bandwidth prediction built from completed downloads.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from enum import IntEnum

from ..errors import TraceMismatch
from ..model import (
    BandwidthModel,
    ChunkId,
    DeviceModel,
    Feed,
    Plan,
    SessionTrace,
    Weights,
    chunk_at,
    without_prompts,
)
from ..planner import predict_bandwidth, trace_samples_until
from ..scoring import ChunkMetrics, chunk_score
from ..timeline import BufferedChunk, PlaybackState, download_duration
from .strategies import SimConfig, StrategyId, make_planner

MAX_EVENTS = 2_000_000


class EventKind(IntEnum):
    # value order is the tie-break order for simultaneous events
    DownloadComplete = 0
    DecodeComplete = 1
    ChunkPlaybackDue = 2
    Swipe = 3
    ReplanTimer = 4
    SessionEnd = 5


_NO_CHUNK = ChunkId(-1, -1)


@dataclass(frozen=True)
class LogRecord:
    time: int
    kind: str
    chunk: str | None
    unit: str | None

    def to_json(self) -> str:
        return json.dumps(
            {"time": self.time, "kind": self.kind, "chunk": self.chunk, "unit": self.unit},
            separators=(",", ":"),
        )


def dumps_event_log(log) -> str:
    return "".join(r.to_json() + "\n" for r in log)


@dataclass(frozen=True)
class PlayedChunk:
    chunk: ChunkId
    variant_index: int
    deadline: int
    decode_end: int
    playback_start: int
    stall: int
    quality: float
    size: int
    is_prompt: bool


@dataclass(frozen=True)
class VideoMetrics:
    video_id: str
    played_chunks: int
    rebuffer_ms: int
    startup_ms: int
    downloaded_bytes: int
    wasted_bytes: int
    qoe: float


@dataclass(frozen=True)
class SessionMetrics:
    total_stall: int
    rebuffer_ms: int
    startup_ms: int
    wasted_bytes: int
    downloaded_bytes: int
    played_bytes: int
    end_buffered_bytes: int
    mean_quality: float
    quality_switches: int
    qoe: float
    played_chunks: int
    prompt_chunks_played: int
    emergency_fetches: int
    replans: int
    per_video: tuple[VideoMetrics, ...] = ()

    def as_row(self) -> dict:
        return {
            "stall_ms": self.total_stall,
            "wasted_bytes": self.wasted_bytes,
            "downloaded_bytes": self.downloaded_bytes,
            "mean_quality": self.mean_quality,
            "qoe": self.qoe,
        }


@dataclass
class SessionResult:
    metrics: SessionMetrics
    log: list[LogRecord]
    played: list[PlayedChunk] = field(default_factory=list)

    def event_log(self) -> str:
        return dumps_event_log(self.log)


def session_seed(master_seed, trace_id, strategy) -> str:
    return f"{master_seed}:{trace_id}:{strategy}"


class _Session:
    def __init__(self, feed, bw, trace, strategy, device, w, cfg, trace_id):
        if isinstance(strategy, StrategyId) and strategy.kind == "hybrid_off":
            feed = without_prompts(feed)
        if len(trace) > len(feed):
            raise TraceMismatch(f"trace has {len(trace)} videos but feed only {len(feed)}")
        for k, entry in enumerate(trace):
            if entry.video_id != feed[k].video_id:
                raise TraceMismatch(
                    f"trace entry {k} is {entry.video_id!r}, feed has {feed[k].video_id!r}"
                )
        for video in feed:
            for chunk in video.chunks:
                for v in chunk.variants:
                    if not device.supports(v):
                        raise TraceMismatch(f"device cannot decode a variant of {chunk.id}")
        self.feed = feed
        self.bw = bw
        self.trace = trace
        self.device = device
        self.w = w
        self.cfg = cfg
        self.rng = random.Random(session_seed(cfg.master_seed, trace_id, strategy))
        self.planner = make_planner(strategy, cfg, lambda: self.rng.getrandbits(32))

        self.now = 0
        self.events = []
        self.seq = 0
        self.log: list[LogRecord] = []
        self.done = False

        self.plan: list = []
        self.replans = 0
        self.throughputs: list[float] = []

        # network
        self.in_flight = None  # (chunk, variant_index, start, end, token)
        self.token = 0
        self.completed: dict[ChunkId, int] = {}
        self.partial_bytes: list[tuple[ChunkId, int]] = []
        self.emergency: set[ChunkId] = set()
        self.emergency_fetches = 0

        # decode units
        self.unit_busy: dict = {}  # unit -> (chunk, end)
        self.unit_queue: dict = {u: [] for u in device.decode_units}
        self.decoded: dict[ChunkId, int] = {}
        self.cancelled_decodes: set[ChunkId] = set()

        # playback
        self.video = 0
        self.video_start = 0
        self.playing = None  # (chunk, start, end)
        self.waiting = None  # (chunk, deadline)
        self.next_due = None  # (chunk, deadline)
        self.played: list[PlayedChunk] = []
        self.startup: dict[int, int] = {}

    # -- event queue -------------------------------------------------------
    def push(self, time, kind, chunk=None, payload=None):
        self.seq += 1
        heapq.heappush(
            self.events, (time, int(kind), chunk or _NO_CHUNK, self.seq, kind, chunk, payload)
        )

    def record(self, kind, chunk=None, unit=None):
        self.log.append(
            LogRecord(self.now, kind.name, str(chunk) if chunk is not None else None, unit)
        )

    # -- helpers ---------------------------------------------------------------
    def variant(self, cid, vi):
        return chunk_at(self.feed, cid).variants[vi]

    def offset_of(self, cid):
        video = self.feed[cid.video_index]
        return sum(c.playout_duration for c in video.chunks[: cid.chunk_index])

    def playhead(self):
        """First chunk not yet started and how long until it is due."""
        startup = self.cfg.startup_delay_ms
        if self.waiting is not None:
            return self.waiting[0], 0
        if self.next_due is not None:
            cid, due = self.next_due
            return cid, max(0, due - self.now)
        if self.playing is not None:
            cid, _, end = self.playing
            video = self.feed[cid.video_index]
            if cid.chunk_index + 1 < len(video.chunks):
                return ChunkId(cid.video_index, cid.chunk_index + 1), max(0, end - self.now)
            return ChunkId(cid.video_index + 1, 0), max(0, end - self.now) + startup
        return ChunkId(self.video, 0), startup

    def predicted_bandwidth(self) -> BandwidthModel:
        samples = self.throughputs or trace_samples_until(self.bw, self.now)
        return predict_bandwidth(samples, self.cfg.predictor_window)

    def build_state(self, bw_pred: BandwidthModel) -> PlaybackState:
        head, until_due = self.playhead()
        buffered = {}
        unit_free = {}
        # decode queue as the player predicts it: known latencies, FIFO
        for unit in self.device.decode_units:
            t = self.now
            busy = self.unit_busy.get(unit)
            if busy is not None:
                cid, end = busy
                t = end
                buffered[cid] = end
            for cid, ready_at in self.unit_queue[unit]:
                vi = self.completed[cid]
                t = max(t, ready_at) + self.variant(cid, vi).decode_latency
                buffered[cid] = t
            unit_free[unit] = t
        net_free = self.now
        if self.in_flight is not None:
            cid, vi, start, _, _ = self.in_flight
            v = self.variant(cid, vi)
            got = int(self.bw.bits_between(start, self.now)) // 8
            left = max(1, v.size - got)
            net_free = self.now + download_duration(left, bw_pred, 0)
            u = v.decode_unit
            gamma = max(net_free, unit_free.get(u, 0)) + v.decode_latency
            unit_free[u] = gamma
            buffered[cid] = gamma
        out = {}
        for cid, vi in self.completed.items():
            if cid >= head:
                ready = self.decoded.get(cid)
                if ready is None:
                    ready = buffered[cid]
                out[cid] = BufferedChunk(vi, ready)
        if self.in_flight is not None and self.in_flight[0] >= head:
            out[self.in_flight[0]] = BufferedChunk(self.in_flight[1], buffered[self.in_flight[0]])
        last_q = None
        if self.played:
            last = self.played[-1]
            if last.chunk.video_index == head.video_index and last.chunk.chunk_index + 1 == head.chunk_index:
                last_q = last.quality
        return PlaybackState(
            now=self.now,
            playhead=head,
            startup_delay=until_due,
            buffered=out,
            network_free_at=net_free,
            unit_free_at=unit_free,
            video_startup_delay=self.cfg.startup_delay_ms,
            last_quality=last_q,
        )

    # -- decisions ---------------------------------------------------------
    def replan(self):
        head, _ = self.playhead()
        if head.video_index >= len(self.feed):
            self.plan = []
            return
        bw_pred = self.predicted_bandwidth()
        state = self.build_state(bw_pred)
        plan: Plan = self.planner(state, self.feed, bw_pred, self.device, self.w)
        self.plan = list(plan.steps)
        self.replans += 1

    def dispatch(self):
        if self.in_flight is not None or self.done:
            return
        head, _ = self.playhead()
        for cid in sorted(self.emergency):
            if cid not in self.completed:
                chunk = chunk_at(self.feed, cid)
                self.start_download(cid, chunk.lowest_pixel_index())
                self.emergency_fetches += 1
                self.emergency.discard(cid)
                return
        while self.plan:
            step = self.plan.pop(0)
            if step.chunk in self.completed or step.chunk < head:
                continue
            self.start_download(step.chunk, step.variant_index)
            return

    def start_download(self, cid, vi):
        v = self.variant(cid, vi)
        end = self.now + download_duration(v, self.bw, self.now)
        self.token += 1
        self.in_flight = (cid, vi, self.now, end, self.token)
        self.push(end, EventKind.DownloadComplete, cid, self.token)

    def abandon_stale(self):
        """Drop network and decode work for videos the viewer has left."""
        if self.in_flight is not None and self.in_flight[0].video_index < self.video:
            cid, vi, start, _, _ = self.in_flight
            got = min(self.variant(cid, vi).size, int(self.bw.bits_between(start, self.now)) // 8)
            self.partial_bytes.append((cid, got))
            self.in_flight = None
        for unit, queue in self.unit_queue.items():
            keep = []
            for cid, ready_at in queue:
                if cid.video_index < self.video:
                    self.cancelled_decodes.add(cid)
                else:
                    keep.append((cid, ready_at))
            self.unit_queue[unit] = keep
        self.emergency = {c for c in self.emergency if c.video_index >= self.video}

    # -- decode units --------------------------------------------------------
    def enqueue_decode(self, cid, vi):
        unit = self.variant(cid, vi).decode_unit
        if self.unit_busy.get(unit) is None:
            self.start_decode(unit, cid, vi)
        else:
            self.unit_queue[unit].append((cid, self.now))

    def start_decode(self, unit, cid, vi):
        end = self.now + self.variant(cid, vi).decode_latency
        self.unit_busy[unit] = (cid, end)
        self.push(end, EventKind.DecodeComplete, cid, unit)

    # -- playback ------------------------------------------------------------
    def start_video(self):
        self.video_start = self.now
        entry = self.trace.entries[self.video]
        if entry.watch_duration == 0:
            self.push(self.now, EventKind.Swipe, ChunkId(self.video, 0))
            return
        first = ChunkId(self.video, 0)
        due = self.now + self.cfg.startup_delay_ms
        self.next_due = (first, due)
        self.push(due, EventKind.ChunkPlaybackDue, first, due)

    def begin_playback(self, cid, deadline):
        vi = self.completed[cid]
        v = self.variant(cid, vi)
        chunk = chunk_at(self.feed, cid)
        gamma = self.decoded[cid]
        start = max(gamma, deadline)
        self.played.append(
            PlayedChunk(cid, vi, deadline, gamma, start, max(0, gamma - deadline), v.quality, v.size, v.is_prompt)
        )
        if cid.chunk_index == 0:
            self.startup[cid.video_index] = self.cfg.startup_delay_ms
        self.waiting = None
        self.next_due = None
        end = start + chunk.playout_duration
        self.playing = (cid, start, end)
        watch = self.trace.entries[cid.video_index].watch_duration
        offset = self.offset_of(cid)
        video = self.feed[cid.video_index]
        last = cid.chunk_index + 1 == len(video.chunks)
        if watch <= offset + chunk.playout_duration or last:
            swipe_at = start + min(watch, offset + chunk.playout_duration) - offset
            self.push(swipe_at, EventKind.Swipe, cid)
        else:
            nxt = ChunkId(cid.video_index, cid.chunk_index + 1)
            self.next_due = (nxt, end)
            self.push(end, EventKind.ChunkPlaybackDue, nxt, end)

    # -- handlers --------------------------------------------------------------
    def on_download_complete(self, cid, token):
        cid_, vi, start, end, _ = self.in_flight
        self.in_flight = None
        self.completed[cid] = vi
        size = self.variant(cid, vi).size
        self.throughputs.append(size * 8 / max(1, end - start))
        self.record(EventKind.DownloadComplete, cid, "NETWORK")
        if cid.video_index >= self.video:
            self.enqueue_decode(cid, vi)
        self.replan()
        self.dispatch()

    def on_decode_complete(self, cid, unit):
        self.record(EventKind.DecodeComplete, cid, unit.value)
        self.unit_busy[unit] = None
        if cid not in self.cancelled_decodes:
            self.decoded[cid] = self.now
        queue = self.unit_queue[unit]
        if queue:
            nxt, _ = queue.pop(0)
            self.start_decode(unit, nxt, self.completed[nxt])
        if self.waiting is not None and self.waiting[0] == cid:
            self.begin_playback(cid, self.waiting[1])

    def on_playback_due(self, cid, deadline):
        self.record(EventKind.ChunkPlaybackDue, cid, None)
        if cid in self.decoded:
            self.begin_playback(cid, deadline)
            return
        self.next_due = None
        self.playing = None
        self.waiting = (cid, deadline)
        in_flight = self.in_flight is not None and self.in_flight[0] == cid
        if cid not in self.completed and not in_flight:
            self.emergency.add(cid)
            self.dispatch()

    def on_swipe(self, cid):
        self.record(EventKind.Swipe, cid, None)
        self.playing = None
        self.next_due = None
        self.waiting = None
        self.video += 1
        self.abandon_stale()
        if self.video >= len(self.trace):
            self.push(self.now, EventKind.SessionEnd)
            self.done = True
            return
        self.start_video()
        self.replan()
        self.dispatch()

    def on_timer(self):
        self.record(EventKind.ReplanTimer)
        self.push(self.now + self.cfg.replan_interval_ms, EventKind.ReplanTimer)
        if self.in_flight is None:
            self.replan()
            self.dispatch()

    # -- main loop -------------------------------------------------------------
    def run(self) -> SessionResult:
        if len(self.trace) == 0:
            self.record(EventKind.SessionEnd)
            return SessionResult(self.metrics(), self.log, self.played)
        self.start_video()
        self.push(self.cfg.replan_interval_ms, EventKind.ReplanTimer)
        self.replan()
        self.dispatch()
        processed = 0
        while self.events:
            time, _, _, _, kind, chunk, payload = heapq.heappop(self.events)
            if time < self.now:
                raise RuntimeError(f"event at {time} precedes clock {self.now}")
            if kind is EventKind.DownloadComplete and (
                self.in_flight is None or self.in_flight[4] != payload
            ):
                continue  # abandoned download
            self.now = time
            processed += 1
            if processed > MAX_EVENTS:
                raise RuntimeError("event budget exhausted; session is not making progress")
            if kind is EventKind.SessionEnd:
                self.record(kind)
                break
            if self.done and kind is not EventKind.DecodeComplete:
                continue
            if kind is EventKind.DownloadComplete:
                self.on_download_complete(chunk, payload)
            elif kind is EventKind.DecodeComplete:
                self.on_decode_complete(chunk, payload)
            elif kind is EventKind.ChunkPlaybackDue:
                self.on_playback_due(chunk, payload)
            elif kind is EventKind.Swipe:
                self.on_swipe(chunk)
            elif kind is EventKind.ReplanTimer:
                self.on_timer()
        return SessionResult(self.metrics(), self.log, self.played)

    # -- accounting ------------------------------------------------------------
    def metrics(self) -> SessionMetrics:
        last_video = len(self.trace) - 1
        played_ids = {p.chunk for p in self.played}
        if self.in_flight is not None:
            cid, vi, start, _, _ = self.in_flight
            got = min(self.variant(cid, vi).size, int(self.bw.bits_between(start, self.now)) // 8)
            self.partial_bytes.append((cid, got))
            self.in_flight = None

        per_video_dl = [0] * len(self.feed)
        per_video_waste = [0] * len(self.feed)
        played_bytes = wasted = end_buffered = 0
        for cid, vi in self.completed.items():
            size = self.variant(cid, vi).size
            per_video_dl[cid.video_index] += size
            if cid in played_ids:
                played_bytes += size
            elif cid.video_index <= last_video:
                wasted += size
                per_video_waste[cid.video_index] += size
            else:
                end_buffered += size
        for cid, got in self.partial_bytes:
            per_video_dl[cid.video_index] += got
            if cid.video_index <= last_video:
                wasted += got
                per_video_waste[cid.video_index] += got
            else:
                end_buffered += got
        downloaded = sum(per_video_dl)

        scores = []
        per_video_qoe = [0.0] * len(self.feed)
        per_video_rebuffer = [0] * len(self.feed)
        per_video_played = [0] * len(self.feed)
        switches = 0
        prev = None
        for p in self.played:
            same_video = prev is not None and prev.chunk.video_index == p.chunk.video_index
            var = abs(p.quality - prev.quality) if same_video else 0.0
            if same_video and p.variant_index != prev.variant_index:
                switches += 1
            s = chunk_score(ChunkMetrics(p.quality, var, p.stall, p.size), self.w)
            scores.append(s)
            per_video_qoe[p.chunk.video_index] += s
            per_video_rebuffer[p.chunk.video_index] += p.stall
            per_video_played[p.chunk.video_index] += 1
            prev = p
        rebuffer = sum(p.stall for p in self.played)
        startup = sum(self.startup.values())
        n = len(self.played)
        per_video = tuple(
            VideoMetrics(
                video_id=self.feed[k].video_id,
                played_chunks=per_video_played[k],
                rebuffer_ms=per_video_rebuffer[k],
                startup_ms=self.startup.get(k, 0),
                downloaded_bytes=per_video_dl[k],
                wasted_bytes=per_video_waste[k],
                qoe=per_video_qoe[k],
            )
            for k in range(len(self.feed))
            if k <= last_video or per_video_dl[k]
        )
        return SessionMetrics(
            total_stall=rebuffer + startup,
            rebuffer_ms=rebuffer,
            startup_ms=startup,
            wasted_bytes=wasted,
            downloaded_bytes=downloaded,
            played_bytes=played_bytes,
            end_buffered_bytes=end_buffered,
            mean_quality=sum(p.quality for p in self.played) / n if n else 0.0,
            quality_switches=switches,
            qoe=sum(scores),
            played_chunks=n,
            prompt_chunks_played=sum(1 for p in self.played if p.is_prompt),
            emergency_fetches=self.emergency_fetches,
            replans=self.replans,
            per_video=per_video,
        )


def run_session(
    feed: Feed,
    bw: BandwidthModel,
    trace: SessionTrace,
    strategy,
    device: DeviceModel | None = None,
    w: Weights | None = None,
    cfg: SimConfig | None = None,
    trace_id: str = "",
) -> SessionResult:
    """Simulate one viewing session under ``strategy``.

    ``strategy`` is a :class:`StrategyId` or a callable
    ``(state, feed, predicted_bw, device, weights) -> Plan``.
    """
    session = _Session(
        list(feed),
        bw,
        trace,
        strategy,
        device or DeviceModel(),
        w or Weights(),
        cfg or SimConfig(),
        trace_id,
    )
    return session.run()
