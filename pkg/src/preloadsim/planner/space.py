"""Incremental evaluation of plan prefixes over a planning window.

The window is the ``horizon`` chunks following the playhead in playback
order.  Buffered chunks in it are fixed; the rest are decision positions.
A prefix is extended one (chunk, variant) step at a time, and every
extension re-derives deadlines across the whole window so that the result
matches :func:`preloadsim.timeline.evaluate_plan` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import InvalidPlan
from ..model import (
    BandwidthModel,
    ChunkId,
    DeviceModel,
    Feed,
    Plan,
    PlanStep,
    Weights,
    chunk_at,
    iter_from,
)
from ..scoring import megabits, stall_seconds
from ..timeline import PlaybackState, compute_stall_value, download_duration


@dataclass(frozen=True)
class Prefix:
    """Evaluated partial plan.  Arrays are indexed by window position."""

    steps: tuple[tuple[int, int], ...]  # (position, variant index) in download order
    net_free: int
    unit_free: tuple[int, ...]
    ready: tuple[int | None, ...]
    delivered: tuple[int | None, ...]
    chosen: tuple[int, ...]  # variant index per position, -1 if undecided
    utility: float
    feasible: bool

    @property
    def depth(self) -> int:
        return len(self.steps)


class SearchSpace:
    def __init__(
        self,
        state: PlaybackState,
        feed: Feed,
        device: DeviceModel,
        bw: BandwidthModel,
        w: Weights,
        horizon: int,
    ):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.state = state
        self.feed = feed
        self.device = device
        self.bw = bw
        self.w = w
        self.horizon = horizon

        window = []
        for cid in iter_from(feed, state.playhead):
            if len(window) == horizon:
                break
            window.append(cid)
        self.window: list[ChunkId] = window
        self.chunks = [chunk_at(feed, cid) for cid in window]
        self.playout = [c.playout_duration for c in self.chunks]
        self.boundary = [pos > 0 and cid.chunk_index == 0 for pos, cid in enumerate(window)]
        self.position = {cid: pos for pos, cid in enumerate(window)}

        units = sorted({v.decode_unit for c in self.chunks for v in c.variants}, key=str)
        self.units = units
        unit_idx = {u: i for i, u in enumerate(units)}

        # per-position candidate data
        self.candidates: list[list[int]] = []
        self.static: list[dict[int, float]] = []
        self.quality: list[dict[int, float]] = []
        self.size: list[dict[int, int]] = []
        self.decode: list[dict[int, int]] = []
        self.unit_of: list[dict[int, int]] = []
        self.decisions: list[int] = []
        fixed_ready: list[int | None] = []
        fixed_quality: list[float | None] = []
        for pos, (cid, chunk) in enumerate(zip(window, self.chunks)):
            buffered = state.buffered.get(cid)
            if buffered is not None:
                fixed_ready.append(buffered.ready_at)
                fixed_quality.append(chunk.variants[buffered.variant_index].quality)
                cands = []
            else:
                fixed_ready.append(None)
                fixed_quality.append(None)
                cands = [i for i, v in enumerate(chunk.variants) if device.supports(v)]
                if not cands:
                    raise InvalidPlan(f"no variant of {cid} can be decoded on this device")
                self.decisions.append(pos)
            self.candidates.append(cands)
            self.static.append(
                {
                    i: w.quality * chunk.variants[i].quality
                    - w.bandwidth * megabits(chunk.variants[i].size)
                    for i in cands
                }
            )
            self.quality.append({i: chunk.variants[i].quality for i in cands})
            self.size.append({i: chunk.variants[i].size for i in cands})
            self.decode.append({i: chunk.variants[i].decode_latency for i in cands})
            self.unit_of.append({i: unit_idx[chunk.variants[i].decode_unit] for i in cands})
        self.fixed_quality = fixed_quality

        self._rate = bw.samples[0][1] if bw.is_constant else None
        self._durations: dict[tuple[int, int], int] = {}

        head = state.playhead
        self.head_prev_quality = state.last_quality if head.chunk_index > 0 else None

        unit_free = tuple(state.unit_free_at.get(u, 0) for u in units)
        self.root = Prefix(
            steps=(),
            net_free=state.download_start,
            unit_free=unit_free,
            ready=tuple(fixed_ready),
            delivered=(None,) * len(window),
            chosen=(-1,) * len(window),
            utility=0.0,
            feasible=True,
        )

    @property
    def depth(self) -> int:
        """Number of decisions in a complete plan."""
        return len(self.decisions)

    def space_size(self) -> int:
        """Orders times configurations: ``D! * prod(|R_i|)``."""
        return math.factorial(self.depth) * math.prod(len(self.candidates[p]) for p in self.decisions)

    def duration(self, pos: int, vi: int, start: int) -> int:
        if self._rate is not None:
            key = (pos, vi)
            d = self._durations.get(key)
            if d is None:
                d = download_duration(self.size[pos][vi], self.bw, start)
                self._durations[key] = d
            return d
        return download_duration(self.size[pos][vi], self.bw, start)

    def remaining(self, prefix: Prefix) -> list[int]:
        return [p for p in self.decisions if prefix.chosen[p] < 0]

    def extend(self, prefix: Prefix, pos: int, vi: int, prune: bool = True) -> Prefix | None:
        """Append a download step; ``None`` if pruning rejects it."""
        start = prefix.net_free
        end = start + self.duration(pos, vi, start)
        u = self.unit_of[pos][vi]
        chi = self.decode[pos][vi]
        gamma = max(end, prefix.unit_free[u]) + chi
        unit_free = list(prefix.unit_free)
        unit_free[u] = gamma
        ready = list(prefix.ready)
        ready[pos] = gamma
        delivered = list(prefix.delivered)
        delivered[pos] = end
        chosen = list(prefix.chosen)
        chosen[pos] = vi

        utility, compute_stalled = self._score(ready, delivered, chosen)
        if prune and compute_stalled:
            return None
        return Prefix(
            steps=prefix.steps + ((pos, vi),),
            net_free=end,
            unit_free=tuple(unit_free),
            ready=tuple(ready),
            delivered=tuple(delivered),
            chosen=tuple(chosen),
            utility=utility,
            feasible=prefix.feasible and not compute_stalled,
        )

    def _score(self, ready, delivered, chosen):
        w_var = self.w.variation
        w_stall = self.w.stall
        last = max(p for p, c in enumerate(chosen) if c >= 0)
        utility = 0.0
        stalled = False
        deadline = self.state.first_deadline
        prev_q = self.head_prev_quality
        prev_end = None
        for pos in range(last + 1):
            if prev_end is not None:
                deadline = prev_end
                if self.boundary[pos]:
                    deadline += self.state.video_startup_delay
                    prev_q = None
            vi = chosen[pos]
            g = ready[pos]
            if vi >= 0:
                q = self.quality[pos][vi]
                score = self.static[pos][vi]
                if prev_q is not None:
                    score -= w_var * abs(q - prev_q)
                if g > deadline:
                    score -= w_stall * stall_seconds(g - deadline)
                    if compute_stall_value(delivered[pos], self.decode[pos][vi], g, deadline) > 0:
                        stalled = True
                utility += score
                prev_q = q
            else:
                prev_q = self.fixed_quality[pos]
            if g is None or g < deadline:
                g = deadline
            prev_end = g + self.playout[pos]
        return utility, stalled

    def upper_bound(self, prefix: Prefix) -> float:
        """Utility no completion of ``prefix`` can exceed.

        Stall and variation of a decided chunk are only counted once every
        earlier chunk in the window is decided (they can still shrink
        otherwise); undecided chunks get their best static score.
        """
        chosen = prefix.chosen
        ready = prefix.ready
        bound = 0.0
        settled = True
        deadline = self.state.first_deadline
        prev_q = self.head_prev_quality
        prev_end = None
        for pos in range(len(chosen)):
            if prev_end is not None:
                deadline = prev_end
                if self.boundary[pos]:
                    deadline += self.state.video_startup_delay
                    prev_q = None
            vi = chosen[pos]
            g = ready[pos]
            if vi >= 0:
                q = self.quality[pos][vi]
                bound += self.static[pos][vi]
                if prev_q is not None:
                    bound -= self.w.variation * abs(q - prev_q)
                if settled and g > deadline:
                    bound -= self.w.stall * stall_seconds(g - deadline)
                prev_q = q
            elif g is not None:
                prev_q = self.fixed_quality[pos]
            else:
                bound += max(self.static[pos].values())
                settled = False
                prev_q = None
            if not settled:
                continue
            if g < deadline:
                g = deadline
            prev_end = g + self.playout[pos]
        return bound

    def to_plan(self, prefix: Prefix) -> Plan:
        return Plan(tuple(PlanStep(self.window[p], vi) for p, vi in prefix.steps))

    def prefix_of(self, plan: Plan, prune: bool = False) -> Prefix | None:
        prefix = self.root
        for step in plan.steps:
            pos = self.position.get(step.chunk)
            if pos is None or pos not in self.decisions or prefix.chosen[pos] >= 0:
                raise InvalidPlan(f"step {step} is not a free decision in this window")
            if step.variant_index not in self.static[pos]:
                raise InvalidPlan(f"variant {step.variant_index} unavailable for {step.chunk}")
            prefix = self.extend(prefix, pos, step.variant_index, prune=prune)
            if prefix is None:
                return None
        return prefix

    def plan_key(self, prefix: Prefix):
        """Deterministic tie-break: earlier playback-order steps, then lower variants."""
        return tuple((self.window[p], vi) for p, vi in prefix.steps)

    def fallback(self) -> Plan:
        """Lowest-bitrate pixel variants in playback order."""
        return Plan(
            tuple(
                PlanStep(self.window[p], self.chunks[p].lowest_pixel_index()) for p in self.decisions
            )
        )
