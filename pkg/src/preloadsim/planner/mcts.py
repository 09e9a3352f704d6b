"""Monte Carlo Tree Search over download order x variant choice."""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass

from ..errors import InfeasibleAllPruned
from ..model import BandwidthModel, DeviceModel, Feed, Plan, Weights
from ..timeline import PlaybackState
from .space import Prefix, SearchSpace

ROLLOUT_POLICIES = ("greedy", "random")


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 4
    exploration: float = 0.1
    simulation_budget: int = 2000
    time_budget_ms: float | None = None
    rollout_policy: str = "greedy"
    rng_seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.exploration > 0:
            raise ValueError("exploration must be > 0")
        if self.simulation_budget < 1:
            raise ValueError("simulation budget must be >= 1")
        if self.time_budget_ms is not None and self.time_budget_ms < 1:
            raise ValueError("time budget must be >= 1 ms")
        if self.rollout_policy not in ROLLOUT_POLICIES:
            raise ValueError(f"rollout policy must be one of {ROLLOUT_POLICIES}")


@dataclass(frozen=True)
class SearchStats:
    simulations: int
    best_utility: float | None
    best_found_at: int
    nodes: int
    complete: bool
    exhausted: bool
    elapsed_ms: float


def uct_value(value: float, visits: int, total: int, alpha: float) -> float:
    if visits == 0:
        return math.inf
    return value / visits + alpha * math.sqrt(math.log(total) / visits)


class _Node:
    __slots__ = ("prefix", "children", "moves", "visits", "value", "expanded", "exhausted")

    def __init__(self, prefix: Prefix):
        self.prefix = prefix
        self.children: list[_Node] = []
        self.moves: list[tuple[int, int]] = []
        self.visits = 0
        self.value = 0.0
        self.expanded = False
        self.exhausted = False


def expand(space: SearchSpace, prefix: Prefix) -> list[Prefix]:
    """Every feasible one-step extension, in (playback position, variant) order."""
    out = []
    for pos in space.remaining(prefix):
        for vi in space.candidates[pos]:
            child = space.extend(prefix, pos, vi)
            if child is not None:
                out.append(child)
    return out


def greedy_step(space: SearchSpace, prefix: Prefix, pos: int, rng: random.Random | None):
    """Best feasible variant for ``pos`` appended to ``prefix``; ties go to rng (or lowest index)."""
    best = []
    best_u = -math.inf
    for vi in space.candidates[pos]:
        child = space.extend(prefix, pos, vi)
        if child is None:
            continue
        if child.utility > best_u:
            best_u = child.utility
            best = [child]
        elif child.utility == best_u:
            best.append(child)
    if not best:
        return None
    if rng is None or len(best) == 1:
        return best[0]
    return rng.choice(best)


class _Tracker:
    def __init__(self, space: SearchSpace):
        self.space = space
        self.best: Prefix | None = None
        self.best_key = None
        self.best_partial: Prefix | None = None
        self.best_partial_key = None
        self.found_at = 0

    def offer(self, prefix: Prefix, sim: int):
        space = self.space
        if prefix.depth == space.depth:
            key = (-prefix.utility, space.plan_key(prefix))
            if self.best_key is None or key < self.best_key:
                if self.best is None or prefix.utility > self.best.utility:
                    self.found_at = sim
                self.best, self.best_key = prefix, key
        else:
            key = (-prefix.depth, -prefix.utility, space.plan_key(prefix))
            if self.best_partial_key is None or key < self.best_partial_key:
                self.best_partial, self.best_partial_key = prefix, key

    def result(self) -> Prefix | None:
        return self.best if self.best is not None else self.best_partial


class MCTS:
    """UCT search with compute-stall pruning and anytime early stopping.

    A node's first visit is a rollout from its own prefix; the second visit
    expands it.  Children are created lazily in (playback position, variant)
    order and pruned (compute-stalling) extensions are never created.  Each
    simulation backpropagates the utility of the complete plan its rollout
    reached.
    Subtrees whose leaves have all been evaluated are marked exhausted and
    skipped, so small spaces terminate with the exact optimum.
    """

    def __init__(self, space: SearchSpace, cfg: PlannerConfig):
        self.space = space
        self.cfg = cfg
        self.rng = random.Random(cfg.rng_seed)
        self.root = _Node(space.root)
        self.tracker = _Tracker(space)
        self.simulations = 0
        self.nodes = 1

    def _expand(self, node: _Node):
        space = self.space
        # popped from the end, so stored in reverse
        node.moves = [
            (p, vi)
            for p in reversed(space.remaining(node.prefix))
            for vi in reversed(space.candidates[p])
        ]
        node.expanded = True

    def _next_child(self, node: _Node) -> _Node | None:
        """Create the next untried child, skipping pruned moves."""
        space = self.space
        while node.moves:
            pos, vi = node.moves.pop()
            prefix = space.extend(node.prefix, pos, vi)
            if prefix is not None:
                child = _Node(prefix)
                node.children.append(child)
                self.nodes += 1
                return child
        return None

    def _select(self, node: _Node) -> _Node | None:
        child = self._next_child(node)
        if child is not None:
            return child
        log_total = math.log(max(1, node.visits))
        alpha = self.cfg.exploration
        best = None
        best_v = -math.inf
        for child in node.children:
            if child.exhausted:
                continue
            n = child.visits
            v = child.value / n + alpha * math.sqrt(log_total / n)
            if v > best_v:
                best, best_v = child, v
        return best

    def _rollout(self, prefix: Prefix) -> Prefix:
        space = self.space
        rng = self.rng
        if self.cfg.rollout_policy == "greedy":
            for pos in space.remaining(prefix):
                nxt = greedy_step(space, prefix, pos, rng)
                if nxt is None:
                    break
                prefix = nxt
            return prefix
        while prefix.depth < space.depth:
            moves = [(p, vi) for p in space.remaining(prefix) for vi in space.candidates[p]]
            rng.shuffle(moves)
            for pos, vi in moves:
                nxt = space.extend(prefix, pos, vi)
                if nxt is not None:
                    prefix = nxt
                    break
            else:
                break
        return prefix

    def _simulate(self):
        sim = self.simulations + 1
        depth_limit = self.space.depth
        path = [self.root]
        node = self.root
        while node.expanded and node.prefix.depth < depth_limit:
            child = self._select(node)
            if child is None:
                break
            node = child
            path.append(node)
            if node.visits == 0:
                break

        if node.prefix.depth == depth_limit:
            final = node.prefix
            node.exhausted = True
        elif node.visits == 0:
            final = self._rollout(node.prefix)
            if node is self.root:
                self._expand(node)
        else:
            if not node.expanded:
                self._expand(node)
            child = self._select(node)
            if child is None:
                final = node.prefix
                node.exhausted = True
            else:
                path.append(child)
                if child.prefix.depth == depth_limit:
                    child.exhausted = True
                final = self._rollout(child.prefix)
        self.tracker.offer(final, sim)

        value = final.utility
        for n in path:
            n.visits += 1
            n.value += value
        for n in reversed(path):
            if n.expanded and not n.moves and all(c.exhausted for c in n.children):
                n.exhausted = True
        self.simulations = sim

    def run(self) -> tuple[Plan, SearchStats]:
        space = self.space
        start = time.perf_counter()
        if space.depth == 0:
            return Plan(), SearchStats(0, 0.0, 0, 1, True, True, 0.0)
        if not expand(space, space.root):
            raise InfeasibleAllPruned(space.fallback())
        deadline = None
        if self.cfg.time_budget_ms is not None:
            deadline = start + self.cfg.time_budget_ms / 1000.0
        while self.simulations < self.cfg.simulation_budget and not self.root.exhausted:
            self._simulate()
            if deadline is not None and time.perf_counter() >= deadline:
                break
        best = self.tracker.result()
        stats = SearchStats(
            simulations=self.simulations,
            best_utility=best.utility,
            best_found_at=self.tracker.found_at,
            nodes=self.nodes,
            complete=best.depth == space.depth,
            exhausted=self.root.exhausted,
            elapsed_ms=(time.perf_counter() - start) * 1000.0,
        )
        return space.to_plan(best), stats


def plan_mcts(
    state: PlaybackState,
    feed: Feed,
    device: DeviceModel,
    bw: BandwidthModel,
    w: Weights,
    cfg: PlannerConfig,
) -> tuple[Plan, SearchStats]:
    space = SearchSpace(state, feed, device, bw, w, cfg.horizon)
    return MCTS(space, cfg).run()
