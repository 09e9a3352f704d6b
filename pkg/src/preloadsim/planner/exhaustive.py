"""Exact planners used as oracles for the tree search."""

from __future__ import annotations

from ..errors import InfeasibleAllPruned, SpaceTooLarge
from ..model import BandwidthModel, DeviceModel, Feed, Plan, Weights
from ..timeline import PlaybackState
from .space import Prefix, SearchSpace

ENUMERATION_LIMIT = 10**7


class _Best:
    def __init__(self, space: SearchSpace):
        self.space = space
        self.prefix: Prefix | None = None
        self.key = None
        self.partial: Prefix | None = None
        self.partial_key = None
        self.leaves = 0

    def offer(self, prefix: Prefix):
        space = self.space
        if prefix.depth == space.depth:
            self.leaves += 1
            key = (-prefix.utility, space.plan_key(prefix))
            if self.key is None or key < self.key:
                self.prefix, self.key = prefix, key
        else:
            key = (-prefix.depth, -prefix.utility, space.plan_key(prefix))
            if self.partial_key is None or key < self.partial_key:
                self.partial, self.partial_key = prefix, key

    def result(self) -> Prefix | None:
        return self.prefix if self.prefix is not None else self.partial


def _children(space: SearchSpace, prefix: Prefix, prune: bool):
    for pos in space.remaining(prefix):
        for vi in space.candidates[pos]:
            child = space.extend(prefix, pos, vi, prune=prune)
            if child is not None:
                yield child


def plan_bruteforce(
    state: PlaybackState,
    feed: Feed,
    device: DeviceModel,
    bw: BandwidthModel,
    w: Weights,
    horizon: int,
    pruned: bool = True,
    limit: int = ENUMERATION_LIMIT,
) -> Plan:
    """Exact argmax of plan utility over every download order and variant assignment.

    In pruned mode a plan is admissible only if each of its prefixes is free
    of compute stall, the same rule the tree search applies on expansion.
    """
    space = SearchSpace(state, feed, device, bw, w, horizon)
    size = space.space_size()
    if size > limit:
        raise SpaceTooLarge(size, limit)
    best = _Best(space)
    if space.depth == 0:
        return Plan()

    def walk(prefix):
        any_child = False
        for child in _children(space, prefix, pruned):
            any_child = True
            walk(child)
        if not any_child:
            best.offer(prefix)

    roots = list(_children(space, space.root, pruned))
    if not roots:
        raise InfeasibleAllPruned(space.fallback())
    for child in roots:
        walk(child)
    return space.to_plan(best.result())


def plan_branch_and_bound(
    state: PlaybackState,
    feed: Feed,
    device: DeviceModel,
    bw: BandwidthModel,
    w: Weights,
    horizon: int,
    eps: float = 1e-9,
) -> tuple[Plan, float, int]:
    """Pruned-mode optimum without the enumeration size guard.

    Subtrees whose utility bound falls below the incumbent are skipped.
    Returns the plan, its utility, and the number of nodes visited.
    """
    space = SearchSpace(state, feed, device, bw, w, horizon)
    if space.depth == 0:
        return Plan(), 0.0, 0
    best = _Best(space)
    visited = 0

    def walk(prefix):
        nonlocal visited
        visited += 1
        kids = list(_children(space, prefix, True))
        if not kids:
            best.offer(prefix)
            return
        kids.sort(key=lambda p: -space.upper_bound(p))
        for child in kids:
            if best.prefix is not None and space.upper_bound(child) < best.prefix.utility - eps:
                continue
            walk(child)

    roots = list(_children(space, space.root, True))
    if not roots:
        raise InfeasibleAllPruned(space.fallback())
    roots.sort(key=lambda p: -space.upper_bound(p))
    for child in roots:
        if best.prefix is not None and space.upper_bound(child) < best.prefix.utility - eps:
            continue
        walk(child)
    result = best.result()
    return space.to_plan(result), result.utility, visited
