"""Winding-angle homotopy signatures and enumeration of class-distinct seed paths.

A path's signature is the accumulated signed angle swept around each obstacle
center. Two paths with the same endpoints are homotopy-equivalent exactly when
their windings agree per obstacle up to less than a half turn; passing an
obstacle on opposite sides differs by a full turn.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

from .costmap import segment_is_free
from .geometry import ObstacleState, Vec2

DETOUR_FACTOR = 2.0          # detour nodes sit at this multiple of the safety radius
MAX_PATHS_EXAMINED = 200     # complete roadmap paths inspected before giving up
LENGTH_CUTOFF_FACTOR = 3.0   # drop classes longer than this multiple of the shortest
_MAX_HEAP_POPS = 50_000      # hard stop against pathological roadmaps
_CENTER_EPS = 1e-6


@dataclass(frozen=True)
class HomotopySignature:
    """Per-obstacle winding angles, in obstacle order."""

    windings: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.windings)


@dataclass(frozen=True)
class SeedPath:
    """Collision-free polyline from start to goal in one homotopy class."""

    waypoints: tuple[Vec2, ...]
    signature: HomotopySignature
    length: float


def winding_signature(
    waypoints: Sequence[Vec2], obstacles: Sequence[ObstacleState]
) -> HomotopySignature:
    """Sum the signed angle increments around each obstacle center.

    Each increment is normalized to (-pi, pi], so a polyline cannot jump a
    winding discontinuously between consecutive waypoints.
    """
    windings = []
    for obs in obstacles:
        c = obs.position
        total = 0.0
        prev = waypoints[0] - c
        if prev.norm() <= _CENTER_EPS:
            raise ValueError("waypoint coincides with an obstacle center")
        for wp in waypoints[1:]:
            cur = wp - c
            if cur.norm() <= _CENTER_EPS:
                raise ValueError("waypoint coincides with an obstacle center")
            total += math.atan2(prev.cross(cur), prev.dot(cur))
            prev = cur
        windings.append(total)
    return HomotopySignature(tuple(windings))


def signatures_equivalent(a: HomotopySignature, b: HomotopySignature) -> bool:
    """True when the two paths can be deformed into each other."""
    if len(a) != len(b):
        raise ValueError(f"signature lengths differ: {len(a)} vs {len(b)}")
    return all(abs(wa - wb) < math.pi for wa, wb in zip(a.windings, b.windings))


def _detour_nodes(
    start: Vec2,
    goal: Vec2,
    obstacles: Sequence[ObstacleState],
    factor: float,
    conflict_speed: float | None,
) -> list[Vec2]:
    direction = goal - start
    norm = direction.norm()
    if norm == 0.0:
        raise ValueError("start and goal coincide")
    perp = Vec2(-direction.y / norm, direction.x / norm)
    nodes = []
    for obs in obstacles:
        offset = perp.scaled(obs.safety_radius * factor)
        anchors = [obs.position]
        if conflict_speed is not None and (
            obs.velocity.norm() > 0.0 or obs.acceleration.norm() > 0.0
        ):
            anchor = _conflict_anchor(start, direction, norm, obs, conflict_speed, factor)
            if anchor is not None and anchor.distance_to(obs.position) > 0.1 * obs.safety_radius:
                anchors.append(anchor)
        for c in anchors:
            nodes.append(c + offset)
            nodes.append(c - offset)
    return nodes


def _conflict_anchor(
    start: Vec2,
    direction: Vec2,
    span: float,
    obs: ObstacleState,
    speed: float,
    factor: float,
) -> Vec2 | None:
    """Predicted obstacle position at its closest approach to a nominal
    straight start-goal traversal at constant ``speed``; None if the nominal
    pass never comes near it. Moving obstacles conflict where they WILL be,
    not where they are, so detours must be anchored there."""
    horizon = span / speed
    best_d = math.inf
    best_t = 0.0
    for k in range(41):
        t = horizon * k / 40.0
        f = speed * t / span
        px = start.x + direction.x * f
        py = start.y + direction.y * f
        c = obs.position
        cx = c.x + obs.velocity.x * t + 0.5 * obs.acceleration.x * t * t
        cy = c.y + obs.velocity.y * t + 0.5 * obs.acceleration.y * t * t
        d = math.hypot(px - cx, py - cy)
        if d < best_d:
            best_d = d
            best_t = t
    if best_d > obs.safety_radius * factor:
        return None
    t = best_t
    return Vec2(
        obs.position.x + obs.velocity.x * t + 0.5 * obs.acceleration.x * t * t,
        obs.position.y + obs.velocity.y * t + 0.5 * obs.acceleration.y * t * t,
    )


def _seed_time_clear(
    waypoints: Sequence[Vec2],
    obstacles: Sequence[ObstacleState],
    margin: float,
    speed: float,
) -> bool:
    """Would this polyline, traversed at constant ``speed``, dodge predictions?"""
    t = 0.0
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        dt = a.distance_to(b) / speed
        if not segment_is_free(obstacles, a, b, t, t + dt, margin):
            return False
        t += dt
    return True


def enumerate_seed_paths(
    start: Vec2,
    goal: Vec2,
    obstacles: Sequence[ObstacleState],
    max_classes: int,
    margin: float,
    detour_factor: float = DETOUR_FACTOR,
    max_paths: int = MAX_PATHS_EXAMINED,
    conflict_speed: float | None = None,
) -> list[SeedPath]:
    """Return up to ``max_classes`` shortest-class seed paths, one per homotopy class.

    Builds a small roadmap (start, goal, two perpendicular detour points per
    obstacle), then enumerates loop-free roadmap paths in increasing length
    order, deduplicating by signature. Classes whose paths are longer than
    ``LENGTH_CUTOFF_FACTOR`` times the shortest class are dropped: they are
    never competitive and ballooning detours would dominate the optimization
    budget.

    Signatures and collision checks use the obstacles at their given
    (reference-time) positions. When ``conflict_speed`` is set, the class
    representative additionally prefers the first path that also dodges the
    obstacles' *predicted* motion when traversed at that speed; a seed that
    starts clear of future crossings saves the optimizer from symmetric
    local traps. Returns an empty list when no collision-free path exists.
    """
    if max_classes < 1:
        raise ValueError("max_classes must be >= 1")
    nodes = [start, goal] + _detour_nodes(
        start, goal, obstacles, detour_factor, conflict_speed
    )
    n = len(nodes)
    free = [[False] * n for _ in range(n)]
    lengths = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            ok = segment_is_free(obstacles, nodes[i], nodes[j], 0.0, 0.0, margin)
            free[i][j] = free[j][i] = ok
            d = nodes[i].distance_to(nodes[j])
            lengths[i][j] = lengths[j][i] = d

    # Best-first enumeration of simple paths from node 0 (start) to node 1
    # (goal); ties broken by lexicographic waypoint comparison so results are
    # deterministic.
    kept: list[SeedPath] = []
    clear_flags: list[bool] = []
    heap: list[tuple[float, tuple[tuple[float, float], ...], tuple[int, ...]]] = [
        (0.0, (start.as_tuple(),), (0,))
    ]
    examined = 0
    pops = 0
    cutoff = math.inf

    def done() -> bool:
        if len(kept) < max_classes:
            return False
        return conflict_speed is None or all(clear_flags)

    while heap and not done() and examined < max_paths and pops < _MAX_HEAP_POPS:
        length, key, path = heapq.heappop(heap)
        pops += 1
        if length > cutoff:
            break  # increasing-length order: everything left is too long
        last = path[-1]
        if last == 1:
            examined += 1
            waypoints = tuple(nodes[i] for i in path)
            try:
                sig = winding_signature(waypoints, obstacles)
            except ValueError:
                continue
            match = next(
                (k for k, kp in enumerate(kept) if signatures_equivalent(sig, kp.signature)),
                None,
            )
            if match is None:
                if len(kept) < max_classes:
                    kept.append(SeedPath(waypoints, sig, length))
                    clear_flags.append(
                        conflict_speed is None
                        or _seed_time_clear(waypoints, obstacles, margin, conflict_speed)
                    )
                    if len(kept) == 1:
                        cutoff = length * LENGTH_CUTOFF_FACTOR
            elif conflict_speed is not None and not clear_flags[match]:
                # Same class, longer path: upgrade only if it clears the
                # predicted motion that the current representative hits.
                if _seed_time_clear(waypoints, obstacles, margin, conflict_speed):
                    kept[match] = SeedPath(waypoints, sig, length)
                    clear_flags[match] = True
            continue
        for nxt in range(n):
            if nxt in path or not free[last][nxt]:
                continue
            new_length = length + lengths[last][nxt]
            if new_length > cutoff:
                continue
            heapq.heappush(
                heap,
                (new_length, key + (nodes[nxt].as_tuple(),), path + (nxt,)),
            )
    order = sorted(
        range(len(kept)),
        key=lambda k: (kept[k].length, tuple(w.as_tuple() for w in kept[k].waypoints)),
    )
    return [kept[k] for k in order]
