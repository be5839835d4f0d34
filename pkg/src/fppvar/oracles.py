"""Exhaustive path enumeration on tiny windows.

These routines share no code with the shortest-path solvers and serve as
ground truth for them on boxes of a few vertices.  Only simple paths are
enumerated: revisiting a vertex adds positive time and never helps.
"""

from __future__ import annotations

import math

import numpy as np

from .environment import EnvironmentWindow


def _simple_paths(env: EnvironmentWindow, source):
    """Yield ``(end, time)`` for every simple path from ``source`` inside the window.

    Times are accumulated step by step from the source.
    """
    d = env.d
    dirs = env.directions.directions
    start = tuple(int(c) for c in source)
    stack = [(start, 0.0, frozenset([start]))]
    while stack:
        x, t, seen = stack.pop()
        yield x, t
        for k in range(2 * d):
            y = tuple(int(c) for c in np.asarray(x) + dirs[k])
            if env.topology == "open-box" and not env.contains(y):
                continue
            if env.topology == "torus":
                y = tuple(int(c) for c in np.asarray(y) % np.asarray(env.box))
            if y in seen:
                continue
            stack.append((y, t + env.weights[env.local(x) + (k,)], seen | {y}))


def enumerate_passage_times(env: EnvironmentWindow, source) -> dict[tuple[int, ...], float]:
    """Least total time over all simple paths from ``source`` to each vertex."""
    best: dict[tuple[int, ...], float] = {}
    for y, t in _simple_paths(env, source):
        if t < best.get(y, math.inf):
            best[y] = t
    return best


def enumerate_horizon_value(env: EnvironmentWindow, p, x, t: float, mu0) -> float:
    """``min`` over paths of time ``<= t`` of the summed running cost ``p.alpha`` plus ``mu0(end)``.

    The running cost is summed step by step rather than telescoped.
    ``mu0`` is any callable on lattice points.
    """
    p = np.asarray(p, dtype=float)
    dirs = env.directions.directions
    d = env.d
    start = tuple(int(c) for c in x)
    best = math.inf
    stack = [(start, 0.0, 0.0, frozenset([start]))]
    while stack:
        y, time, cost, seen = stack.pop()
        best = min(best, cost + mu0(y))
        for k in range(2 * d):
            z = tuple(int(c) for c in np.asarray(y) + dirs[k])
            if not env.contains(z) or z in seen:
                continue
            nt = time + env.weights[env.local(y) + (k,)]
            if nt <= t:
                stack.append((z, nt, cost + float(p @ dirs[k]), seen | {z}))
    return best
