"""First-passage times, reachable sets and Monte-Carlo time constants.

The passage time between two lattice points is the least total weight of a
nearest-neighbor path joining them.  The time constant ``m(x)`` is the almost
sure limit of ``T(0, [n x]) / n``; :func:`estimate_time_constant` estimates it
from independent replicas at a list of scales.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse, stats
from scipy.sparse import csgraph

from ._rng import derive_seed
from .environment import DirectionSet, EnvironmentSpec, EnvironmentWindow, sample_window
from .errors import BoundsError, ConfigurationError, DomainTooSmallError


def round_to_lattice(v) -> np.ndarray:
    """Nearest lattice point, rounding exact halves toward zero in each coordinate.

    Examples
    --------
    >>> round_to_lattice([1.2, -0.7]).tolist()
    [1, -1]
    >>> round_to_lattice([-0.5, 2.5]).tolist()
    [0, 2]
    """
    v = np.asarray(v, dtype=float)
    return (np.sign(v) * np.ceil(np.abs(v) - 0.5)).astype(np.int64)


@dataclass(frozen=True)
class Path:
    """Nearest-neighbor lattice path given by its vertices."""

    vertices: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        verts = tuple(tuple(int(c) for c in v) for v in self.vertices)
        if not verts:
            raise ConfigurationError("a path needs at least one vertex")
        for u, v in zip(verts, verts[1:]):
            if len(u) != len(v) or sum(abs(a - b) for a, b in zip(u, v)) != 1:
                raise ConfigurationError(f"{u} -> {v} is not a nearest-neighbor step")
        object.__setattr__(self, "vertices", verts)

    @property
    def steps(self) -> list[int]:
        dirs = DirectionSet(len(self.vertices[0]))
        return [dirs.index(np.subtract(v, u)) for u, v in zip(self.vertices, self.vertices[1:])]

    def passage_time(self, env: EnvironmentWindow) -> float:
        return float(sum(env.weight(u, k) for u, k in zip(self.vertices, self.steps)))


def _edge_graph(env: EnvironmentWindow) -> sparse.csr_matrix:
    """Directed weighted adjacency; parallel edges keep the lightest, self-loops dropped."""
    nb = env.neighbor_index()
    n = env.size
    rows = np.repeat(np.arange(n), nb.shape[1])
    cols = nb.ravel()
    w = env.weights.reshape(n, -1).ravel()
    keep = (cols >= 0) & (cols != rows)
    rows, cols, w = rows[keep], cols[keep], w[keep]
    key = rows * n + cols
    order = np.lexsort((w, key))
    key, w = key[order], w[order]
    first = np.ones(key.size, dtype=bool)
    first[1:] = key[1:] != key[:-1]
    key, w = key[first], w[first]
    return sparse.csr_matrix((w, (key // n, key % n)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class PassageTimeMap:
    """Passage times from ``source`` over a window.

    ``times`` has the window's shape; vertices beyond the search ``limit``
    hold ``inf``.
    """

    source: tuple[int, ...]
    times: np.ndarray
    env: EnvironmentWindow = field(repr=False)
    limit: float = math.inf
    predecessors: np.ndarray | None = field(default=None, repr=False)

    @property
    def fingerprint(self) -> str:
        return self.env.fingerprint

    def time(self, y) -> float:
        return float(self.times[self.env.local(y)])

    def path_to(self, y) -> Path:
        """One geodesic from the source to ``y``."""
        if self.predecessors is None:
            raise ConfigurationError("map was built without predecessors")
        i = int(np.ravel_multi_index(self.env.local(y), self.env.box))
        if not np.isfinite(self.times.flat[i]):
            raise BoundsError(f"{tuple(y)} was not reached")
        chain = [i]
        while self.predecessors[chain[-1]] >= 0:
            chain.append(int(self.predecessors[chain[-1]]))
        coords = np.array(np.unravel_index(chain[::-1], self.env.box)).T + np.asarray(self.env.origin)
        return Path(tuple(map(tuple, coords.tolist())))


def first_passage_times(env: EnvironmentWindow, source, limit: float = math.inf,
                        with_paths: bool = False) -> PassageTimeMap:
    """Exact single-source passage times over ``env`` (Dijkstra).

    Parameters
    ----------
    env : EnvironmentWindow
    source : lattice point inside the window
    limit : float, optional
        Stop once every remaining vertex is farther than ``limit``.
    with_paths : bool
        Keep the predecessor tree so :meth:`PassageTimeMap.path_to` works.
    """
    src = env.local(source)
    i = int(np.ravel_multi_index(src, env.box))
    graph = _edge_graph(env)
    out = csgraph.dijkstra(graph, directed=True, indices=i, limit=limit,
                           return_predecessors=with_paths)
    if with_paths:
        dist, pred = out
        pred = np.where(pred < 0, -1, pred)
    else:
        dist, pred = out, None
    source = tuple(int(c) for c in np.asarray(source))
    return PassageTimeMap(source, dist.reshape(env.box), env, limit, pred)


def first_passage_times_heap(env: EnvironmentWindow, source) -> PassageTimeMap:
    """Priority-queue Dijkstra with lazy deletion and lexicographic tie-breaking.

    Slower pure-Python twin of :func:`first_passage_times`, kept as a
    cross-check.
    """
    nb = env.neighbor_index()
    w = env.weights.reshape(env.size, -1)
    dist = np.full(env.size, math.inf)
    s = int(np.ravel_multi_index(env.local(source), env.box))
    dist[s] = 0.0
    heap = [(0.0, s)]
    done = np.zeros(env.size, dtype=bool)
    while heap:
        t, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for k in range(nb.shape[1]):
            v = nb[u, k]
            if v < 0 or v == u:
                continue
            cand = t + w[u, k]
            if cand < dist[v]:
                dist[v] = cand
                heapq.heappush(heap, (cand, int(v)))
    return PassageTimeMap(tuple(int(c) for c in source), dist.reshape(env.box), env)


def reachable_set(env: EnvironmentWindow, x, t: float) -> set[tuple[int, ...]]:
    """Lattice points reachable from ``x`` within time ``t``.

    Raises
    ------
    DomainTooSmallError
        If an open-box window is too small to contain the whole set.
    """
    if t < 0:
        raise ConfigurationError("time must be nonnegative")
    ptm = first_passage_times(env, x, limit=t)
    inside = ptm.times <= t
    if env.topology == "open-box":
        for ax in range(env.d):
            lo = np.take(inside, 0, axis=ax)
            hi = np.take(inside, env.box[ax] - 1, axis=ax)
            if lo.any() or hi.any():
                raise DomainTooSmallError(f"reachable set R({tuple(x)}, {t}) touches the window boundary")
    pts = np.argwhere(inside) + np.asarray(env.origin)
    return set(map(tuple, pts.tolist()))


def window_radius(x, n_max: int, bounds) -> int:
    """l-inf half-width that keeps every geodesic from 0 to ``[n_max x]`` unclipped."""
    target = np.abs(round_to_lattice(n_max * np.asarray(x, dtype=float))).sum()
    return int(math.ceil(target * bounds.b / bounds.a)) + 2


@dataclass(frozen=True)
class TimeConstantEstimate:
    """Replica estimates of ``m(x)``.

    ``scaled_times[s, j]`` is ``T(0, [n_j x]) / n_j`` for replica ``s``.
    """

    direction: tuple[float, ...]
    n_values: tuple[int, ...]
    seeds: tuple[int, ...]
    scaled_times: np.ndarray
    estimate: float
    half_width: float

    @property
    def sequence(self) -> np.ndarray:
        """Replica mean of the scaled passage time at each scale."""
        return self.scaled_times.mean(axis=0)

    def records(self):
        for s, seed in enumerate(self.seeds):
            for j, n in enumerate(self.n_values):
                yield {"direction": list(self.direction), "n": n, "seed": seed,
                       "scaled_time": float(self.scaled_times[s, j])}


def _replica(args):
    spec, xs, n_values, radius = args
    d = spec.d
    env = sample_window(spec, (2 * radius + 1,) * d, "open-box", origin=(-radius,) * d)
    targets = [[round_to_lattice(n * np.asarray(x, dtype=float)) for n in n_values] for x in xs]
    reach = max(np.abs(t).sum() for row in targets for t in row) * spec.bounds.b
    ptm = first_passage_times(env, (0,) * d, limit=reach * (1 + 1e-12))
    return np.array([[ptm.time(t) / n for t, n in zip(row, n_values)] for row in targets])


def _student_half_width(samples: np.ndarray, level: float = 0.95) -> float:
    m = samples.size
    spread = float(samples.std(ddof=1)) if m > 1 else math.inf
    if spread == 0.0:
        return 0.0
    if m < 2:
        return math.inf
    return float(stats.t.ppf(0.5 + level / 2, m - 1) * spread / math.sqrt(m))


def estimate_time_constants(spec: EnvironmentSpec, xs, n_values: Sequence[int], seeds: int,
                            radius: int | None = None, jobs: int = 1) -> list[TimeConstantEstimate]:
    """Estimate ``m(x)`` for several directions, sharing one Dijkstra per replica."""
    xs = [np.asarray(x, dtype=float) for x in xs]
    n_values = tuple(int(n) for n in n_values)
    if not n_values or min(n_values) < 1:
        raise ConfigurationError("scales must be positive integers")
    if seeds < 1:
        raise ConfigurationError("need at least one replica")
    for x in xs:
        if x.shape != (spec.d,) or not np.any(x):
            raise ConfigurationError(f"direction {x.tolist()} must be a nonzero vector in R^{spec.d}")
    need = max(window_radius(x, max(n_values), spec.bounds) for x in xs)
    if radius is None:
        radius = need
    elif radius < need:
        raise ConfigurationError(f"window radius {radius} too small; need {need} to avoid clipping")
    replica_seeds = tuple(derive_seed(spec.seed, i) for i in range(seeds))
    tasks = [(spec.with_seed(s), xs, n_values, radius) for s in replica_seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replica, tasks))
    else:
        results = [_replica(t) for t in tasks]
    table = np.stack(results)  # (seeds, directions, scales)
    out = []
    for j, x in enumerate(xs):
        scaled = table[:, j, :]
        last = scaled[:, -1]
        out.append(TimeConstantEstimate(tuple(x.tolist()), n_values, replica_seeds, scaled,
                                        float(last.mean()), _student_half_width(last)))
    return out


def estimate_time_constant(spec: EnvironmentSpec, x, n_values: Sequence[int], seeds: int,
                           radius: int | None = None, jobs: int = 1) -> TimeConstantEstimate:
    """Monte-Carlo estimate of ``m(x)`` from ``seeds`` independent replicas.

    The point estimate is the replica mean of ``T(0, [n x]) / n`` at the
    largest scale; the half-width is a 95% Student-t interval.  The full
    sequence over ``n_values`` is kept for trend inspection.

    Raises
    ------
    ConfigurationError
        If ``radius`` is given and is too small to hold every geodesic.
    """
    return estimate_time_constants(spec, [x], n_values, seeds, radius, jobs)[0]
