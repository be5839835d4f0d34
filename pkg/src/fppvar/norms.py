"""Norm checks for ``Hbar``, its dual norm ``m`` and the limit shape.

``Hbar`` is only available pointwise, so it is tabulated on a mesh of unit
directions.  The dual norm ``m(x) = sup_p p.x / Hbar(p)`` is then evaluated
as a maximum over the mesh, which is a lower bound; the reported slack bounds
how far below the true value it can be.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .errors import ConfigurationError


def direction_mesh(d: int, theta: float = math.pi / 256) -> np.ndarray:
    """Unit directions with angular spacing about ``theta``.

    Uniform angles in d = 2, a Fibonacci lattice in d = 3, and ``+-1`` in d = 1.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        k = int(math.ceil(2 * math.pi / theta))
        ang = 2 * math.pi * np.arange(k) / k
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if d == 3:
        k = max(8, int(math.ceil(4 * math.pi / theta**2)))
        i = np.arange(k) + 0.5
        z = 1 - 2 * i / k
        r = np.sqrt(1 - z * z)
        phi = math.pi * (1 + 5**0.5) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    raise ConfigurationError("direction meshes are available for d <= 3")


def covering_radius(directions: np.ndarray, samples: int = 20000, seed: int = 0) -> float:
    """Largest Euclidean distance from a unit vector to the nearest mesh direction.

    Exact in d = 1 and d = 2; a sampled estimate (inflated by 10%) otherwise.
    """
    dirs = np.asarray(directions, dtype=float)
    d = dirs.shape[1]
    if d == 1:
        signs = set(np.sign(dirs[:, 0]).tolist())
        return 0.0 if {1.0, -1.0} <= signs else 2.0
    if d == 2:
        ang = np.sort(np.arctan2(dirs[:, 1], dirs[:, 0]))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
        return float(2 * math.sin(gaps.max() / 4))
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(samples, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    best = (u @ dirs.T).max(axis=1).clip(-1, 1)
    return float(1.1 * np.sqrt(2 - 2 * best.min()))


@dataclass(frozen=True, eq=False)
class NormTable:
    """Values of ``Hbar`` at unit directions.

    ``tolerances[k]`` is the absolute error attached to ``values[k]`` and
    ``provenance[k]`` names the estimator that produced it.
    """

    directions: np.ndarray
    values: np.ndarray
    tolerances: np.ndarray
    provenance: tuple[str, ...]

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        tols = np.broadcast_to(np.asarray(self.tolerances, dtype=float), vals.shape).copy()
        if dirs.shape[0] == 0:
            raise ConfigurationError("norm table is empty")
        if vals.shape != (dirs.shape[0],):
            raise ConfigurationError("one value per direction required")
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            raise ConfigurationError("norm values must be positive and finite for nonzero directions")
        prov = tuple(self.provenance) if not isinstance(self.provenance, str) else (self.provenance,) * len(vals)
        for arr in (dirs, vals, tols):
            arr.setflags(write=False)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "tolerances", tols)
        object.__setattr__(self, "provenance", prov)

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    @property
    def covering_radius(self) -> float:
        return covering_radius(self.directions)

    def scaled(self, lam: float) -> "NormTable":
        return NormTable(self.directions, lam * self.values, lam * self.tolerances, self.provenance)

    def lower_bound_violations(self, b: float) -> np.ndarray:
        """Indices where ``Hbar(p) < |p|_inf / b`` beyond the attached tolerance."""
        floor = np.abs(self.directions).max(axis=1) / b
        return np.flatnonzero(self.values + self.tolerances < floor * (1 - 1e-12))


def tabulate(evaluator: Callable[[np.ndarray], float], directions, tolerance: float = 0.0,
             provenance: str = "evaluator") -> NormTable:
    """Evaluate ``Hbar`` on every direction."""
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    vals = np.array([evaluator(p) for p in dirs])
    return NormTable(dirs, vals, np.full(len(vals), tolerance), provenance)


@dataclass(frozen=True)
class NormAxiomReport:
    homogeneity_error: float
    triangle_slack: float
    min_value: float
    lower_bound_slack: float
    pairs: int
    tolerance: float

    @property
    def homogeneous(self) -> bool:
        return self.homogeneity_error <= self.tolerance

    @property
    def subadditive(self) -> bool:
        return self.triangle_slack >= -self.tolerance

    @property
    def positive(self) -> bool:
        return self.min_value > 0

    @property
    def above_floor(self) -> bool:
        return self.lower_bound_slack >= -self.tolerance

    @property
    def ok(self) -> bool:
        return self.homogeneous and self.subadditive and self.positive and self.above_floor


def check_norm_axioms(samples: NormTable, hbar_evaluator: Callable[[np.ndarray], float],
                      b: float | None = None, pairs: int = 100, scales: Sequence[float] = (2.0, 0.5),
                      tol: float = 1e-9, seed: int = 0) -> NormAxiomReport:
    """Homogeneity, triangle inequality, positivity and the floor ``|p|_inf / b``.

    Homogeneity is checked at every table direction for each ``lam`` in
    ``scales`` (relative error); the triangle inequality on ``pairs`` random
    pairs of randomly scaled table directions.  Slacks are reported, never
    raised.
    """
    rng = np.random.default_rng(seed)
    hom = 0.0
    for p, v in zip(samples.directions, samples.values):
        for lam in scales:
            hom = max(hom, abs(hbar_evaluator(lam * p) - lam * v) / max(lam * v, 1e-300))
    tri = math.inf
    k = len(samples.values)
    for _ in range(pairs):
        i, j = rng.integers(0, k, size=2)
        s, t = rng.uniform(0.1, 2.0, size=2)
        p, q = s * samples.directions[i], t * samples.directions[j]
        lhs = hbar_evaluator(p + q)
        rhs = s * samples.values[i] + t * samples.values[j]
        tri = min(tri, (rhs - lhs) / max(rhs, 1e-300))
    floor_slack = math.inf
    if b is not None:
        floor = np.abs(samples.directions).max(axis=1) / b
        floor_slack = float(((samples.values - floor) / floor).min())
    return NormAxiomReport(hom, tri if pairs else math.inf, float(samples.values.min()), floor_slack,
                           pairs, tol)


@dataclass(frozen=True)
class DualNormValue:
    """Mesh lower bound on ``m(x)`` and how far below ``m(x)`` it can sit."""

    value: float
    slack: float
    argmax: int


def dual_norm(table: NormTable, x, a: float | None = None, b: float | None = None) -> DualNormValue:
    """``max_k p_k.x / Hbar(p_k)``, a lower bound on the dual norm at ``x``.

    With weight bounds ``a <= tau <= b`` the slack is
    ``b sqrt(d) (r |x|_2 + b |x|_1 (r + tol_max) / a)`` where ``r`` is the
    mesh covering radius; ``Hbar`` is ``1/a``-Lipschitz in the sup norm and
    at least ``|p|_inf / b``.  Without bounds the slack is ``inf``, except
    that a value attained exactly on a mesh direction is still a valid lower
    bound.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (table.d,):
        raise ConfigurationError(f"x must lie in R^{table.d}")
    if not np.any(x):
        return DualNormValue(0.0, 0.0, -1)
    ratios = (table.directions @ x) / table.values
    k = int(np.argmax(ratios))
    value = float(ratios[k])
    if a is None or b is None:
        return DualNormValue(value, math.inf, k)
    r = table.covering_radius
    tol = float(table.tolerances.max())
    d = table.d
    slack = b * math.sqrt(d) * (r * np.linalg.norm(x) + b * np.abs(x).sum() * (r + tol) / a)
    return DualNormValue(value, float(slack), k)


@dataclass(frozen=True)
class LimitShape:
    """Vertices of ``{x : p_k.x <= Hbar(p_k) for all k}``.

    In d = 2 the vertices are in counterclockwise order; in d = 3
    ``facets`` lists hull triangles by vertex index.
    """

    vertices: np.ndarray
    facets: np.ndarray | None = None

    def is_convex(self) -> bool:
        if self.vertices.shape[1] != 2:
            return True
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        return bool(np.all(cross >= -1e-12) or np.all(cross <= 1e-12))


def limit_shape(table: NormTable, mesh: int | None = None) -> LimitShape:
    """Polytope approximating the unit ball of the dual norm.

    ``mesh``, if given, keeps every ``mesh``-th table direction.
    """
    dirs, vals = table.directions, table.values
    if mesh:
        dirs, vals = dirs[::mesh], vals[::mesh]
    d = table.d
    if d > 3:
        raise ConfigurationError("limit-shape export supports d <= 3")
    if d == 1:
        pos = vals[dirs[:, 0] > 0] / dirs[dirs[:, 0] > 0, 0]
        neg = vals[dirs[:, 0] < 0] / -dirs[dirs[:, 0] < 0, 0]
        if not len(pos) or not len(neg):
            raise ConfigurationError("table must contain both signs in d = 1")
        return LimitShape(np.array([[-neg.min()], [pos.min()]]))
    halfspaces = np.column_stack([dirs, -vals])
    try:
        hs = HalfspaceIntersection(halfspaces, np.zeros(d))
    except Exception as exc:  # qhull raises its own error type
        raise ConfigurationError(f"directions do not bound a polytope: {exc}") from None
    pts = hs.intersections
    hull = ConvexHull(pts)
    verts = pts[hull.vertices]
    if d == 2:
        c = verts.mean(axis=0)
        order = np.argsort(np.arctan2(verts[:, 1] - c[1], verts[:, 0] - c[0]))
        verts = verts[order]
        keep = np.ones(len(verts), dtype=bool)
        keep[1:] = np.linalg.norm(np.diff(verts, axis=0), axis=1) > 1e-12
        return LimitShape(verts[keep])
    return LimitShape(pts, hull.simplices)
