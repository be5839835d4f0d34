"""Random edge-weight media on finite windows of the square lattice.

A medium assigns a positive time ``tau(x, alpha)`` to every directed edge from
``x`` to ``x + alpha``.  Media are described by an :class:`EnvironmentSpec`
and realized on a finite :class:`EnvironmentWindow`, either an open box or a
torus.  Realizations are deterministic in (spec, box, topology, origin) and,
because the underlying stream is counter based, two windows of different
sizes agree on their overlap.

Direction indices follow one convention everywhere: index ``k < d`` is
``+e_k`` and index ``k >= d`` is ``-e_(k-d)``.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._rng import uniforms
from .errors import BoundsError, ConfigurationError, TopologyError

KINDS = ("iid-edges", "iid-undirected", "hyperplane-symmetric", "periodic", "explicit")
TOPOLOGIES = ("open-box", "torus")


@dataclass(frozen=True)
class BoundsSpec:
    """Essential lower and upper bounds ``a <= tau <= b``."""

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or not 0 < self.a <= self.b:
            raise ConfigurationError(f"need 0 < a <= b < inf, got a={self.a}, b={self.b}")

    def contains(self, w) -> bool:
        w = np.asarray(w)
        return bool(np.all((w >= self.a) & (w <= self.b)))

    @property
    def ratio(self) -> float:
        return self.b / self.a


@dataclass(frozen=True)
class DirectionSet:
    """The 2d signed unit vectors of Z^d."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ConfigurationError("dimension must be >= 1")

    @property
    def directions(self) -> np.ndarray:
        eye = np.eye(self.d, dtype=np.int64)
        return np.concatenate([eye, -eye])

    @property
    def positive_directions(self) -> np.ndarray:
        return np.eye(self.d, dtype=np.int64)

    def __len__(self):
        return 2 * self.d

    def axis(self, k: int) -> int:
        return k % self.d

    def opposite(self, k: int) -> int:
        return (k + self.d) % (2 * self.d)

    def index(self, alpha) -> int:
        """Direction index of a signed unit vector, or pass an index through."""
        if np.isscalar(alpha):
            k = int(alpha)
            if not 0 <= k < 2 * self.d:
                raise ConfigurationError(f"direction index {k} out of range for d={self.d}")
            return k
        alpha = np.asarray(alpha, dtype=np.int64)
        nz = np.flatnonzero(alpha)
        if alpha.shape != (self.d,) or nz.size != 1 or abs(alpha[nz[0]]) != 1:
            raise ConfigurationError(f"{alpha.tolist()} is not a unit lattice direction")
        i = int(nz[0])
        return i if alpha[i] > 0 else i + self.d


@dataclass(frozen=True, eq=False)
class WeightDistribution:
    """Marginal law of the edge weights.

    ``kind`` is ``"atoms"`` (finitely many weight vectors with probabilities),
    ``"uniform"`` on ``[lo, hi]``, or ``"inverse-cdf"`` tabulated as a
    piecewise-linear quantile function through ``(u_grid, t_grid)``.

    Atom values have shape (n, k).  With k == 1 each edge draws its own
    scalar; with k == d one vector is drawn per site and component i is the
    weight along axis i.
    """

    kind: str
    values: np.ndarray | None = None
    probs: np.ndarray | None = None
    lo: float | None = None
    hi: float | None = None
    u_grid: np.ndarray | None = None
    t_grid: np.ndarray | None = None
    _cum: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == "atoms":
            values = np.asarray(self.values, dtype=float)
            if values.ndim == 1:
                values = values[:, None]
            probs = np.asarray(self.probs, dtype=float)
            if values.ndim != 2 or probs.shape != (values.shape[0],) or values.shape[0] == 0:
                raise ConfigurationError("atom values must be (n,) or (n, k) with n probabilities")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise ConfigurationError("atom probabilities must lie on the simplex")
            if np.any(~np.isfinite(values)) or np.any(values <= 0):
                raise ConfigurationError("atom weights must be positive and finite")
            values.setflags(write=False)
            probs.setflags(write=False)
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            object.__setattr__(self, "values", values)
            object.__setattr__(self, "probs", probs)
            object.__setattr__(self, "_cum", cum)
        elif self.kind == "uniform":
            if self.lo is None or self.hi is None or not 0 < self.lo < self.hi:
                raise ConfigurationError(f"uniform needs 0 < lo < hi, got [{self.lo}, {self.hi}]")
        elif self.kind == "inverse-cdf":
            u = np.asarray(self.u_grid, dtype=float)
            t = np.asarray(self.t_grid, dtype=float)
            if u.ndim != 1 or u.shape != t.shape or u.size < 2:
                raise ConfigurationError("inverse-cdf needs matching 1-d grids of length >= 2")
            if u[0] != 0.0 or u[-1] != 1.0 or np.any(np.diff(u) <= 0):
                raise ConfigurationError("u_grid must increase strictly from 0 to 1")
            if np.any(np.diff(t) < 0) or t[0] <= 0:
                raise ConfigurationError("t_grid must be positive and nondecreasing")
            object.__setattr__(self, "u_grid", u)
            object.__setattr__(self, "t_grid", t)
        else:
            raise ConfigurationError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def atoms(cls, values, probs) -> "WeightDistribution":
        return cls("atoms", values=values, probs=probs)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "WeightDistribution":
        return cls("uniform", lo=float(lo), hi=float(hi))

    @classmethod
    def inverse_cdf(cls, u_grid, t_grid) -> "WeightDistribution":
        return cls("inverse-cdf", u_grid=u_grid, t_grid=t_grid)

    @property
    def width(self) -> int:
        return self.values.shape[1] if self.kind == "atoms" else 1

    @property
    def bounds(self) -> BoundsSpec:
        if self.kind == "atoms":
            live = self.values[self.probs > 0]
            return BoundsSpec(float(live.min()), float(live.max()))
        if self.kind == "uniform":
            return BoundsSpec(self.lo, self.hi)
        return BoundsSpec(float(self.t_grid[0]), float(self.t_grid[-1]))

    def atom_index(self, u) -> np.ndarray:
        """Atom drawn by uniform ``u``; P(index == i) = probs[i] for u uniform on [0, 1)."""
        idx = np.searchsorted(self._cum, np.asarray(u), side="right")
        return np.minimum(idx, len(self._cum) - 1)

    def quantile(self, u, axis: int = 0) -> np.ndarray:
        """Weight produced by the uniform value ``u`` along ``axis``."""
        u = np.asarray(u, dtype=float)
        if self.kind == "atoms":
            col = axis if self.width > 1 else 0
            return self.values[self.atom_index(u), col]
        if self.kind == "uniform":
            return self.lo + u * (self.hi - self.lo)
        return np.interp(u, self.u_grid, self.t_grid)

    def mean(self, axis: int = 0) -> float:
        if self.kind == "atoms":
            col = axis if self.width > 1 else 0
            return float(self.probs @ self.values[:, col])
        if self.kind == "uniform":
            return 0.5 * (self.lo + self.hi)
        return float(np.trapz(self.t_grid, self.u_grid))


@dataclass(frozen=True, eq=False)
class EnvironmentSpec:
    """Description of a stationary medium.

    Kinds:

    * ``iid-edges`` -- every directed edge independent.
    * ``iid-undirected`` -- independent undirected edges,
      ``tau(x, alpha) == tau(x + alpha, -alpha)``.
    * ``hyperplane-symmetric`` -- one draw per hyperplane ``sum(x) == z``;
      ``tau(x, +e_i)`` uses the draw of ``z`` and ``tau(x, -e_i)`` that of
      ``z - 1``, so the medium is also undirected.
    * ``periodic`` -- undirected draws repeated with the given ``period``.
    * ``explicit`` -- a ``constant`` or a ``table`` keyed by ``(x, k)``.
    """

    kind: str
    d: int
    distribution: WeightDistribution | None = None
    seed: int = 0
    period: tuple[int, ...] | None = None
    table: Mapping | None = None
    constant: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown medium kind {self.kind!r}; expected one of {KINDS}")
        if int(self.d) < 1:
            raise ConfigurationError("dimension must be >= 1")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "seed", int(self.seed))
        if self.kind == "explicit":
            if (self.constant is None) == (self.table is None):
                raise ConfigurationError("explicit media need exactly one of constant or table")
            if self.constant is not None and not (np.isfinite(self.constant) and self.constant > 0):
                raise ConfigurationError("explicit constant must be positive")
            if self.table is not None:
                table = {(tuple(int(c) for c in x), int(k)): float(w) for (x, k), w in self.table.items()}
                if not table:
                    raise ConfigurationError("explicit table is empty")
                for (x, k), w in table.items():
                    if len(x) != self.d or not 0 <= k < 2 * self.d:
                        raise ConfigurationError(f"bad table key {(x, k)} for d={self.d}")
                    if not (np.isfinite(w) and w > 0):
                        raise ConfigurationError(f"table weight at {(x, k)} must be positive")
                object.__setattr__(self, "table", table)
            return
        if self.distribution is None:
            raise ConfigurationError(f"{self.kind} media need a distribution")
        if self.distribution.width not in (1, self.d):
            raise ConfigurationError(
                f"atom vectors have length {self.distribution.width}, need 1 or d={self.d}")
        if self.kind == "periodic":
            if self.period is None:
                raise ConfigurationError("periodic media need a period")
            period = (int(self.period),) * self.d if np.isscalar(self.period) else tuple(
                int(q) for q in self.period)
            if len(period) != self.d or min(period) < 1:
                raise ConfigurationError(f"bad period {self.period!r}")
            object.__setattr__(self, "period", period)

    @property
    def bounds(self) -> BoundsSpec:
        if self.kind == "explicit":
            if self.constant is not None:
                return BoundsSpec(float(self.constant), float(self.constant))
            w = np.fromiter(self.table.values(), dtype=float)
            return BoundsSpec(float(w.min()), float(w.max()))
        return self.distribution.bounds

    def with_seed(self, seed: int) -> "EnvironmentSpec":
        return EnvironmentSpec(self.kind, self.d, self.distribution, seed, self.period,
                               self.table, self.constant)


def constant_spec(c: float, d: int) -> EnvironmentSpec:
    """Homogeneous medium with every weight equal to ``c``."""
    return EnvironmentSpec("explicit", d, constant=float(c))


def explicit_spec_from_array(weights: np.ndarray, origin: Sequence[int] | None = None) -> EnvironmentSpec:
    """Explicit medium from an array of shape (*box, 2d) anchored at ``origin``."""
    weights = np.asarray(weights, dtype=float)
    d = weights.ndim - 1
    if weights.shape[-1] != 2 * d:
        raise ConfigurationError("last axis of the weight array must have length 2d")
    origin = np.zeros(d, dtype=np.int64) if origin is None else np.asarray(origin, dtype=np.int64)
    table = {}
    for idx in np.ndindex(*weights.shape[:-1]):
        x = tuple(int(v) for v in origin + np.asarray(idx))
        for k in range(2 * d):
            table[(x, k)] = float(weights[idx + (k,)])
    return EnvironmentSpec("explicit", d, table=table)


@dataclass(frozen=True, eq=False)
class EnvironmentWindow:
    """Weights of a medium on the box ``origin <= x < origin + box``.

    ``weights[i_1, ..., i_d, k]`` is ``tau(origin + i, direction k)``.  On a
    torus (origin fixed at 0) coordinates wrap; on an open box the weights of
    edges that leave the box are stored but cannot be traversed.
    """

    spec: EnvironmentSpec | None
    box: tuple[int, ...]
    topology: str
    origin: tuple[int, ...]
    weights: np.ndarray
    bounds: BoundsSpec

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ConfigurationError(f"unknown topology {self.topology!r}")
        w = np.array(self.weights, dtype=float, copy=True)
        if w.shape != tuple(self.box) + (2 * len(self.box),):
            raise ConfigurationError(f"weights shape {w.shape} does not match box {self.box}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "box", tuple(int(n) for n in self.box))
        object.__setattr__(self, "origin", tuple(int(o) for o in self.origin))

    @property
    def d(self) -> int:
        return len(self.box)

    @property
    def directions(self) -> DirectionSet:
        return DirectionSet(self.d)

    @property
    def size(self) -> int:
        return int(np.prod(self.box))

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.box, self.topology, self.origin)).encode())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return h.hexdigest()[:16]

    def local(self, x) -> tuple[int, ...]:
        """Array index of lattice point ``x`` (wrapped on a torus)."""
        rel = np.asarray(x, dtype=np.int64) - np.asarray(self.origin)
        if rel.shape != (self.d,):
            raise BoundsError(f"point {x} has wrong dimension for d={self.d}")
        if self.topology == "torus":
            rel = rel % np.asarray(self.box)
        elif np.any(rel < 0) or np.any(rel >= np.asarray(self.box)):
            raise BoundsError(f"point {tuple(np.asarray(x).tolist())} outside window")
        return tuple(int(v) for v in rel)

    def contains(self, x) -> bool:
        if self.topology == "torus":
            return True
        rel = np.asarray(x) - np.asarray(self.origin)
        return bool(np.all(rel >= 0) and np.all(rel < np.asarray(self.box)))

    def points(self) -> np.ndarray:
        """All lattice points of the window in C order, shape (size, d)."""
        grids = np.indices(self.box).reshape(self.d, -1).T
        return grids + np.asarray(self.origin, dtype=np.int64)

    def weight(self, x, alpha) -> float:
        k = self.directions.index(alpha)
        step = self.directions.directions[k]
        if self.topology == "open-box" and not self.contains(np.asarray(x) + step):
            raise BoundsError(f"edge from {tuple(np.asarray(x).tolist())} along {step.tolist()} leaves the window")
        return float(self.weights[self.local(x) + (k,)])

    def neighbor_index(self) -> np.ndarray:
        """Flat index of the neighbor along each direction, -1 where it leaves an open box.

        Shape (size, 2d).
        """
        shape = np.asarray(self.box)
        idx = np.indices(self.box).reshape(self.d, -1).T
        out = np.empty((idx.shape[0], 2 * self.d), dtype=np.int64)
        for k, step in enumerate(self.directions.directions):
            nb = idx + step
            if self.topology == "torus":
                nb = nb % shape
                out[:, k] = np.ravel_multi_index(nb.T, self.box)
            else:
                ok = np.all((nb >= 0) & (nb < shape), axis=1)
                flat = np.full(idx.shape[0], -1, dtype=np.int64)
                flat[ok] = np.ravel_multi_index(nb[ok].T, self.box)
                out[:, k] = flat
        return out

    def lifted(self, center, radius: int) -> "EnvironmentWindow":
        """Open box of l-inf radius ``radius`` around ``center`` in the periodic extension of a torus."""
        if self.topology != "torus":
            raise TopologyError("only torus windows can be lifted")
        center = np.asarray(center, dtype=np.int64)
        lo = center - radius
        axes = [np.arange(lo[i], lo[i] + 2 * radius + 1) % self.box[i] for i in range(self.d)]
        w = self.weights[np.ix_(*axes)]
        return EnvironmentWindow(self.spec, (2 * radius + 1,) * self.d, "open-box",
                                 tuple(lo.tolist()), w, self.bounds)


def _site_weights(spec: EnvironmentSpec, pts: np.ndarray, box, topology) -> np.ndarray:
    d = spec.d
    dist = spec.distribution
    vector_atoms = dist.kind == "atoms" and dist.width > 1
    out = np.empty((pts.shape[0], 2 * d))
    boxa = np.asarray(box)
    for k in range(2 * d):
        axis = k % d
        positive = k < d
        if spec.kind == "iid-edges":
            site = pts
            slot = k
        elif spec.kind == "hyperplane-symmetric":
            z = pts.sum(axis=1) - (0 if positive else 1)
            if topology == "torus":
                z = z % box[0]
            site = z[:, None]
            slot = 0 if vector_atoms else axis
        else:
            site = pts.copy()
            if not positive:
                site[:, axis] -= 1
            if topology == "torus":
                site = site % boxa
            if spec.kind == "periodic":
                site = site % np.asarray(spec.period)
            slot = 0 if vector_atoms else axis
        u = uniforms(spec.seed, site, slot)
        out[:, k] = dist.quantile(u, axis)
    return out


def sample_window(spec: EnvironmentSpec, box, topology: str = "open-box", origin=None) -> EnvironmentWindow:
    """Realize ``spec`` on a finite window.

    ``box`` gives the extent per axis (an int is broadcast).  ``origin`` is
    the lower corner for open boxes; tori always start at 0.
    """
    d = spec.d
    box = (int(box),) * d if np.isscalar(box) else tuple(int(n) for n in box)
    if len(box) != d or min(box) < 1:
        raise ConfigurationError(f"box {box} invalid for d={d}")
    if topology not in TOPOLOGIES:
        raise ConfigurationError(f"unknown topology {topology!r}")
    if topology == "torus":
        if origin is not None and any(int(o) != 0 for o in origin):
            raise ConfigurationError("torus windows start at the origin")
        origin = (0,) * d
        if spec.kind == "hyperplane-symmetric" and len(set(box)) != 1:
            raise ConfigurationError("hyperplane-symmetric tori need equal extents")
        if spec.kind == "periodic" and any(n % q for n, q in zip(box, spec.period)):
            raise ConfigurationError(f"torus {box} is not a multiple of the period {spec.period}")
    origin = (0,) * d if origin is None else tuple(int(o) for o in origin)
    if len(origin) != d:
        raise ConfigurationError("origin has wrong dimension")
    win = EnvironmentWindow(spec, box, topology, origin, np.zeros(box + (2 * d,)), spec.bounds)
    pts = win.points()
    if spec.kind == "explicit":
        if spec.constant is not None:
            w = np.full((pts.shape[0], 2 * d), float(spec.constant))
        else:
            w = np.empty((pts.shape[0], 2 * d))
            for i, x in enumerate(map(tuple, pts.tolist())):
                for k in range(2 * d):
                    try:
                        w[i, k] = spec.table[(x, k)]
                    except KeyError:
                        raise ConfigurationError(f"explicit table has no weight for {(x, k)}") from None
    else:
        w = _site_weights(spec, pts, box, topology)
    return EnvironmentWindow(spec, box, topology, origin, w.reshape(box + (2 * d,)), spec.bounds)


def weight(env: EnvironmentWindow, x, alpha) -> float:
    """``tau(x, alpha)``; raises :class:`BoundsError` for edges leaving an open box."""
    return env.weight(x, alpha)


@dataclass(frozen=True)
class BoundsReport:
    min_seen: float
    max_seen: float
    ok: bool


def verify_bounds(env: EnvironmentWindow) -> BoundsReport:
    w = env.weights
    lo, hi = float(w.min()), float(w.max())
    return BoundsReport(lo, hi, bool(lo >= env.bounds.a and hi <= env.bounds.b))


def _parse_direction(token: str, d: int) -> int:
    tok = token.strip().lower().replace("e", "")
    try:
        signed = int(tok)
    except ValueError:
        raise ConfigurationError(f"cannot parse direction {token!r}") from None
    if signed == 0 or abs(signed) > d:
        raise ConfigurationError(f"direction {token!r} out of range for d={d}")
    return abs(signed) - 1 if signed > 0 else abs(signed) - 1 + d


def load_explicit_csv(path, d: int | None = None) -> EnvironmentSpec:
    """Explicit medium from a CSV with columns ``x1,..,xd,direction,weight``.

    Directions are written ``+e1``/``-e2`` or as signed axis numbers ``1``/``-2``.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"medium file {path} not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ConfigurationError(f"{path} is empty")
        header = [h.strip() for h in header]
        if header[-2:] != ["direction", "weight"]:
            raise ConfigurationError(f"{path}: expected columns x1..xd,direction,weight")
        dim = len(header) - 2
        if d is not None and d != dim:
            raise ConfigurationError(f"{path} has dimension {dim}, expected {d}")
        table = {}
        for row in reader:
            if not row:
                continue
            x = tuple(int(v) for v in row[:dim])
            table[(x, _parse_direction(row[dim], dim))] = float(row[dim + 1])
    return EnvironmentSpec("explicit", dim, table=table)


def distribution_from_config(cfg: Mapping) -> WeightDistribution:
    kind = cfg.get("kind")
    if kind == "atoms":
        return WeightDistribution.atoms(cfg["values"], cfg["probs"])
    if kind == "uniform":
        return WeightDistribution.uniform(cfg["lo"], cfg["hi"])
    if kind == "inverse-cdf":
        return WeightDistribution.inverse_cdf(cfg["u"], cfg["t"])
    raise ConfigurationError(f"unknown distribution kind {kind!r}")


def spec_from_config(cfg: Mapping, base_dir=None) -> EnvironmentSpec:
    """Build a spec from a nested config table (as read from TOML)."""
    try:
        kind = cfg["kind"]
        if kind == "explicit":
            if "file" in cfg:
                p = Path(cfg["file"])
                if base_dir is not None and not p.is_absolute():
                    p = Path(base_dir) / p
                return load_explicit_csv(p, cfg.get("d"))
            return EnvironmentSpec("explicit", cfg["d"], constant=cfg["constant"])
        return EnvironmentSpec(kind, cfg["d"], distribution_from_config(cfg["distribution"]),
                               seed=cfg.get("seed", 0), period=cfg.get("period"))
    except KeyError as exc:
        raise ConfigurationError(f"medium config missing key {exc}") from None
