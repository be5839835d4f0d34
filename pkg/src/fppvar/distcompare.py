"""Comparing time constants of two i.i.d. media with nearby weight laws.

Driving both media with the same uniforms through their quantile functions
(the Skorokhod coupling) makes every edge weight differ by at most
``sup_u |Q_1(u) - Q_2(u)|``; the time constants then differ by at most
``max(b_i/a_i)`` times that, per unit ``|x|_1``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .environment import EnvironmentSpec, WeightDistribution
from .errors import BoundUnavailableError, ConfigurationError
from .fpp import estimate_time_constants, window_radius


@dataclass(frozen=True, eq=False)
class MarginalSpec:
    """Law of one edge weight: uniform, finitely many atoms, or a piecewise-linear CDF.

    For ``"piecewise"`` the CDF interpolates ``(xs, Fs)`` with ``Fs[0] = 0``
    and ``Fs[-1] = 1``.
    """

    kind: str
    lo: float | None = None
    hi: float | None = None
    values: np.ndarray | None = None
    probs: np.ndarray | None = None
    xs: np.ndarray | None = None
    Fs: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "uniform":
            if self.lo is None or self.hi is None or not 0 < self.lo < self.hi:
                raise ConfigurationError("uniform marginal needs 0 < lo < hi")
        elif self.kind == "atoms":
            v = np.asarray(self.values, dtype=float)
            pr = np.asarray(self.probs, dtype=float)
            if v.ndim != 1 or v.shape != pr.shape or v.size == 0 or np.any(v <= 0):
                raise ConfigurationError("atoms need positive values with matching probabilities")
            if np.any(pr < 0) or abs(pr.sum() - 1) > 1e-12:
                raise ConfigurationError("atom probabilities must lie on the simplex")
            order = np.argsort(v)
            object.__setattr__(self, "values", v[order])
            object.__setattr__(self, "probs", pr[order])
        elif self.kind == "piecewise":
            xs = np.asarray(self.xs, dtype=float)
            Fs = np.asarray(self.Fs, dtype=float)
            if xs.ndim != 1 or xs.shape != Fs.shape or xs.size < 2:
                raise ConfigurationError("piecewise CDF needs matching grids of length >= 2")
            if np.any(np.diff(xs) <= 0) or np.any(np.diff(Fs) < 0) or Fs[0] != 0 or Fs[-1] != 1 or xs[0] <= 0:
                raise ConfigurationError("piecewise CDF must rise from 0 to 1 over increasing positive xs")
            object.__setattr__(self, "xs", xs)
            object.__setattr__(self, "Fs", Fs)
        else:
            raise ConfigurationError(f"unknown marginal kind {self.kind!r}")

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "MarginalSpec":
        return cls("uniform", lo=float(lo), hi=float(hi))

    @classmethod
    def atoms(cls, values, probs) -> "MarginalSpec":
        return cls("atoms", values=values, probs=probs)

    @classmethod
    def piecewise(cls, xs, Fs) -> "MarginalSpec":
        return cls("piecewise", xs=xs, Fs=Fs)

    @classmethod
    def from_distribution(cls, dist: WeightDistribution) -> "MarginalSpec":
        if dist.kind == "uniform":
            return cls.uniform(dist.lo, dist.hi)
        if dist.kind == "atoms":
            if dist.width != 1:
                raise ConfigurationError("vector atoms have no scalar marginal")
            return cls.atoms(dist.values[:, 0], dist.probs)
        return cls.piecewise(dist.t_grid, dist.u_grid)

    def to_distribution(self) -> WeightDistribution:
        if self.kind == "uniform":
            return WeightDistribution.uniform(self.lo, self.hi)
        if self.kind == "atoms":
            return WeightDistribution.atoms(self.values, self.probs)
        return WeightDistribution.inverse_cdf(self.Fs, self.xs)

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "uniform":
            return self.lo, self.hi
        if self.kind == "atoms":
            live = self.values[self.probs > 0]
            return float(live[0]), float(live[-1])
        return float(self.xs[0]), float(self.xs[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        if self.kind == "uniform":
            return np.array([self.lo, self.hi])
        if self.kind == "atoms":
            return self.values.copy()
        return self.xs.copy()

    @property
    def density_floor(self) -> float:
        """Smallest density on the support; zero for atoms or flat CDF pieces."""
        if self.kind == "uniform":
            return 1.0 / (self.hi - self.lo)
        if self.kind == "atoms":
            return 0.0
        return float((np.diff(self.Fs) / np.diff(self.xs)).min())

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        if self.kind == "atoms":
            cum = np.concatenate([[0.0], np.cumsum(self.probs)])
            return cum[np.searchsorted(self.values, x, side="right")]
        return np.interp(x, self.xs, self.Fs, left=0.0, right=1.0)

    def cdf_left(self, x) -> np.ndarray:
        """``P(X < x)``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "atoms":
            cum = np.concatenate([[0.0], np.cumsum(self.probs)])
            return cum[np.searchsorted(self.values, x, side="left")]
        return self.cdf(x)

    def quantile(self, u) -> np.ndarray:
        """Generalized inverse ``inf{x : F(x) >= u}``, clipped to the support at ``u = 0``."""
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
            raise ConfigurationError("probabilities must lie in [0, 1]")
        if self.kind == "uniform":
            return self.lo + u * (self.hi - self.lo)
        if self.kind == "atoms":
            live = self.probs > 0
            vals = self.values[live]
            cum = np.cumsum(self.probs[live])
            cum[-1] = 1.0
            return vals[np.minimum(np.searchsorted(cum, u, side="left"), len(vals) - 1)]
        # first grid index where F reaches u, then interpolate on that segment
        j = np.clip(np.searchsorted(self.Fs, u, side="left"), 1, len(self.Fs) - 1)
        F0, F1 = self.Fs[j - 1], self.Fs[j]
        x0, x1 = self.xs[j - 1], self.xs[j]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(F1 > F0, (u - F0) / (F1 - F0), 1.0)
        out = x0 + np.clip(frac, 0, 1) * (x1 - x0)
        return np.where(u <= 0, self.xs[0], out)


def kolmogorov_distance(F1: MarginalSpec, F2: MarginalSpec, mesh: int = 10_000) -> float:
    """``sup_x |F1(x) - F2(x)|`` over all breakpoints and a uniform mesh.

    Both right values and left limits are compared, so the result is exact
    for atomic and piecewise-linear CDFs.
    """
    lo = min(F1.support[0], F2.support[0])
    hi = max(F1.support[1], F2.support[1])
    xs = np.unique(np.concatenate([F1.breakpoints, F2.breakpoints, np.linspace(lo, hi, max(mesh, 2))]))
    right = np.abs(F1.cdf(xs) - F2.cdf(xs)).max()
    left = np.abs(F1.cdf_left(xs) - F2.cdf_left(xs)).max()
    return float(max(right, left))


def skorokhod_values(F: MarginalSpec, u) -> np.ndarray | float:
    """Edge weight produced by the uniform ``u`` under the quantile coupling."""
    out = F.quantile(u)
    return float(out) if np.ndim(out) == 0 else out


def _u_mesh(F1: MarginalSpec, F2: MarginalSpec, mesh: int) -> np.ndarray:
    extra = []
    for F in (F1, F2):
        bp = F.breakpoints
        extra.append(F.cdf(bp))
        extra.append(F.cdf_left(bp))
    u = np.concatenate([np.linspace(0.0, 1.0, mesh)] + extra)
    return np.unique(np.clip(u, 0.0, 1.0))


def coupling_sup_gap(F1: MarginalSpec, F2: MarginalSpec, mesh: int = 100_000) -> float:
    """``sup_u |Q1(u) - Q2(u)|`` on a u-mesh plus every CDF level at a breakpoint."""
    u = _u_mesh(F1, F2, mesh)
    return float(np.abs(F1.quantile(u) - F2.quantile(u)).max())


@dataclass(frozen=True)
class CouplingBound:
    """Bounds on the edge-weight discrepancy of the quantile coupling.

    ``gap_bound = ks_distance / density_floor`` is certified.
    ``measured_gap`` is the sup over the u-mesh.  ``ks_dominates_gap``
    records whether the Kolmogorov distance by itself already bounds the
    measured gap; that is not true in general.
    """

    ks_distance: float
    density_floor: float
    gap_bound: float
    measured_gap: float

    @property
    def ok(self) -> bool:
        return self.measured_gap <= self.gap_bound * (1 + 1e-12) + 1e-15

    @property
    def ks_dominates_gap(self) -> bool:
        return self.measured_gap <= self.ks_distance * (1 + 1e-12) + 1e-15


def coupling_gap_bound(F1: MarginalSpec, F2: MarginalSpec, mesh: int = 100_000) -> CouplingBound:
    """Certified sup-gap bound ``d_Kol / rho*`` with ``rho* = min`` of the two density floors.

    The density argument needs the two supports to meet.  For disjoint
    supports the Kolmogorov distance saturates at one and carries no
    information, so the bound falls back to the width of the combined support.

    Raises
    ------
    BoundUnavailableError
        If either law has no positive density floor (e.g. atoms).
    """
    rho = min(F1.density_floor, F2.density_floor)
    if not rho > 0:
        raise BoundUnavailableError("a positive density floor is needed for the quantile gap bound")
    ks = kolmogorov_distance(F1, F2)
    (l1, h1), (l2, h2) = F1.support, F2.support
    bound = ks / rho if max(l1, l2) <= min(h1, h2) else max(h1, h2) - min(l1, l2)
    return CouplingBound(ks, rho, bound, coupling_sup_gap(F1, F2, mesh))


@dataclass(frozen=True)
class GapBound:
    """Bound on ``|m_1(x) - m_2(x)|`` per unit ``|x|_1``."""

    value: float
    route: str
    fingerprint: str

    def __post_init__(self):
        if not self.value >= 0:
            raise ConfigurationError("gap bounds are nonnegative")


def _fingerprint(*vals) -> str:
    return hashlib.sha256(repr(vals).encode()).hexdigest()[:16]


def _check_bounds(b1, a1, b2, a2, dist):
    if not (0 < a1 <= b1 and 0 < a2 <= b2):
        raise ConfigurationError("need 0 < a_i <= b_i")
    if dist < 0:
        raise ConfigurationError("coupling distance must be nonnegative")


def gap_bound_primal(b1: float, a1: float, b2: float, a2: float, coupling_dist: float) -> GapBound:
    """``max(b1/a1, b2/a2) * dist``: the geodesic of either medium has at most ``(b/a)|x|_1`` edges."""
    _check_bounds(b1, a1, b2, a2, coupling_dist)
    return GapBound(max(b1 / a1, b2 / a2) * coupling_dist, "primal",
                    _fingerprint("primal", b1, a1, b2, a2, coupling_dist))


def gap_bound_dual(b1: float, a1: float, b2: float, a2: float, coupling_dist: float) -> GapBound:
    """The Hamiltonian-side bound, larger than the primal one by ``b1 b2 / (a1 a2)``."""
    _check_bounds(b1, a1, b2, a2, coupling_dist)
    return GapBound(max(b1 / a1, b2 / a2) * (b1 * b2 / (a1 * a2)) * coupling_dist, "dual",
                    _fingerprint("dual", b1, a1, b2, a2, coupling_dist))


@dataclass(frozen=True)
class EmpiricalGap:
    """Coupled Monte-Carlo comparison of two time constants at ``x``.

    ``measured`` is the mean over replicas of ``|T_1 - T_2| / n`` per unit
    ``|x|_1``; ``half_width`` is the 95% Student-t half-width of the paired
    differences on the same scale.
    """

    measured: float
    half_width: float
    coupling_dist: float
    primal: GapBound
    dual: GapBound
    m1: float
    m2: float

    @property
    def ok(self) -> bool:
        return self.measured <= self.primal.value + self.half_width

    @property
    def dual_weaker(self) -> bool:
        return self.dual.value >= self.primal.value


def empirical_gap_check(spec1: EnvironmentSpec, spec2: EnvironmentSpec, x, n: int, seeds: int,
                        jobs: int = 1) -> EmpiricalGap:
    """Estimate both time constants on identically seeded windows and compare with the bounds."""
    from scipy import stats

    for s in (spec1, spec2):
        if s.kind not in ("iid-edges", "iid-undirected"):
            raise ConfigurationError("coupled comparison needs i.i.d. media")
        if s.distribution.width != 1:
            raise ConfigurationError("coupled comparison needs scalar weight laws")
    if spec1.d != spec2.d:
        raise ConfigurationError("media dimensions differ")
    spec2 = spec2.with_seed(spec1.seed)
    F1 = MarginalSpec.from_distribution(spec1.distribution)
    F2 = MarginalSpec.from_distribution(spec2.distribution)
    dist = coupling_sup_gap(F1, F2)
    B1, B2 = spec1.bounds, spec2.bounds
    primal = gap_bound_primal(B1.b, B1.a, B2.b, B2.a, dist)
    dual = gap_bound_dual(B1.b, B1.a, B2.b, B2.a, dist)
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        return EmpiricalGap(0.0, 0.0, dist, primal, dual, 0.0, 0.0)
    radius = max(window_radius(x, n, B1), window_radius(x, n, B2))
    e1 = estimate_time_constants(spec1, [x], [n], seeds, radius, jobs)[0]
    e2 = estimate_time_constants(spec2, [x], [n], seeds, radius, jobs)[0]
    l1 = float(np.abs(x).sum())
    diffs = np.abs(e1.scaled_times[:, -1] - e2.scaled_times[:, -1]) / l1
    measured = float(diffs.mean())
    if seeds > 1 and diffs.std(ddof=1) > 0:
        hw = float(stats.t.ppf(0.975, seeds - 1) * diffs.std(ddof=1) / math.sqrt(seeds))
    else:
        hw = 0.0 if seeds > 1 else math.inf
    return EmpiricalGap(measured, hw, dist, primal, dual, e1.estimate, e2.estimate)
