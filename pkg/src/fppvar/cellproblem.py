"""Discrete control problems whose scaled values converge to ``-Hbar(p)``.

Two routes are provided:

* the discounted stationary problem
  ``nu(x) = min_alpha (p.alpha + exp(-eps tau(x, alpha)) nu(x + alpha))``
  on a torus, with ``-eps nu(0) -> Hbar(p)`` as ``eps -> 0``;
* the finite time-horizon problem
  ``mu(x, t) = min over paths of time <= t of  sum p.alpha_i + mu0(end)``,
  with ``-mu(0, t) / t -> Hbar(p)`` as ``t -> inf``.

Because the running cost ``p.alpha`` telescopes along a path, the horizon
value is ``min over y in R(x, t) of p.(y - x) + mu0(y)`` and needs only one
shortest-path expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._rng import derive_seed
from .environment import EnvironmentSpec, EnvironmentWindow, sample_window
from .errors import BoundsError, ConfigurationError, ConvergenceError, DomainTooSmallError, TopologyError
from .fpp import first_passage_times


def _as_momentum(p, d: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.shape != (d,) or not np.all(np.isfinite(p)):
        raise ConfigurationError(f"momentum must be a finite vector in R^{d}, got {p.tolist()}")
    return p


@dataclass(frozen=True, eq=False)
class LatticeFunction:
    """Real values on the points of a window, wrapped on a torus."""

    values: np.ndarray
    origin: tuple[int, ...]
    topology: str = "open-box"

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("lattice function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin", tuple(int(o) for o in self.origin))

    @classmethod
    def on(cls, env: EnvironmentWindow, values) -> "LatticeFunction":
        values = np.asarray(values, dtype=float)
        if np.ndim(values) == 0:
            values = np.full(env.box, float(values))
        if values.shape != env.box:
            raise ConfigurationError(f"values shape {values.shape} does not match window {env.box}")
        return cls(values, env.origin, env.topology)

    @classmethod
    def from_callable(cls, env: EnvironmentWindow, fn: Callable) -> "LatticeFunction":
        pts = env.points()
        return cls.on(env, np.array([fn(x) for x in pts]).reshape(env.box))

    @classmethod
    def linear(cls, env: EnvironmentWindow, q) -> "LatticeFunction":
        """``x -> q.x`` on an open box."""
        if env.topology == "torus":
            raise TopologyError("a nonconstant linear function is not periodic")
        q = _as_momentum(q, env.d)
        return cls.on(env, (env.points() @ q).reshape(env.box))

    @property
    def box(self) -> tuple[int, ...]:
        return self.values.shape

    def _local(self, x) -> tuple[int, ...]:
        rel = np.asarray(x, dtype=np.int64) - np.asarray(self.origin)
        if self.topology == "torus":
            rel = rel % np.asarray(self.box)
        elif np.any(rel < 0) or np.any(rel >= np.asarray(self.box)):
            raise BoundsError(f"{tuple(np.asarray(x).tolist())} outside the function's window")
        return tuple(int(r) for r in rel)

    def __call__(self, x) -> float:
        return float(self.values[self._local(x)])

    def at(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized lookup at points of shape (N, d)."""
        rel = np.asarray(pts, dtype=np.int64) - np.asarray(self.origin)
        if self.topology == "torus":
            rel = rel % np.asarray(self.box)
        elif np.any(rel < 0) or np.any(rel >= np.asarray(self.box)):
            raise BoundsError("lookup outside the function's window")
        return self.values[tuple(rel.T)]

    def derivative(self, x, k: int) -> float:
        """``phi(x + alpha_k) - phi(x)``."""
        d = len(self.box)
        step = np.zeros(d, dtype=np.int64)
        step[k % d] = 1 if k < d else -1
        return self(np.asarray(x) + step) - self(x)

    @property
    def lipschitz_norm(self) -> float:
        """Largest nearest-neighbor difference, i.e. the Lipschitz constant for the l1 path metric."""
        worst = 0.0
        for ax in range(self.values.ndim):
            if self.topology == "torus":
                diff = np.roll(self.values, -1, axis=ax) - self.values
            else:
                diff = np.diff(self.values, axis=ax)
            if diff.size:
                worst = max(worst, float(np.abs(diff).max()))
        return worst


def _shifted(values: np.ndarray, k: int, d: int) -> np.ndarray:
    """``values(x + alpha_k)`` on a torus."""
    return np.roll(values, -1 if k < d else 1, axis=k % d)


def _require_torus(env: EnvironmentWindow):
    if env.topology != "torus":
        raise TopologyError("the stationary problem needs a torus window")


def discrete_hamiltonian(phi: LatticeFunction, p, x, env: EnvironmentWindow) -> float:
    """``sup_alpha (-(phi(x+alpha) - phi(x)) - p.alpha) / tau(x, alpha)``."""
    p = _as_momentum(p, env.d)
    dirs = env.directions.directions
    return max((-phi.derivative(x, k) - p @ dirs[k]) / env.weight(x, k) for k in range(2 * env.d))


def hamiltonian_field(values: np.ndarray, p, env: EnvironmentWindow) -> np.ndarray:
    """Discrete Hamiltonian at every point of a torus window."""
    _require_torus(env)
    p = _as_momentum(p, env.d)
    d = env.d
    dirs = env.directions.directions
    out = np.full(env.box, -np.inf)
    for k in range(2 * d):
        num = -(_shifted(values, k, d) - values) - p @ dirs[k]
        out = np.maximum(out, num / env.weights[..., k])
    return out


def stationary_bounds(p, epsilon: float, bounds) -> tuple[float, float]:
    """Exact range of the stationary value: ``-|p|/(1-e^{-eps a}) <= nu <= -|p|/(1-e^{-eps b})``."""
    pinf = float(np.max(np.abs(p)))
    return (-pinf / -math.expm1(-epsilon * bounds.a), -pinf / -math.expm1(-epsilon * bounds.b))


@dataclass(frozen=True, eq=False)
class CellField:
    """Fixed point of the discounted stationary problem on a torus.

    ``residual`` is the certified sup-norm Bellman residual
    ``||nu - Phi nu||``; the distance to the exact fixed point is at most
    ``residual / (1 - exp(-eps a))``.
    """

    p: np.ndarray
    epsilon: float
    values: np.ndarray
    residual: float
    sweeps: int
    fingerprint: str
    contraction: float
    differences: np.ndarray = field(repr=False)

    @property
    def error_bound(self) -> float:
        return self.residual / (1.0 - self.contraction)

    def at_origin(self) -> float:
        return float(self.values[(0,) * self.values.ndim])

    def as_function(self) -> LatticeFunction:
        return LatticeFunction(self.values, (0,) * self.values.ndim, "torus")


def bellman_operator(values: np.ndarray, p, epsilon: float, env: EnvironmentWindow) -> np.ndarray:
    """One Jacobi application of the stationary dynamic programming map."""
    d = env.d
    dirs = env.directions.directions
    disc = np.exp(-epsilon * env.weights)
    out = np.full(env.box, np.inf)
    for k in range(2 * d):
        out = np.minimum(out, p @ dirs[k] + disc[..., k] * _shifted(values, k, d))
    return out


def solve_stationary(env: EnvironmentWindow, p, epsilon: float, tol: float = 1e-10,
                     max_sweeps: int | None = None) -> CellField:
    """Discounted stationary value on a torus by value iteration.

    Sweeps are red-black Gauss-Seidel when every extent is even (the two
    colors are then independent) and Jacobi otherwise.  Each sweep is checked
    to shrink the successive difference by at least ``exp(-eps a)``.

    Raises
    ------
    TopologyError
        For open-box windows.
    ConvergenceError
        If the residual does not reach ``tol`` within ``max_sweeps``, or the
        contraction check fails.
    """
    _require_torus(env)
    p = _as_momentum(p, env.d)
    if not epsilon > 0 or not math.isfinite(epsilon):
        raise ConfigurationError("epsilon must be positive")
    if not tol > 0:
        raise ConfigurationError("tol must be positive")
    q = math.exp(-epsilon * env.bounds.a)
    lo, hi = stationary_bounds(p, epsilon, env.bounds)
    nu = np.full(env.box, 0.5 * (lo + hi))
    red_black = all(n % 2 == 0 for n in env.box)
    if red_black:
        red = (np.indices(env.box).sum(axis=0) % 2) == 0
    r = float(np.abs(nu - bellman_operator(nu, p, epsilon, env)).max())
    if max_sweeps is None:
        span = max(r, tol) * (1 + q) / (1 - q)
        max_sweeps = int(math.ceil(math.log(tol / span) / math.log(q))) + 50 if r > tol else 50
    diffs = []
    sweeps = 0
    scale = max(abs(lo), 1.0)
    while r > tol:
        if sweeps >= max_sweeps:
            raise ConvergenceError(f"stationary solve stopped at residual {r:.3e} > {tol:.1e}",
                                   {"sweeps": sweeps, "residual": r, "epsilon": epsilon})
        if red_black:
            new = nu.copy()
            new[red] = bellman_operator(new, p, epsilon, env)[red]
            new[~red] = bellman_operator(new, p, epsilon, env)[~red]
        else:
            new = bellman_operator(nu, p, epsilon, env)
        diff = float(np.abs(new - nu).max())
        if diffs and diff > q * diffs[-1] + 64 * np.finfo(float).eps * scale:
            raise ConvergenceError("sweep failed the contraction check",
                                   {"sweep": sweeps, "previous": diffs[-1], "current": diff, "factor": q})
        diffs.append(diff)
        nu = new
        sweeps += 1
        r = float(np.abs(nu - bellman_operator(nu, p, epsilon, env)).max())
    nu.setflags(write=False)
    return CellField(p, float(epsilon), nu, r, sweeps, env.fingerprint, q, np.array(diffs))


def check_hjb_residual(cell: CellField, env: EnvironmentWindow) -> float:
    """``max_x |eps nu(x) + H(nu, p, x)|``; of order ``eps`` for a converged field."""
    return float(np.abs(cell.epsilon * cell.values + hamiltonian_field(cell.values, cell.p, env)).max())


@dataclass(frozen=True)
class StationaryEstimate:
    p: tuple[float, ...]
    epsilons: tuple[float, ...]
    values: tuple[float, ...]
    residuals: tuple[float, ...]
    sweeps: tuple[int, ...]
    extrapolated: float
    slope: float

    def records(self):
        for e, v, r, s in zip(self.epsilons, self.values, self.residuals, self.sweeps):
            yield {"p": list(self.p), "epsilon": e, "value": v, "residual": r, "sweeps": s}


def estimate_Hbar_stationary(env: EnvironmentWindow, p, epsilon_ladder: Sequence[float],
                             tol: float = 1e-10) -> StationaryEstimate:
    """``-eps nu_eps(0)`` along a decreasing ladder, extrapolated linearly to ``eps = 0``.

    The line passes through the two smallest ladder points; ``slope`` is its
    coefficient in ``eps``.
    """
    eps = [float(e) for e in epsilon_ladder]
    if len(eps) < 2 or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigurationError("epsilon ladder must be strictly decreasing, positive, length >= 2")
    p = _as_momentum(p, env.d)
    vals, res, sweeps = [], [], []
    for e in eps:
        cell = solve_stationary(env, p, e, tol)
        vals.append(-e * cell.at_origin())
        res.append(cell.residual)
        sweeps.append(cell.sweeps)
    e1, e2 = eps[-1], eps[-2]
    slope = (vals[-2] - vals[-1]) / (e2 - e1)
    return StationaryEstimate(tuple(p.tolist()), tuple(eps), tuple(vals), tuple(res), tuple(sweeps),
                              vals[-1] - slope * e1, slope)


def stationary_window_sensitivity(spec: EnvironmentSpec, box, p, epsilon: float,
                                  tol: float = 1e-10) -> tuple[float, float]:
    """``-eps nu(0)`` on a torus and on the torus of doubled extents."""
    box = (int(box),) * spec.d if np.isscalar(box) else tuple(box)
    small = solve_stationary(sample_window(spec, box, "torus"), p, epsilon, tol)
    big = solve_stationary(sample_window(spec, tuple(2 * n for n in box), "torus"), p, epsilon, tol)
    return -epsilon * small.at_origin(), -epsilon * big.at_origin()


@dataclass(frozen=True)
class HorizonValue:
    """``mu(x, t)`` with the lattice point attaining it."""

    x: tuple[int, ...]
    t: float
    value: float
    argmin: tuple[int, ...]


def _horizon_frame(env: EnvironmentWindow, x, t_max: float):
    """Open-box window to search and the lookup offset for the terminal cost."""
    if env.topology == "torus":
        radius = int(math.floor(t_max / env.bounds.a)) + 1
        return env.lifted(x, radius)
    return env


def _horizon_curve(env: EnvironmentWindow, p, x, ts: Sequence[float], mu0: LatticeFunction,
                   confined: bool = False):
    ts = [float(t) for t in ts]
    if any(t < 0 or not math.isfinite(t) for t in ts):
        raise ConfigurationError("time budgets must be finite and nonnegative")
    p = _as_momentum(p, env.d)
    x = np.asarray(x, dtype=np.int64)
    t_max = max(ts)
    frame = _horizon_frame(env, x, t_max)
    ptm = first_passage_times(frame, x, limit=t_max)
    inside = ptm.times <= t_max
    if frame.topology == "open-box" and not confined:
        for ax in range(frame.d):
            if np.take(inside, 0, axis=ax).any() or np.take(inside, frame.box[ax] - 1, axis=ax).any():
                raise DomainTooSmallError(f"reachable set from {tuple(x.tolist())} within {t_max} "
                                          "touches the window boundary")
    local = np.argwhere(inside)
    pts = local + np.asarray(frame.origin)
    times = ptm.times[tuple(local.T)]
    cost = (pts - x) @ p + mu0.at(pts)
    order = np.lexsort((np.arange(len(times)), times))
    times, cost, pts = times[order], cost[order], pts[order]
    best = np.minimum.accumulate(cost)
    # index of the first point achieving each running minimum (earliest reached, then lexicographic)
    improves = np.ones(len(cost), dtype=bool)
    improves[1:] = cost[1:] < best[:-1]
    arg = np.maximum.accumulate(np.where(improves, np.arange(len(cost)), 0))
    out = []
    for t in ts:
        j = int(np.searchsorted(times, t, side="right")) - 1
        out.append(HorizonValue(tuple(x.tolist()), t, float(best[j]), tuple(pts[arg[j]].tolist())))
    return out


def solve_finite_horizon(env: EnvironmentWindow, p, x, t: float, mu0: LatticeFunction | None = None,
                         confined: bool = False) -> HorizonValue:
    """``mu(x, t) = min over y reachable within t of p.(y - x) + mu0(y)``.

    On a torus the search runs on the periodic lift around ``x`` and ``mu0``
    is read periodically.  ``mu0`` defaults to zero.  With ``confined`` an
    open box is treated as the whole domain: paths may not leave it and
    touching its boundary is not an error.

    Raises
    ------
    DomainTooSmallError
        If an open-box window clips the reachable set.
    """
    if mu0 is None:
        mu0 = LatticeFunction.on(env, 0.0)
    return _horizon_curve(env, p, x, [t], mu0, confined)[0]


@dataclass(frozen=True)
class HorizonEstimate:
    p: tuple[float, ...]
    ts: tuple[float, ...]
    values: tuple[float, ...]
    per_seed: np.ndarray
    extrapolated: float
    half_width: float

    @property
    def estimate(self) -> float:
        return self.values[-1]

    def records(self):
        for t, v in zip(self.ts, self.values):
            yield {"p": list(self.p), "t": t, "value": v}


def estimate_Hbar_horizon(source, p, t_ladder: Sequence[float], seeds: int = 1) -> HorizonEstimate:
    """``-mu(0, t) / t`` with zero terminal cost along an increasing ladder.

    ``source`` is a window or a spec.  For a spec, ``seeds`` replica open
    boxes just large enough for the largest budget are sampled and the values
    averaged.  ``extrapolated`` fits ``H + c/t`` through the two largest budgets.
    """
    ts = [float(t) for t in t_ladder]
    if not ts or any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ConfigurationError("time ladder must be positive and strictly increasing")
    if isinstance(source, EnvironmentWindow):
        envs = [source]
    else:
        spec = source
        radius = int(math.floor(ts[-1] / spec.bounds.a)) + 2
        envs = [sample_window(spec.with_seed(derive_seed(spec.seed, i)) if spec.kind != "explicit" else spec,
                              (2 * radius + 1,) * spec.d, "open-box", (-radius,) * spec.d)
                for i in range(seeds)]
    rows = []
    for env in envs:
        zero = LatticeFunction.on(env, 0.0)
        curve = _horizon_curve(env, p, (0,) * env.d, ts, zero)
        rows.append([-h.value / h.t for h in curve])
    per_seed = np.array(rows)
    mean = per_seed.mean(axis=0)
    if len(ts) >= 2:
        t1, t2 = ts[-2], ts[-1]
        extrap = (t2 * mean[-1] - t1 * mean[-2]) / (t2 - t1)
    else:
        extrap = float(mean[-1])
    if per_seed.shape[0] > 1:
        from scipy import stats
        sd = per_seed[:, -1].std(ddof=1)
        hw = float(stats.t.ppf(0.975, per_seed.shape[0] - 1) * sd / math.sqrt(per_seed.shape[0])) if sd else 0.0
    else:
        hw = math.inf
    return HorizonEstimate(tuple(_as_momentum(p, envs[0].d).tolist()), tuple(ts), tuple(mean.tolist()),
                           per_seed, float(extrap), hw)


@dataclass(frozen=True)
class ComparisonViolation:
    form: str
    x: tuple[int, ...]
    t: float
    mu: float
    bound: float


@dataclass(frozen=True)
class ComparisonReport:
    """Both sandwich inequalities checked at sampled ``(x, t)``.

    ``violations`` covers the lower bound ``mu >= phi - t sup H`` and the
    upper bound ``mu <= phi - t inf H`` exactly as stated.
    ``lagged_violations`` covers ``mu <= phi - max(inf H, 0) max(t - b, 0)``,
    which accounts for the last step not fitting in the budget.
    """

    sup_h: float
    inf_h: float
    checked: int
    violations: tuple[ComparisonViolation, ...]
    lagged_violations: tuple[ComparisonViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_comparison_principle(phi: LatticeFunction, p, env: EnvironmentWindow, samples,
                               atol: float = 1e-12) -> ComparisonReport:
    """Compare ``mu(x, t)`` (terminal cost ``phi``) against ``phi(x) - t sup/inf H(phi)``.

    ``env`` must be a torus so that the Hamiltonian is defined everywhere.
    Violations are collected, never raised.
    """
    _require_torus(env)
    if phi.topology != "torus" or phi.box != env.box:
        raise ConfigurationError("phi must live on the same torus as the medium")
    ham = hamiltonian_field(phi.values, p, env)
    sup_h, inf_h = float(ham.max()), float(ham.min())
    bad, lagged = [], []
    n = 0
    for x, t in samples:
        x = tuple(int(c) for c in x)
        mu = solve_finite_horizon(env, p, x, t, phi).value
        base = phi(x)
        scale = atol * max(1.0, abs(base), abs(mu), t * max(abs(sup_h), abs(inf_h)))
        lower = base - t * sup_h
        upper = base - t * inf_h
        lag = base - max(inf_h, 0.0) * max(t - env.bounds.b, 0.0)
        if mu < lower - scale:
            bad.append(ComparisonViolation("lower", x, float(t), mu, lower))
        if mu > upper + scale:
            bad.append(ComparisonViolation("upper", x, float(t), mu, upper))
        if mu > lag + scale:
            lagged.append(ComparisonViolation("upper-lagged", x, float(t), mu, lag))
        n += 1
    return ComparisonReport(sup_h, inf_h, n, tuple(bad), tuple(lagged))


def random_lipschitz_function(env: EnvironmentWindow, lipschitz: float, rng: np.random.Generator,
                              modes: int = 4) -> LatticeFunction:
    """Random periodic function on a torus with nearest-neighbor differences at most ``lipschitz``.

    A sum of random Fourier modes rescaled so the largest edge difference
    equals ``lipschitz``.
    """
    _require_torus(env)
    idx = np.indices(env.box).astype(float)
    vals = np.zeros(env.box)
    for _ in range(modes):
        freq = [rng.integers(0, n) for n in env.box]
        phase = rng.uniform(0, 2 * math.pi)
        arg = sum(2 * math.pi * f * idx[i] / env.box[i] for i, f in enumerate(freq))
        vals += rng.normal() * np.cos(arg + phase)
    base = LatticeFunction(vals, (0,) * env.d, "torus")
    lip = base.lipschitz_norm
    if lip == 0:
        return LatticeFunction(np.zeros(env.box), (0,) * env.d, "torus")
    return LatticeFunction(vals * (lipschitz / lip), (0,) * env.d, "torus")
