"""Variational formula for media constant along the hyperplanes ``sum(x) = z``.

For such media every admissible corrector gradient points along
``e_1 + ... + e_d``, so a candidate is one real number ``f_i`` per atom of
the weight law and the formula reads

    Hbar(p) = min over mean-zero f of  max_i H_sym(f_i, p, atom_i),
    H_sym(t, p, atom) = max_j |t + p_j| / atom_j.

:func:`run_algorithm` implements the three-step sup-lowering iteration;
:func:`brute_force_Hbar` solves the same convex program independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .environment import EnvironmentSpec, WeightDistribution
from .errors import ConfigurationError, ConvergenceError, FPPError

STATUSES = ("corrector-at-termination", "minimizer-not-corrector", "converged-limit", "iteration-cap")


class InvariantError(FPPError, AssertionError):
    """An iterate broke a property the iteration is supposed to preserve."""


@dataclass(frozen=True, eq=False)
class AtomicMedium:
    """Finitely many weight vectors ``atoms[i] = (t_i(e_1), ..., t_i(e_d))`` with probabilities."""

    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        probs = np.asarray(self.probs, dtype=float)
        if atoms.ndim != 2 or probs.shape != (atoms.shape[0],) or atoms.shape[0] == 0:
            raise ConfigurationError("atoms must be (n, d) with n probabilities")
        if np.any(~np.isfinite(atoms)) or np.any(atoms <= 0):
            raise ConfigurationError("atom weights must be positive and finite")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ConfigurationError("atom probabilities must lie on the simplex")
        atoms.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def live(self) -> np.ndarray:
        """Mask of atoms with positive probability."""
        return self.probs > 0

    @property
    def a(self) -> float:
        return float(self.atoms[self.live].min())

    @property
    def b(self) -> float:
        return float(self.atoms[self.live].max())

    @property
    def distribution(self) -> WeightDistribution:
        return WeightDistribution.atoms(self.atoms, self.probs)

    def to_spec(self, seed: int = 0) -> EnvironmentSpec:
        """The hyperplane-constant lattice medium with this atom law."""
        return EnvironmentSpec("hyperplane-symmetric", self.d, self.distribution, seed=seed)

    @classmethod
    def from_config(cls, cfg: Mapping) -> "AtomicMedium":
        try:
            return cls(cfg["atoms"], cfg["probs"])
        except KeyError as exc:
            raise ConfigurationError(f"atomic medium config missing key {exc}") from None


def _momentum(p, d: int) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.shape != (d,) or not np.all(np.isfinite(p)):
        raise ConfigurationError(f"momentum must be a finite vector in R^{d}")
    return p


def h_sym(t, p, atom) -> float | np.ndarray:
    """``max_j |t + p_j| / atom_j``; vectorized over ``t`` with ``atom`` of shape (d,) or (n, d)."""
    t = np.asarray(t, dtype=float)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    atom = np.asarray(atom, dtype=float)
    vals = np.abs(t[..., None] + p) / atom
    out = vals.max(axis=-1)
    return float(out) if out.ndim == 0 else out


def h_sym_minimum(atom, p) -> tuple[float, float]:
    """Unique minimizer ``t*`` of ``h_sym(., p, atom)`` and the minimum value.

    The minimum sits at a kink of one tent ``|t + p_j| / atom_j`` or where
    two tents cross, so it is found among finitely many candidates.
    """
    atom = np.atleast_1d(np.asarray(atom, dtype=float))
    p = _momentum(p, atom.size)
    w = 1.0 / atom
    cand = list(-p)
    for i in range(atom.size):
        for j in range(i + 1, atom.size):
            if w[i] != w[j]:
                cand.append((p[j] * w[j] - p[i] * w[i]) / (w[i] - w[j]))
            cand.append(-(p[i] * w[i] + p[j] * w[j]) / (w[i] + w[j]))
    cand = np.array(cand)
    vals = h_sym(cand, p, atom)
    k = int(np.argmin(vals))
    return float(cand[k]), float(vals[k])


@dataclass(frozen=True, eq=False)
class Profile:
    """Candidate ``f``: one value per atom, mean zero under the atom law."""

    p: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float)))
        f = np.array(self.f, dtype=float, copy=True)
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    @classmethod
    def zero(cls, medium: AtomicMedium, p) -> "Profile":
        return cls(_momentum(p, medium.d), np.zeros(medium.n))

    def values(self, medium: AtomicMedium) -> np.ndarray:
        """Per-atom ``h_sym(f_i, p, atom_i)``."""
        return (np.abs(self.f[:, None] + self.p) / medium.atoms).max(axis=1)

    def mean(self, medium: AtomicMedium) -> float:
        return float(medium.probs @ self.f)

    def in_F(self, medium: AtomicMedium, tol: float = 1e-12) -> bool:
        """Mean zero and ``|f + p_j| <= (b/a) |p|_inf`` on live atoms."""
        pinf = float(np.abs(self.p).max())
        scale = max(1.0, pinf)
        live = medium.live
        box = np.abs(self.f[live, None] + self.p).max() if live.any() else 0.0
        return abs(self.mean(medium)) <= tol * scale and box <= medium.b / medium.a * pinf + tol * scale


def _ess(values: np.ndarray, medium: AtomicMedium) -> tuple[float, float, float]:
    live = medium.live
    v = values[live]
    return float(v.max()), float(v.min()), float(medium.probs[live] @ v)


@dataclass(frozen=True)
class StepDiagnostics:
    """Quantities of one pass through the iteration.

    ``plus`` are atoms whose minimizer lies below the current value (the step
    lowers ``f``), ``minus`` those whose minimizer lies above.
    """

    mu0: float
    d: float
    sup_before: float
    min0: tuple[int, ...]
    S: tuple[int, ...]
    I: tuple[int, ...]
    plus: tuple[int, ...]
    minus: tuple[int, ...]
    xi: float = math.nan
    sup_after: float = math.nan
    in_F: bool = True

    @property
    def xi_ok(self) -> bool:
        return math.isnan(self.xi) or abs(self.xi) < 1 - 1e-12


def _tie_scale(values: np.ndarray, medium: AtomicMedium) -> float:
    return 1e-9 * max(float(values[medium.live].max()), np.finfo(float).tiny)


def classify_sets(profile: Profile, medium: AtomicMedium) -> StepDiagnostics:
    """Mean, gap and the atom partitions used by one step."""
    vals = profile.values(medium)
    sup, _, mu0 = _ess(vals, medium)
    tie = _tie_scale(vals, medium)
    live = np.flatnonzero(medium.live)
    min0, S, I, plus, minus = [], [], [], [], []
    for i in live:
        t_star, v_star = h_sym_minimum(medium.atoms[i], profile.p)
        at_min = vals[i] - v_star <= tie
        if at_min:
            min0.append(int(i))
        if vals[i] > mu0:
            S.append(int(i))
            if not at_min:
                (plus if t_star < profile.f[i] else minus).append(int(i))
        elif vals[i] < mu0:
            I.append(int(i))
    return StepDiagnostics(mu0, sup - mu0, sup, tuple(min0), tuple(S), tuple(I), tuple(plus), tuple(minus))


def _stuck_at_minimum(diag: StepDiagnostics, vals: np.ndarray, medium: AtomicMedium) -> bool:
    if not diag.min0:
        return False
    return diag.sup_before - vals[list(diag.min0)].max() <= _tie_scale(vals, medium)


def iterate_step(profile: Profile, medium: AtomicMedium) -> tuple[Profile, StepDiagnostics]:
    """One Step-3 update; the result is mean zero by construction of ``xi``.

    Raises
    ------
    ConfigurationError
        If the gap is already zero or the iteration should have stopped at
        the minimum-set test.
    """
    vals = profile.values(medium)
    diag = classify_sets(profile, medium)
    scale = 64 * np.finfo(float).eps * max(diag.sup_before, np.finfo(float).tiny)
    if diag.d <= scale:
        raise ConfigurationError("gap is zero: the profile is already a corrector")
    if _stuck_at_minimum(diag, vals, medium):
        raise ConfigurationError("sup is attained on the minimum set: the profile is already a minimizer")
    a = medium.a
    delta = np.zeros(medium.n)
    for i in diag.plus:
        t_star, _ = h_sym_minimum(medium.atoms[i], profile.p)
        delta[i] = max(-a * (vals[i] - diag.mu0), t_star - profile.f[i])
    for i in diag.minus:
        t_star, _ = h_sym_minimum(medium.atoms[i], profile.p)
        delta[i] = min(a * (vals[i] - diag.mu0), t_star - profile.f[i])
    I = list(diag.I)
    pr = medium.probs
    denom = float(pr[I] @ (a * (diag.mu0 - vals[I])))
    if not denom > 0:
        raise InvariantError("mass-balance denominator vanished with a positive gap")
    moved = list(diag.plus) + list(diag.minus)
    xi = -float(pr[moved] @ delta[moved]) / denom
    delta[I] = a * xi * (diag.mu0 - vals[I])
    f = profile.f + delta
    f = f - pr @ f
    new = Profile(profile.p, f)
    sup_after = float(new.values(medium)[medium.live].max())
    diag = StepDiagnostics(diag.mu0, diag.d, diag.sup_before, diag.min0, diag.S, diag.I,
                           diag.plus, diag.minus, xi, sup_after, new.in_F(medium))
    return new, diag


@dataclass(frozen=True, eq=False)
class AlgorithmResult:
    profile: Profile
    hbar: float
    status: str
    trace: tuple[StepDiagnostics, ...] = field(repr=False)
    a: float = 1.0
    b: float = 1.0
    lattice_corrector: bool = False

    @property
    def is_corrector(self) -> bool:
        """True when the returned profile is (the limit of) a corrector of the full lattice problem.

        A stop with equal per-atom values whose full Hamiltonian is not
        constant reports ``corrector-at-termination`` but is not a corrector;
        ``hbar`` is then only an upper bound on ``Hbar(p)``.
        """
        return self.status in ("corrector-at-termination", "converged-limit") and self.lattice_corrector

    @property
    def certified(self) -> bool:
        """True when ``hbar`` is provably ``Hbar(p)``.

        Either the sup sits on an atom already at its own minimum, or the
        profile is a corrector of the full lattice problem.  Otherwise
        ``hbar`` is only an upper bound: the iteration can settle on equal
        per-atom values above the optimum.
        """
        return self.status == "minimizer-not-corrector" or self.is_corrector

    @property
    def iterations(self) -> int:
        return sum(1 for s in self.trace if not math.isnan(s.sup_after))

    def descent_failures(self) -> list[int]:
        """Steps whose sup fell by less than ``d a / b`` although the next pass did not stop."""
        steps = [s for s in self.trace if not math.isnan(s.sup_after)]
        bad = []
        for k, s in enumerate(steps):
            terminal_next = k == len(steps) - 1 and self.status in STATUSES[:2]
            if terminal_next:
                continue
            if k == len(steps) - 1 and self.status == "converged-limit":
                continue
            need = s.sup_before - s.d * self.a / self.b
            if s.sup_after > need + 1e-12 * max(1.0, s.sup_before):
                bad.append(k)
        return bad

    def trace_rows(self):
        for k, s in enumerate(self.trace):
            yield {"iter": k, "mu0": s.mu0, "d": s.d, "sup": s.sup_before, "xi": s.xi}


def run_algorithm(medium: AtomicMedium, p, max_iter: int = 100_000, tol: float = 1e-10,
                  f0=None, strict: bool = True) -> AlgorithmResult:
    """Run the sup-lowering iteration from ``f0`` (default 0).

    Stops with ``corrector-at-termination`` when the gap vanishes (up to
    rounding), ``minimizer-not-corrector`` when the sup is attained on atoms
    already at their own minimum, ``converged-limit`` when the gap falls below
    ``tol`` relative to the sup, and ``iteration-cap`` otherwise.  ``hbar`` is
    the final essential sup.

    With ``strict`` the iteration raises :class:`InvariantError` as soon as an
    iterate leaves the admissible set or the sup increases.
    """
    p = _momentum(p, medium.d)
    if max_iter < 0 or not tol > 0:
        raise ConfigurationError("need max_iter >= 0 and tol > 0")
    profile = Profile.zero(medium, p) if f0 is None else Profile(p, f0)
    if strict and not profile.in_F(medium):
        raise ConfigurationError("starting profile is not admissible")
    trace: list[StepDiagnostics] = []
    status = "iteration-cap"
    for _ in range(max_iter + 1):
        vals = profile.values(medium)
        diag = classify_sets(profile, medium)
        if diag.d <= 64 * np.finfo(float).eps * max(diag.sup_before, np.finfo(float).tiny):
            trace.append(diag)
            status = "corrector-at-termination"
            break
        if _stuck_at_minimum(diag, vals, medium):
            trace.append(diag)
            status = "minimizer-not-corrector"
            break
        if diag.d <= tol * diag.sup_before:
            trace.append(diag)
            status = "converged-limit"
            break
        if len(trace) >= max_iter:
            trace.append(diag)
            break
        profile, step = iterate_step(profile, medium)
        trace.append(step)
        if strict:
            if not step.in_F:
                raise InvariantError(f"iterate {len(trace)} left the admissible set")
            if step.sup_after > step.sup_before * (1 + 1e-12):
                raise InvariantError(f"sup increased at iterate {len(trace)}")
    hbar = float(profile.values(medium)[medium.live].max())
    lo, hi = lattice_hamiltonian_range(profile, medium)
    vals = profile.values(medium)[medium.live]
    # a converged iterate keeps some per-atom spread; a genuine corrector limit
    # has no extra spread between neighbouring hyperplanes on top of it
    lattice_ok = hi - lo <= max(2.0 * float(vals.max() - vals.min()), 1e-9 * max(1.0, hbar))
    return AlgorithmResult(profile, hbar, status, tuple(trace), medium.a, medium.b, lattice_ok)


def check_corrector(profile: Profile, medium: AtomicMedium, tol: float = 1e-9) -> bool:
    """True when per-atom values agree within ``tol`` on live atoms.

    Equal per-atom values are necessary for a corrector but not sufficient;
    see :func:`is_lattice_corrector`.
    """
    hi, lo, _ = _ess(profile.values(medium), medium)
    return hi - lo <= tol


def _half_values(profile: Profile, medium: AtomicMedium) -> tuple[np.ndarray, np.ndarray]:
    """Per-atom ``max_j -(f + p_j)/t_j`` and ``max_j (f + p_j)/t_j`` on live atoms.

    At a lattice site on hyperplane ``z`` the first half comes from the
    forward edges, which belong to hyperplane ``z``, and the second from the
    backward edges, which belong to hyperplane ``z - 1``.  ``h_sym`` is the
    larger of the two halves of the same atom.
    """
    live = medium.live
    shifted = (profile.f[live, None] + profile.p) / medium.atoms[live]
    return (-shifted).max(axis=1), shifted.max(axis=1)


def lattice_hamiltonian_range(profile: Profile, medium: AtomicMedium) -> tuple[float, float]:
    """Essential inf and sup over lattice sites of the full discrete Hamiltonian of ``profile``.

    Hyperplanes carry independent atoms, so every ordered pair of live atoms
    occurs on neighbouring hyperplanes and the site value is
    ``max(forward(i), backward(j))`` for any pair ``(i, j)``.
    """
    forward, backward = _half_values(profile, medium)
    return float(max(forward.min(), backward.min())), float(max(forward.max(), backward.max()))


def is_lattice_corrector(profile: Profile, medium: AtomicMedium, tol: float = 1e-9) -> bool:
    """True when the full discrete Hamiltonian is constant over lattice sites within ``tol``.

    This is stronger than :func:`check_corrector`.  With atoms ``(1, 2)`` and
    ``(2, 1)``, ``p = (1, -1)`` and ``f = 0`` both per-atom values equal 1, yet
    sites with a ``(1, 2)`` hyperplane above a ``(2, 1)`` hyperplane see 1/2.
    """
    lo, hi = lattice_hamiltonian_range(profile, medium)
    return hi - lo <= tol


def infsup_bounds(profile: Profile, medium: AtomicMedium) -> tuple[float, float]:
    """Certified bracket ``lo <= Hbar(p) <= hi`` from one admissible profile.

    ``hi`` is the largest per-atom value.  ``lo`` is the essential inf of
    the full discrete Hamiltonian over lattice sites, which can sit below the
    smallest per-atom value.
    """
    return lattice_hamiltonian_range(profile, medium)


@dataclass(frozen=True)
class BruteForceResult:
    hbar: float
    profile: Profile
    certified: bool
    star_gain: float


def _level_interval(medium: AtomicMedium, p: np.ndarray, s: float):
    lo = (-p - s * medium.atoms).max(axis=1)
    hi = (-p + s * medium.atoms).min(axis=1)
    return lo, hi


def _feasible(medium: AtomicMedium, p: np.ndarray, s: float) -> bool:
    lo, hi = _level_interval(medium, p, s)
    live = medium.live
    if np.any(lo[live] > hi[live]):
        return False
    pr = medium.probs
    return float(pr[live] @ lo[live]) <= 0.0 <= float(pr[live] @ hi[live])


def brute_force_Hbar(medium: AtomicMedium, p, resolution: float = 1e-13, star_radius: float = 1e-7,
                     star_points: int = 64, seed: int = 0) -> BruteForceResult:
    """Minimize ``max_i h_sym(f_i)`` over mean-zero ``f`` by bisection on the level.

    At level ``s`` atom ``i`` admits exactly the interval
    ``[max_j(-p_j - s t_ij), min_j(-p_j + s t_ij)]``; the level is feasible
    when every interval is nonempty and zero lies between the weighted sums
    of the endpoints.  The returned profile is certified by checking that no
    mean-zero perturbation of radius ``star_radius`` (coordinate pairs plus
    random directions) lowers the objective.
    """
    p = _momentum(p, medium.d)
    if medium.n > 12:
        raise ConfigurationError("brute force is meant for small atom counts")
    live = medium.live
    hi_s = float(Profile.zero(medium, p).values(medium)[live].max())
    lo_s = 0.0
    if hi_s == 0.0:
        prof = Profile.zero(medium, p)
        return BruteForceResult(0.0, prof, True, 0.0)
    while hi_s - lo_s > resolution * hi_s:
        mid = 0.5 * (lo_s + hi_s)
        if mid in (lo_s, hi_s):
            break
        if _feasible(medium, p, mid):
            hi_s = mid
        else:
            lo_s = mid
    lo, hi = _level_interval(medium, p, hi_s)
    pr = medium.probs
    L, U = float(pr[live] @ lo[live]), float(pr[live] @ hi[live])
    lam = 0.0 if U == L else -L / (U - L)
    f = np.where(live, lo + lam * (hi - lo), 0.0)
    f = f - pr @ f
    prof = Profile(p, f)
    g0 = float(prof.values(medium)[live].max())

    rng = np.random.default_rng(seed)
    dirs = []
    idx = np.flatnonzero(live)
    for i in idx:
        for j in idx:
            if i < j:
                v = np.zeros(medium.n)
                v[i], v[j] = 1.0 / pr[i], -1.0 / pr[j]
                dirs.extend([v, -v])
    for _ in range(star_points):
        v = np.where(live, rng.normal(size=medium.n), 0.0)
        v -= (pr @ v) * np.where(live, 1.0, 0.0)
        dirs.append(v)
    gain = 0.0
    for v in dirs:
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        g = float(Profile(p, f + star_radius * v / nv).values(medium)[live].max())
        gain = max(gain, g0 - g)
    return BruteForceResult(g0, prof, gain <= 1e-12 * max(1.0, g0), gain)
