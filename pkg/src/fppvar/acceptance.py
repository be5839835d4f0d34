"""Built-in acceptance suite.

Each criterion is a function returning a :class:`CriterionResult`; the test
suite and the ``validate`` command both call :func:`run_acceptance`.
Tolerances are those the criteria are defined with and are not adjustable
except for the random seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cellproblem import (LatticeFunction, check_comparison_principle, check_hjb_residual,
                          estimate_Hbar_horizon, estimate_Hbar_stationary, random_lipschitz_function,
                          solve_finite_horizon, solve_stationary)
from .distcompare import (MarginalSpec, coupling_gap_bound, empirical_gap_check, gap_bound_dual,
                          gap_bound_primal, kolmogorov_distance)
from .environment import (EnvironmentSpec, WeightDistribution, constant_spec, explicit_spec_from_array,
                          sample_window)
from .errors import FPPError
from .fpp import estimate_time_constant, estimate_time_constants, first_passage_times
from .norms import check_norm_axioms, direction_mesh, dual_norm, tabulate
from .oracles import enumerate_horizon_value, enumerate_passage_times
from .symmin import AtomicMedium, InvariantError, brute_force_Hbar, infsup_bounds, run_algorithm

ULP_TOL = 4 * np.finfo(float).eps


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    limit: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = "; ".join(f"{k}={_short(v)}" for k, v in self.details.items())
        return f"[{status}] criterion {self.number}: {self.title} ({self.seconds:.1f}s) {extra}"


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def _timed(number: int, title: str, limit: float | None = None):
    def wrap(fn: Callable[[int], tuple[bool, dict]]):
        def run(seed: int = 0) -> CriterionResult:
            t0 = time.perf_counter()
            try:
                ok, details = fn(seed)
            except FPPError as exc:
                ok, details = False, {"error": f"{type(exc).__name__}: {exc}"}
            dt = time.perf_counter() - t0
            if limit is not None and dt > limit:
                ok = False
                details["runtime_exceeded"] = f"{dt:.1f}s > {limit}s"
            return CriterionResult(number, title, ok, details, dt, limit)
        run.number = number
        run.title = title
        return run
    return wrap


def random_d1_media(seed: int = 0, count: int = 5) -> list[tuple[AtomicMedium, float]]:
    """Finite-atom one-dimensional media (2 to 5 atoms in [1, 3]) with a nonzero momentum."""
    rng = np.random.default_rng(1000 + seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, 6))
        atoms = rng.uniform(1, 3, size=(n, 1))
        probs = rng.dirichlet(np.ones(n))
        p = float(rng.choice([-1, 1]) * rng.uniform(0.5, 2.0))
        out.append((AtomicMedium(atoms, probs), p))
    return out


def random_d2_media(seed: int = 0, count: int = 20) -> list[tuple[AtomicMedium, np.ndarray]]:
    """Symmetric two-dimensional media with 2 to 6 atoms in [1, 3]."""
    rng = np.random.default_rng(2000 + seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, 7))
        atoms = rng.uniform(1, 3, size=(n, 2))
        probs = rng.dirichlet(np.ones(n))
        out.append((AtomicMedium(atoms, probs), rng.normal(size=2)))
    return out


@_timed(1, "homogeneous exactness", limit=30.0)
def criterion_homogeneous(seed: int = 0):
    failures = []
    worst_stat = worst_hor = 0.0
    for c in (1.0, 2.5):
        for d in (1, 2):
            spec = constant_spec(c, d)
            e1 = np.eye(d)[0]
            est = estimate_time_constant(spec, e1, [10, 40], seeds=3)
            if est.estimate != c or est.half_width != 0.0:
                failures.append(f"m(e1) c={c} d={d}: {est.estimate} +- {est.half_width}")
            sym = run_algorithm(AtomicMedium(np.full((1, d), c), [1.0]), e1)
            if sym.hbar != 1.0 / c:
                failures.append(f"symmetric c={c} d={d}: {sym.hbar}")
            env = sample_window(spec, (8,) * d, "torus")
            stat = estimate_Hbar_stationary(env, e1, [0.2, 0.1, 0.05, 0.025])
            worst_stat = max(worst_stat, abs(stat.extrapolated - 1 / c))
            if abs(stat.extrapolated - 1 / c) > 5e-3:
                failures.append(f"stationary c={c} d={d}: {stat.extrapolated}")
            hor = estimate_Hbar_horizon(spec, e1, [400.0])
            worst_hor = max(worst_hor, abs(hor.estimate - 1 / c))
            if abs(hor.estimate - 1 / c) > 2 / 400:
                failures.append(f"horizon c={c} d={d}: {hor.estimate}")
    return not failures, {"stationary_err": worst_stat, "horizon_err": worst_hor,
                          "failures": failures or "none"}


@_timed(2, "d=1 corrector law", limit=120.0)
def criterion_d1_corrector(seed: int = 0):
    failures = []
    worst_alg = worst_bf = worst_z = 0.0
    for k, (medium, p) in enumerate(random_d1_media(seed)):
        mean_tau = float(medium.probs @ medium.atoms[:, 0])
        exact = abs(p) / mean_tau
        res = run_algorithm(medium, [p])
        bf = brute_force_Hbar(medium, [p])
        worst_alg = max(worst_alg, abs(res.hbar - exact))
        worst_bf = max(worst_bf, abs(bf.hbar - res.hbar))
        if not res.is_corrector:
            failures.append(f"medium {k}: status {res.status}")
        if abs(res.hbar - exact) > 1e-9:
            failures.append(f"medium {k}: hbar {res.hbar} vs {exact}")
        if abs(bf.hbar - res.hbar) > 1e-6:
            failures.append(f"medium {k}: brute force {bf.hbar}")
        spec = medium.to_spec(seed=7919 * (k + 1) + seed)
        est = estimate_time_constant(spec, [1.0], [10_000], seeds=16)
        samples = est.scaled_times[:, -1]
        se = samples.std(ddof=1) / math.sqrt(len(samples))
        target = abs(p) / res.hbar  # 1 / Hbar(1) by homogeneity
        z = abs(est.estimate - target) / se if se > 0 else (0.0 if est.estimate == target else math.inf)
        worst_z = max(worst_z, z)
        if z > 3:
            failures.append(f"medium {k}: Monte Carlo {est.estimate} vs {target} ({z:.2f} se)")
    return not failures, {"alg_err": worst_alg, "brute_gap": worst_bf, "worst_z": worst_z,
                          "failures": failures or "none"}


@_timed(3, "oracle equivalence on 3x3 boxes", limit=60.0)
def criterion_oracles(seed: int = 0):
    rng = np.random.default_rng(3000 + seed)
    mismatches = 0
    for _ in range(50):
        w = rng.uniform(1, 3, size=(3, 3, 4))
        env = sample_window(explicit_spec_from_array(w), (3, 3))
        src = tuple(int(c) for c in rng.integers(0, 3, size=2))
        ptm = first_passage_times(env, src)
        oracle = enumerate_passage_times(env, src)
        for y, t in oracle.items():
            if ptm.time(y) != t:
                mismatches += 1
        p = rng.integers(-1024, 1025, size=2) / 1024.0
        mu0 = LatticeFunction.on(env, rng.uniform(-1, 1, size=(3, 3)))
        for t in rng.uniform(0, 8, size=4):
            got = solve_finite_horizon(env, p, src, float(t), mu0, confined=True).value
            want = enumerate_horizon_value(env, p, src, float(t), mu0)
            if got != want:
                mismatches += 1
    return mismatches == 0, {"mismatches": mismatches}


@_timed(4, "HJB residual scaling")
def criterion_residual(seed: int = 0):
    dist = WeightDistribution.uniform(1.0, 2.0)
    media = {
        "period-4": sample_window(EnvironmentSpec("periodic", 2, dist, seed=41 + seed, period=4), 8, "torus"),
        "iid-32": sample_window(EnvironmentSpec("iid-undirected", 2, dist, seed=42 + seed), 32, "torus"),
    }
    p = np.array([1.0, 0.35])
    details, ok = {}, True
    for name, env in media.items():
        ratios, lips = [], []
        lip_bound = (env.bounds.a + env.bounds.b) / env.bounds.a * np.abs(p).max()
        for eps in (0.2, 0.1, 0.05, 0.025):
            cell = solve_stationary(env, p, eps)
            ratios.append(check_hjb_residual(cell, env) / eps)
            lips.append(cell.as_function().lipschitz_norm)
        spread = max(ratios) / min(ratios)
        details[f"{name}_ratio"] = spread
        details[f"{name}_lip"] = max(lips) / lip_bound
        ok &= spread < 4 and max(lips) <= lip_bound
    return ok, details


@_timed(5, "algorithm descent certificate")
def criterion_descent(seed: int = 0):
    descent_bad = xi_strict = xi_beyond_rounding = bracket_bad = errors = 0
    steps = 0
    for medium, p in random_d2_media(seed):
        try:
            res = run_algorithm(medium, p)
        except InvariantError:
            errors += 1
            continue
        descent_bad += len(res.descent_failures())
        for s in res.trace:
            if math.isnan(s.xi):
                continue
            steps += 1
            if not abs(s.xi) < 1:
                xi_strict += 1
            rounding = 64 * np.finfo(float).eps * s.sup_before / max(medium.a * s.d, 1e-300)
            if abs(s.xi) > 1 + rounding:
                xi_beyond_rounding += 1
        lo, hi = infsup_bounds(res.profile, medium)
        bf = brute_force_Hbar(medium, p).hbar
        if not lo - 1e-12 <= bf <= hi + 1e-12:
            bracket_bad += 1
    ok = descent_bad == 0 and xi_strict == 0 and bracket_bad == 0 and errors == 0
    return ok, {"steps": steps, "descent_failures": descent_bad, "xi_not_below_1": xi_strict,
                "xi_above_1_beyond_rounding": xi_beyond_rounding, "bracket_failures": bracket_bad,
                "invariant_errors": errors}


@_timed(6, "norm axioms")
def criterion_norms(seed: int = 0):
    media = [(m, 1) for m, _ in random_d1_media(seed)] + [(m, 2) for m, _ in random_d2_media(seed)]
    worst_hom = 0.0
    worst_tri = math.inf
    worst_floor = math.inf
    ok = True
    for k, (medium, d) in enumerate(media):
        def hbar(p, medium=medium):
            return run_algorithm(medium, p).hbar
        dirs = direction_mesh(d, 2 * math.pi / 16) if d == 2 else direction_mesh(1)
        table = tabulate(hbar, dirs, provenance="symmetric-algorithm")
        rep = check_norm_axioms(table, hbar, b=medium.b, pairs=100, tol=1e-9, seed=seed + k)
        worst_hom = max(worst_hom, rep.homogeneity_error)
        worst_tri = min(worst_tri, rep.triangle_slack)
        worst_floor = min(worst_floor, rep.lower_bound_slack)
        ok &= rep.ok
    return ok, {"homogeneity_err": worst_hom, "triangle_slack": worst_tri, "floor_slack": worst_floor}


@_timed(7, "comparison principle")
def criterion_comparison(seed: int = 0):
    spec = EnvironmentSpec("iid-undirected", 2, WeightDistribution.uniform(1.0, 2.0), seed=77 + seed)
    env = sample_window(spec, 6, "torus")
    rng = np.random.default_rng(7000 + seed)
    p = np.array([0.7, -0.4])
    lip_max = (env.bounds.a + env.bounds.b) / env.bounds.a * np.abs(p).max()
    lower = upper = lagged = 0
    for _ in range(20):
        phi = random_lipschitz_function(env, float(rng.uniform(0, lip_max)), rng)
        samples = [(rng.integers(0, 6, size=2), float(rng.uniform(0, 12))) for _ in range(20)]
        rep = check_comparison_principle(phi, p, env, samples)
        lower += sum(v.form == "lower" for v in rep.violations)
        upper += sum(v.form == "upper" for v in rep.violations)
        lagged += len(rep.lagged_violations)
    return lower == 0 and upper == 0, {"lower_violations": lower, "upper_violations": upper,
                                       "lagged_upper_violations": lagged}


@_timed(8, "distribution comparison")
def criterion_distributions(seed: int = 0):
    F1, F2 = MarginalSpec.uniform(1.0, 2.0), MarginalSpec.uniform(1.1, 2.1)
    ks = kolmogorov_distance(F1, F2)
    cb = coupling_gap_bound(F1, F2)
    spec1 = EnvironmentSpec("iid-undirected", 2, F1.to_distribution(), seed=88 + seed)
    spec2 = EnvironmentSpec("iid-undirected", 2, F2.to_distribution(), seed=88 + seed)
    gap = empirical_gap_check(spec1, spec2, [1.0, 0.0], n=200, seeds=8)
    dual = gap_bound_dual(2.0, 1.0, 2.1, 1.1, 0.1)
    primal = gap_bound_primal(2.0, 1.0, 2.1, 1.1, 0.1)
    ok = (abs(ks - 0.1) <= ULP_TOL and abs(cb.measured_gap - 0.1) <= ULP_TOL
          and 0.1 - gap.half_width <= gap.measured <= 0.2 + gap.half_width
          and abs(dual.value - 0.76363636363636) < 1e-4 and dual.value > primal.value)
    return ok, {"d_kol": ks, "sup_gap": cb.measured_gap, "measured": gap.measured, "ci": gap.half_width,
                "primal": primal.value, "dual": dual.value}


@_timed(9, "duality roundtrip")
def criterion_duality(seed: int = 0):
    medium = AtomicMedium([[1.0, 2.0], [2.0, 1.0]], [0.5, 0.5])
    dirs = direction_mesh(2, math.pi / 256)
    table = tabulate(lambda p: run_algorithm(medium, p).hbar, dirs, tolerance=1e-9,
                     provenance="symmetric-algorithm")
    xs = [np.array(v, dtype=float) for v in ([1, 0], [0, 1], [1, 1], [1, -1])]
    ests = estimate_time_constants(medium.to_spec(seed=99 + seed), xs, [60], seeds=8)
    details, ok = {}, True
    for x, est in zip(xs, ests):
        dn = dual_norm(table, x, a=medium.a, b=medium.b)
        tol = max(0.05 * dn.value, est.half_width + dn.slack)
        err = abs(est.estimate - dn.value)
        details[f"x={x.astype(int).tolist()}"] = f"mc={est.estimate:.4f} dual={dn.value:.4f} tol={tol:.4f}"
        ok &= err <= tol
    return ok, details


CRITERIA = [criterion_homogeneous, criterion_d1_corrector, criterion_oracles, criterion_residual,
            criterion_descent, criterion_norms, criterion_comparison, criterion_distributions,
            criterion_duality]


def run_acceptance(only=None, seed: int = 0, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    """Run the selected criteria (all by default) and return their results."""
    results = []
    for crit in CRITERIA:
        if only and crit.number not in only:
            continue
        res = crit(seed)
        if echo:
            echo(res.line())
        results.append(res)
    return results
