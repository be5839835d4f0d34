"""A line with two edge weights.

On Z with i.i.d. weights equal to 1 or 2 with probability 1/2 each, the
passage time to ``n`` is a sum of ``n`` weights, so ``m(1) = 3/2`` and
``Hbar(p) = |p| / (3/2)``.  The variational iteration should find that value
together with an exact corrector ``f = (-1/3, 1/3)``; a Monte-Carlo estimate
and the discounted stationary problem on a ring give independent checks.
"""

from __future__ import annotations

from fppvar import EnvironmentSpec, WeightDistribution, estimate_time_constant
from fppvar.symmin import AtomicMedium, run_algorithm


def main():
    medium = AtomicMedium([[1.0], [2.0]], [0.5, 0.5])
    res = run_algorithm(medium, (1.0,))
    print(f"variational Hbar(1) = {res.hbar:.12f} after {res.iterations} steps ({res.status})")
    print(f"corrector profile f = {res.profile.f.round(9).tolist()}")
    for row in list(res.trace_rows())[:6]:
        print("  iter {iter:2d}  mean {mu0:.6f}  gap {d:.3e}  sup {sup:.6f}  xi {xi}".format(**row))

    spec = EnvironmentSpec("iid-undirected", 1, WeightDistribution.atoms([1.0, 2.0], [0.5, 0.5]), seed=2024)
    est = estimate_time_constant(spec, (1.0,), [100, 1000, 10000], seeds=16)
    print(f"Monte-Carlo m(1) = {est.estimate:.4f} +- {est.half_width:.4f}; 1/Hbar(1) = {1 / res.hbar:.4f}")
    print("subadditive sequence:", est.sequence.round(4).tolist())


if __name__ == "__main__":
    main()
