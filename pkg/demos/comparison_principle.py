"""Sandwiching the finite-horizon value by the discrete Hamiltonian.

For a terminal cost ``phi`` the horizon value satisfies
``mu(x, t) >= phi(x) - t sup H(phi)``.  The matching upper bound
``phi(x) - t inf H(phi)`` fails for short budgets because a path cannot take
a fraction of a step: with unit weights, ``p = e_1`` and ``phi = 0`` the value
at ``t = 0.5`` is 0 while the bound is -0.5.  Delaying the upper bound by one
maximal edge weight repairs it.  The script checks all three forms on random
Lipschitz terminal costs.
"""

from __future__ import annotations

import numpy as np

from fppvar import EnvironmentSpec, LatticeFunction, WeightDistribution, constant_spec, sample_window
from fppvar.cellproblem import check_comparison_principle, random_lipschitz_function


def main():
    env = sample_window(constant_spec(1.0, 2), 4, "torus")
    zero = LatticeFunction(np.zeros((4, 4)), (0, 0), "torus")
    rep = check_comparison_principle(zero, (1.0, 0.0), env, [((0, 0), 0.5)])
    for v in rep.violations:
        print(f"unit weights, t={v.t}: mu = {v.mu}, stated upper bound {v.bound} ({v.form})")

    env = sample_window(EnvironmentSpec("iid-undirected", 2, WeightDistribution.uniform(1.0, 2.0), seed=5),
                        6, "torus")
    rng = np.random.default_rng(0)
    totals = {"lower": 0, "upper": 0, "lagged": 0, "checked": 0}
    for _ in range(10):
        phi = random_lipschitz_function(env, rng.uniform(0, 2), rng)
        samples = [((int(rng.integers(6)), int(rng.integers(6))), float(rng.uniform(0, 10))) for _ in range(10)]
        rep = check_comparison_principle(phi, rng.uniform(-1, 1, 2), env, samples)
        totals["lower"] += sum(v.form == "lower" for v in rep.violations)
        totals["upper"] += sum(v.form == "upper" for v in rep.violations)
        totals["lagged"] += len(rep.lagged_violations)
        totals["checked"] += rep.checked
    print("random terminal costs:", totals)


if __name__ == "__main__":
    main()
