"""Three routes to the same answer on a constant medium.

With every edge weight equal to ``c`` the passage time is ``c`` times the
l1 distance, so ``m(x) = c |x|_1`` and ``Hbar(p) = |p|_inf / c``.  This script
computes both quantities numerically by every available route and prints the
errors, which should all be tiny.
"""

from __future__ import annotations

import numpy as np

from fppvar import (constant_spec, estimate_Hbar_horizon, estimate_Hbar_stationary, estimate_time_constant,
                    sample_window)
from fppvar.symmin import AtomicMedium, run_algorithm

C = 1.5


def main():
    spec = constant_spec(C, 2)
    for x in [(1.0, 0.0), (1.0, 1.0), (2.0, -1.0)]:
        est = estimate_time_constant(spec, x, [10, 20], seeds=2)
        print(f"m{x}: estimate {est.estimate:.6f}, exact {C * np.abs(x).sum():.6f}")

    torus = sample_window(spec, 4, "torus")
    for p in [(1.0, 0.0), (0.4, -0.9)]:
        exact = np.abs(p).max() / C
        stat = estimate_Hbar_stationary(torus, p, [0.1, 0.05, 0.025])
        hor = estimate_Hbar_horizon(spec, p, [30.0, 60.0])
        sym = run_algorithm(AtomicMedium([[C, C]], [1.0]), p)
        print(f"Hbar{p}: exact {exact:.6f} | stationary {stat.extrapolated:.6f}"
              f" | horizon {hor.extrapolated:.6f} | variational {sym.hbar:.6f}")


if __name__ == "__main__":
    main()
