"""Limit shape of a hyperplane medium from its effective Hamiltonian.

``Hbar`` is tabulated on a fine circle of momenta with the exact variational
solver, the dual norm ``m`` is read off as a maximum over the table, and the
unit ball of ``m`` is written to ``limit_shape.csv`` as a polygon.  The dual
values are then compared with Monte-Carlo passage times.
"""

from __future__ import annotations

import math
import sys

import numpy as np

from fppvar import estimate_time_constant
from fppvar.io import write_csv
from fppvar.norms import direction_mesh, dual_norm, limit_shape, tabulate
from fppvar.symmin import AtomicMedium, brute_force_Hbar


def main(out="limit_shape.csv"):
    medium = AtomicMedium([[1.0, 2.0], [2.0, 1.0]], [0.5, 0.5])
    table = tabulate(lambda p: brute_force_Hbar(medium, p).hbar, direction_mesh(2, math.pi / 128),
                     tolerance=1e-12, provenance="bisection")
    shape = limit_shape(table)
    write_csv(out, [{"x1": v[0], "x2": v[1]} for v in shape.vertices])
    print(f"{len(shape.vertices)} vertices written to {out}; convex: {shape.is_convex()}")
    spec = medium.to_spec(seed=7)
    for x in [(1.0, 0.0), (1.0, 1.0), (1.0, -1.0)]:
        dv = dual_norm(table, x, medium.a, medium.b)
        mc = estimate_time_constant(spec, x, [20, 40], seeds=8)
        print(f"m{x}: dual {dv.value:.4f} (slack {dv.slack:.3f}), Monte-Carlo {mc.estimate:.4f}"
              f" +- {mc.half_width:.4f}")


if __name__ == "__main__":
    main(*sys.argv[1:])
