"""Time constants and effective Hamiltonians of first-passage percolation on Z^d.

Three independent routes to the same quantities:

* Monte-Carlo passage times (:mod:`fppvar.fpp`);
* discrete control problems on tori and boxes (:mod:`fppvar.cellproblem`);
* the variational formula for hyperplane-constant media (:mod:`fppvar.symmin`);

plus norm/duality tools (:mod:`fppvar.norms`) and bounds comparing media with
nearby weight laws (:mod:`fppvar.distcompare`).
"""

from .cellproblem import (CellField, HorizonValue, LatticeFunction, check_comparison_principle,
                          check_hjb_residual, discrete_hamiltonian, estimate_Hbar_horizon,
                          estimate_Hbar_stationary, solve_finite_horizon, solve_stationary)
from .distcompare import (MarginalSpec, coupling_gap_bound, empirical_gap_check, gap_bound_dual,
                          gap_bound_primal, kolmogorov_distance, skorokhod_values)
from .environment import (BoundsSpec, DirectionSet, EnvironmentSpec, EnvironmentWindow, WeightDistribution,
                          constant_spec, sample_window, verify_bounds, weight)
from .errors import (BoundsError, BoundUnavailableError, ConfigurationError, ConvergenceError,
                     DomainTooSmallError, FPPError, TopologyError)
from .fpp import (Path, PassageTimeMap, TimeConstantEstimate, estimate_time_constant, first_passage_times,
                  reachable_set, round_to_lattice)
from .norms import NormTable, check_norm_axioms, dual_norm, limit_shape
from .symmin import (AlgorithmResult, AtomicMedium, Profile, brute_force_Hbar, check_corrector, is_lattice_corrector,
                     classify_sets, h_sym, h_sym_minimum, infsup_bounds, iterate_step, run_algorithm)

