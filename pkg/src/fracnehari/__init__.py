"""Two non-negative solutions of a fractional variable-exponent system.

The package discretises a nonlocal ``p(x, y)``-Laplacian system with a
concave term and a convex coupling term, represents the energy along rays
exactly, and minimises the energy on both parts of the Nehari set.

Modules
-------
exponents   exponent and weight fields, problem data, hypothesis checks
grid        grids with an exterior collar and the pair kernel cache
vx_space    modulars, Luxemburg norms, embedding-constant estimate
energy      discrete energy and its exact gradient
fibering    energy along rays, its critical points, Nehari classification
solver      thresholds, branch minimisation, two-solution driver, checks
config/cli  run configuration files and the command line driver
"""
from .energy import (DiscreteSystem, EnergyBreakdown, StatePair, compute_P,
                     compute_Q, compute_R, discretize, energy, energy_gradient)
from .errors import (BranchUnavailableError, ConfigError, FracNehariError,
                     HypothesisError, NumericalError, UsageError)
from .exponents import (Box, ExponentField, Field, ProblemData, WeightField,
                        averaged_pair, check_assumptions, critical_exponent,
                        desk_instance, variable_instance)
from .fibering import (FiberingCurve, FiberingRoots, build_fibering,
                       classify_nehari, find_roots, project)
from .grid import (Grid, PairKernelCache, build_grid, build_pair_cache,
                   collar_tail_bound, modular_rho_X0)
from .solver import (NehariPoint, SolveOptions, SolveReport, ThresholdSet,
                     compute_constants, minimize_on_branch, nonnegativize,
                     solve_two_solutions, verify_lemma_suite)
from .vx_space import (LebesgueModular, X0Modular, check_norm_modular_relations,
                       estimate_embedding_constant, luxemburg_norm,
                       modular_lebesgue, power_norm_bound)

__all__ = [
    "averaged_pair", "Box", "BranchUnavailableError", "build_fibering",
    "build_grid", "build_pair_cache", "check_assumptions",
    "check_norm_modular_relations", "classify_nehari", "collar_tail_bound",
    "compute_constants", "compute_P", "compute_Q", "compute_R",
    "ConfigError", "critical_exponent", "desk_instance", "DiscreteSystem",
    "discretize", "energy", "energy_gradient", "EnergyBreakdown",
    "estimate_embedding_constant", "ExponentField", "FiberingCurve",
    "FiberingRoots", "Field", "find_roots", "FracNehariError", "Grid",
    "HypothesisError", "LebesgueModular", "luxemburg_norm",
    "minimize_on_branch", "modular_lebesgue", "modular_rho_X0",
    "NehariPoint", "nonnegativize", "NumericalError", "PairKernelCache",
    "power_norm_bound", "ProblemData", "project", "solve_two_solutions",
    "SolveOptions", "SolveReport", "StatePair", "ThresholdSet",
    "UsageError", "variable_instance", "verify_lemma_suite", "WeightField",
    "X0Modular",
]

__version__ = "0.1.0"
