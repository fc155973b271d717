"""
Variable exponents and weights
==============================

An instance whose exponents and weights vary in space.  The standing
hypotheses are checked on samples of the closed domain before solving.
"""

from fracnehari import (SolveOptions, check_assumptions, compute_constants,
                        discretize, variable_instance)
from fracnehari import solve_two_solutions

system = discretize(variable_instance(1.0), 32)

#%%
# Hypotheses, evaluated on the grid, an oversampled closure and the pair cache.

rep = check_assumptions(system.data, system.grid, system.cache)
print(rep.format())

#%%
# Exponent bounds seen by the threshold formulas.

for key, (lo, hi) in system.bounds().items():
    print(f"{key:11s} [{lo:.4f}, {hi:.4f}]")

#%%
# Solve at a quarter of the estimated threshold.

th = compute_constants(system)
lam = th.delta0 / 4
system = system.with_parameters(lam, lam)
report = solve_two_solutions(system, SolveOptions(),
                             compute_constants(system, embedding=th.embedding))
print(f"lambda = mu = {lam:.4g}: theta+ = {report.theta_plus:.4g}, "
      f"theta- = {report.theta_minus:.4g}, success = {report.success}")
