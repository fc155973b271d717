"""
Two non-negative solutions
==========================

Minimise the energy separately on the two parts of the Nehari set and
compare the resulting levels.  The plus branch has negative energy, the
minus branch positive energy, and both components of the minus solution
are nonzero.
"""

import numpy as np

from fracnehari import (SolveOptions, compute_constants, desk_instance,
                        discretize, solve_two_solutions)

system = discretize(desk_instance(1.0), 32)
th = compute_constants(system)
lam = th.delta0 / 4
system = system.with_parameters(lam, lam)
th = compute_constants(system, embedding=th.embedding)

#%%
# Estimated constants.  The embedding constant is a lower estimate, so the
# thresholds carry the ``estimated`` flag.

print(f"C1 = {th.C1:.5g}, C2 = {th.C2:.5g}, embedding = {th.embedding:.5g}")
print(f"delta = {th.delta:.5g}, delta0 = {th.delta0:.5g}, estimated = {th.estimated}")

#%%
# Solve.

report = solve_two_solutions(system, SolveOptions(seed=0), th)
print(f"theta+ = {report.theta_plus:.6g}")
print(f"theta- = {report.theta_minus:.6g}")
for name, ok in report.checks.items():
    print(f"  {'PASS' if ok else 'FAIL'} {name}")

#%%
# The minus solution on a few nodes.

x = system.grid.interior[:, 0]
minus = report.minus_solution.pair
for k in range(0, x.size, 8):
    print(f"x = {x[k]:.4f}  u = {minus.u[k]:.5f}  v = {minus.v[k]:.5f}")
print("multistart energies on the minus branch:",
      np.round(report.multistart["minus"], 4))
