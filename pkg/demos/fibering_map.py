"""
Energy along a ray
==================

The energy of ``(t u, t v)`` is a finite sum of powers of ``t``.  This script
builds that sum for one direction, finds its two critical points and checks
which part of the Nehari set each rescaled pair lands on.
"""

import numpy as np

from fracnehari import (build_fibering, classify_nehari, compute_constants,
                        desk_instance, discretize, find_roots, project)
from fracnehari.fibering import fibering_table
from fracnehari.energy import StatePair

#%%
# Desk instance on 32 cells with lambda = mu = delta0 / 4.

system = discretize(desk_instance(1.0), 32)
th = compute_constants(system)
lam = th.delta0 / 4
system = system.with_parameters(lam, lam)
print(f"delta = {th.delta:.5g}, delta0 = {th.delta0:.5g}, lambda = mu = {lam:.5g}")

#%%
# A smooth positive direction and its curve.  Constant exponents give three
# buckets: kinetic (t^2), concave (t^1.5) and coupling (t^3).

x = system.grid.interior[:, 0]
pair = StatePair(np.sin(np.pi * x), np.sin(np.pi * x) ** 2)
curve = build_fibering(system, pair)
print("buckets:", curve.n_buckets, " P, Q, R =", curve.P, curve.Q, curve.R)

#%%
# Critical points: a local minimum t+ and a local maximum t-.

roots = find_roots(curve)
print(f"t+ = {roots.t_plus:.6g}   phi(t+) = {float(curve.evaluate(roots.t_plus)):.4g}")
print(f"t- = {roots.t_minus:.6g}   phi(t-) = {float(curve.evaluate(roots.t_minus)):.4g}")
print(f"phi vanishes again at t* = {roots.t_star:.6g}")

#%%
# A coarse table of (t, phi, phi', phi'').

for row in fibering_table(curve, np.geomspace(roots.t_plus / 10, roots.t_minus * 3, 7)):
    print("  ".join(f"{v:12.4e}" for v in row))

#%%
# Rescaling the pair by either root puts it on the matching branch.

for branch in ("plus", "minus"):
    z = project(system, pair, branch)
    print(branch, "->", classify_nehari(system, z))
