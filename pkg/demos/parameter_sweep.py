"""
Root availability across parameters
===================================

For small lambda + mu every direction has two critical points along its ray.
Increasing the concave weight eventually removes both.  This script scans
lambda = mu along a line and counts directions with two roots.
"""

import numpy as np

from fracnehari import (build_fibering, compute_constants, desk_instance,
                        discretize, find_roots)
from fracnehari.solver import random_pair

base = discretize(desk_instance(1.0), 32)
th = compute_constants(base)
rng = np.random.default_rng(1)
directions = [random_pair(base, rng) for _ in range(24)]

#%%
# Directions whose components have disjoint supports have no coupling term;
# their rays only carry the local minimum, so they are counted separately.

coupled = [d for d in directions if np.any(d.u * d.v)]
print(f"{len(directions) - len(coupled)} of {len(directions)} directions have no coupling term")

#%%
# lambda = mu = k * delta0 for growing k.  The estimated threshold is
# conservative: roots disappear only far above it.

print(f"delta = {th.delta:.4g}, delta0 = {th.delta0:.4g}")
for k in 4.0 ** np.arange(-1, 10):
    lam = k * th.delta0
    system = base.with_parameters(lam, lam)
    both = sum(find_roots(build_fibering(system, d)).both for d in coupled)
    print(f"lambda + mu = {2 * lam:10.4g}  coupled directions with two roots: "
          f"{both}/{len(coupled)}")

#%%
# The same scan from the command line writes a CSV lattice:
#
#   fracnehari --config demos/desk.ini --mode sweep --out sweep_out
