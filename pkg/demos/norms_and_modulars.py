"""
Variable-exponent norms
=======================

Luxemburg norms are computed by bisection on the modular.  The script
checks the norm/modular power sandwich and estimates the constant of the
embedding of the nonlocal space into a Lebesgue space.
"""

import numpy as np

from fracnehari import (LebesgueModular, X0Modular, check_norm_modular_relations,
                        discretize, estimate_embedding_constant, luxemburg_norm,
                        variable_instance)

system = discretize(variable_instance(0.01), 32)
grid, cache = system.grid, system.cache
x = grid.interior[:, 0]

#%%
# Lebesgue modular with exponent 2 + x and the nonlocal modular with the
# variable pair exponent of the instance.

lebesgue = LebesgueModular(grid, 2.0 + x)
nonlocal_ = X0Modular(cache)

rng = np.random.default_rng(0)
for scale in (0.01, 1.0, 100.0):
    u = scale * rng.standard_normal(grid.n_interior)
    for name, m in (("L^(2+x)", lebesgue), ("X0", nonlocal_)):
        rep = check_norm_modular_relations(m, u)
        print(f"{name:8s} scale {scale:6g}: norm {rep.norm:10.4g}  modular "
              f"{rep.modular:10.4g}  sandwich ok: {rep.ok}")

#%%
# The norm is 1-homogeneous even though the modular is not.

u = rng.standard_normal(grid.n_interior)
n1 = luxemburg_norm(lebesgue, u).value
n3 = luxemburg_norm(lebesgue, 3 * u).value
print(f"||3u|| / ||u|| = {n3 / n1:.12f}")

#%%
# Lower estimate of the embedding constant into L^(alpha+beta).

est = estimate_embedding_constant(grid, cache, system.coupling, trials=32,
                                  pbar=system.data.p(grid.interior))
print(f"best random bump ratio {est.raw_best:.6g}, after ascent {est.value:.6g}")
