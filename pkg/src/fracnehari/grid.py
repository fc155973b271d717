"""Uniform cell-centred grids with an exterior collar, and the pair kernel cache.

The nonlocal Dirichlet condition ``u = 0`` outside the domain is realised by a
collar of exterior cells within ``collar_width * diameter`` of the domain.
Grid functions carry values on interior nodes only; collar values are zero.

The cache stores, for every unordered node pair with at least one interior
endpoint, the pair exponent ``p_ij``, the distance ``d_ij`` and the kernel
weight ``w_ij = h^(2N) / d_ij^(N + s p_ij)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .exponents import Box, Field

__all__ = [
    "Grid", "PairKernelCache", "build_grid", "build_pair_cache",
    "modular_rho_X0", "collar_tail_bound", "dump_pairs_csv", "powabs",
    "signed_pow",
]

_TINY = 1e-300


def powabs(x, e) -> np.ndarray:
    """``|x|**e`` computed as ``exp(e log|x|)``; entries below 1e-300 give 0."""
    a = np.abs(np.asarray(x, dtype=float))
    e = np.asarray(e, dtype=float)
    shape = np.broadcast_shapes(a.shape, e.shape)
    a = np.broadcast_to(a, shape)
    e = np.broadcast_to(e, shape)
    out = np.zeros(shape)
    mask = a > _TINY
    out[mask] = np.exp(e[mask] * np.log(a[mask]))
    return out


def signed_pow(x, e) -> np.ndarray:
    """``|x|**(e-1) * sign(x)``, i.e. ``|x|^(e-2) x`` with value 0 at ``x = 0``."""
    return np.sign(x) * powabs(x, np.asarray(e, dtype=float) - 1.0)


@dataclass(frozen=True, eq=False)
class Grid:
    domain: Box
    n: int
    collar_width: float
    h: float
    interior: np.ndarray
    collar: np.ndarray

    @property
    def N(self) -> int:
        return self.domain.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.N

    @property
    def n_interior(self) -> int:
        return self.interior.shape[0]

    @property
    def n_collar(self) -> int:
        return self.collar.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        """Interior nodes followed by collar nodes."""
        return np.vstack([self.interior, self.collar])

    @property
    def collar_reach(self) -> float:
        """Physical collar width (collar_width times the domain diameter)."""
        return self.collar_width * self.domain.diameter


def build_grid(domain: Box, n_per_axis: int, collar_width: float = 1.0) -> Grid:
    """Cell-centred uniform grid on ``domain`` plus its exterior collar."""
    if int(n_per_axis) != n_per_axis or n_per_axis < 4:
        raise UsageError(f"n_per_axis must be an integer >= 4, got {n_per_axis}")
    if not collar_width > 0:
        raise UsageError(f"collar_width must be positive, got {collar_width}")
    n = int(n_per_axis)
    h = domain.side / n
    reach = collar_width * domain.diameter
    extra = int(math.ceil(reach / h)) + 1
    ks = np.arange(-extra, n + extra)
    axes = [lo + (ks + 0.5) * h for lo in domain.lower]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    kk = np.meshgrid(*([ks] * domain.dim), indexing="ij")
    kk = np.column_stack([m.ravel() for m in kk])
    inside = np.all((kk >= 0) & (kk < n), axis=1)
    dist = domain.distance(pts)
    in_collar = ~inside & (dist <= reach * (1 + 1e-12))
    return Grid(domain=domain, n=n, collar_width=float(collar_width), h=h,
                interior=pts[inside], collar=pts[in_collar])


@dataclass(frozen=True, eq=False)
class PairKernelCache:
    """Pairwise kernel data; immutable after construction.

    Indices ``j >= n_interior`` refer to collar nodes.  ``bucket`` maps each
    pair to its entry of ``p_values`` (the distinct exponents).
    """

    i: np.ndarray
    j: np.ndarray
    d: np.ndarray
    p: np.ndarray
    w: np.ndarray
    n_interior: int
    n_total: int
    s: float
    N: int
    h: float
    p_values: np.ndarray
    bucket: np.ndarray

    @classmethod
    def from_arrays(cls, i, j, p, w, n_interior, n_total=None, d=None,
                    s=0.5, N=1, h=1.0) -> "PairKernelCache":
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        p = np.asarray(p, dtype=float)
        w = np.asarray(w, dtype=float)
        if np.any(i == j):
            raise UsageError("pair list contains diagonal entries")
        if np.any(w <= 0):
            raise UsageError("kernel weights must be positive")
        d = np.ones_like(w) if d is None else np.asarray(d, dtype=float)
        p_values, bucket = np.unique(p, return_inverse=True)
        return cls(i=i, j=j, d=d, p=p, w=w, n_interior=int(n_interior),
                   n_total=int(n_total if n_total is not None else n_interior),
                   s=float(s), N=int(N), h=float(h), p_values=p_values,
                   bucket=bucket.ravel())

    @property
    def n_pairs(self) -> int:
        return self.i.size

    @property
    def p_bounds(self) -> tuple[float, float]:
        return float(self.p.min()), float(self.p.max())

    def differences(self, u) -> np.ndarray:
        """``u_i - u_j`` per pair, with zero collar values."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_interior,):
            raise UsageError(f"grid function must have {self.n_interior} values")
        ext = np.zeros(self.n_total)
        ext[: self.n_interior] = u
        return ext[self.i] - ext[self.j]

    def scatter(self, per_pair) -> np.ndarray:
        """Accumulate ``f_ij`` into node ``i`` and ``-f_ij`` into node ``j``
        (interior nodes only)."""
        acc = np.bincount(self.i, weights=per_pair, minlength=self.n_total)
        acc -= np.bincount(self.j, weights=per_pair, minlength=self.n_total)
        return acc[: self.n_interior]

    def laplacian_matrix(self) -> np.ndarray:
        """Dense matrix of ``u -> 2 * sum_pairs w_ij (e_i - e_j)(e_i - e_j)^T u``
        restricted to interior nodes: for p = 2 this is the Hessian of the kinetic
        energy ``rho_X0 / 2``, so ``u^T K u = rho_X0(u)``."""
        m = self.n_interior
        K = np.zeros((m, m))
        diag = np.bincount(self.i, weights=self.w, minlength=self.n_total)
        diag += np.bincount(self.j, weights=self.w, minlength=self.n_total)
        K[np.diag_indices(m)] = diag[:m]
        inner = self.j < m
        np.subtract.at(K, (self.i[inner], self.j[inner]), self.w[inner])
        np.subtract.at(K, (self.j[inner], self.i[inner]), self.w[inner])
        return 2.0 * K


def build_pair_cache(grid: Grid, p: Field, s: float) -> PairKernelCache:
    """Kernel weights for all interior-interior and interior-collar pairs."""
    if not 0.0 < s < 1.0:
        raise UsageError(f"s must lie in (0, 1), got {s}")
    if p.kind not in ("constant", "pair"):
        raise UsageError("p must be a constant or a pair field")
    m, k = grid.n_interior, grid.n_collar
    ii, jj = np.triu_indices(m, 1)
    ci = np.repeat(np.arange(m), k)
    cj = np.tile(np.arange(k), m) + m
    i = np.concatenate([ii, ci])
    j = np.concatenate([jj, cj])
    nodes = grid.nodes
    xi, xj = nodes[i], nodes[j]
    d = np.sqrt(np.sum((xi - xj) ** 2, axis=1))
    pij = p.pair(xi, xj)
    N = grid.N
    w = np.exp(2 * N * math.log(grid.h) - (N + s * pij) * np.log(d))
    p_values, bucket = np.unique(pij, return_inverse=True)
    return PairKernelCache(i=i, j=j, d=d, p=pij, w=w, n_interior=m, n_total=m + k,
                           s=float(s), N=N, h=grid.h, p_values=p_values,
                           bucket=bucket.ravel())


def modular_rho_X0(cache: PairKernelCache, u) -> float:
    """Discrete modular ``2 * sum_pairs w_ij |u_i - u_j|^p_ij``.

    The factor 2 accounts for ordered pairs of the double integral.
    """
    diff = cache.differences(u)
    return 2.0 * float(np.sum(cache.w * powabs(diff, cache.p)))


def collar_tail_bound(grid: Grid, cache: PairKernelCache, u) -> float:
    """Upper bound on the part of the X0 modular cut off by the collar.

    Every point beyond the collar is at distance at least ``L = grid.collar_reach``
    from the domain, so the truncated contribution is bounded by
    ``2 |S^(N-1)| sum_i h^N max(|u_i|^p-, |u_i|^p+) int_L^inf max(r^(-1-s p-), r^(-1-s p+)) dr``.
    """
    u = np.asarray(u, dtype=float)
    plo, phi = cache.p_bounds
    s, N = cache.s, grid.N
    L = grid.collar_reach
    surface = 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)  # |S^(N-1)|
    if L >= 1.0:
        radial = L ** (-s * plo) / (s * plo)
    else:
        radial = (L ** (-s * phi) - 1.0) / (s * phi) + 1.0 / (s * plo)
    amp = np.maximum(powabs(u, plo), powabs(u, phi))
    return 2.0 * surface * grid.cell_volume * float(np.sum(amp)) * radial


def dump_pairs_csv(cache: PairKernelCache, path) -> None:
    """Write the pair list as CSV with columns i, j, d_ij, p_ij, w_ij."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["i", "j", "d_ij", "p_ij", "w_ij"])
        for row in zip(cache.i, cache.j, cache.d, cache.p, cache.w):
            wr.writerow([int(row[0]), int(row[1])] + [f"{v:.17g}" for v in row[2:]])
