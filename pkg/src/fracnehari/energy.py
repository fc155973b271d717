"""Discrete energy of the coupled system and its exact nodal gradient.

With ``Delta_ij u = u_i - u_j`` (collar values zero) the discrete functional is

    J(u, v) = sum_pairs (2 w_ij / p_ij) (|Delta u|^p_ij + |Delta v|^p_ij)
              - h^N sum_i (1 / q_i) (lam a_i |u_i|^q_i + mu b_i |v_i|^q_i)
              - h^N sum_i c_i / (alpha_i + beta_i) |u_i|^alpha_i |v_i|^beta_i

and P, Q, R are the same three sums without the reciprocal exponents.  The
gradient is the derivative of this finite sum, so fibering identities hold to
rounding error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import UsageError
from .exponents import ProblemData
from .grid import (Grid, PairKernelCache, build_grid, build_pair_cache, powabs,
                   signed_pow)
from .vx_space import X0Modular, luxemburg_norm

__all__ = [
    "DiscreteSystem", "StatePair", "EnergyBreakdown", "discretize",
    "compute_P", "compute_Q", "compute_R", "energy", "energy_gradient",
    "pair_norm",
]


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """A problem sampled on a grid: cache plus nodal exponents and weights."""

    data: ProblemData
    grid: Grid
    cache: PairKernelCache
    q: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def lam(self) -> float:
        return self.data.lam

    @property
    def mu(self) -> float:
        return self.data.mu

    @property
    def m(self) -> int:
        return self.grid.n_interior

    @property
    def coupling(self) -> np.ndarray:
        return self.alpha + self.beta

    def bounds(self) -> dict:
        """Nodal/pair exponent bounds used by the threshold formulas."""
        plo, phi = self.cache.p_bounds
        r = self.coupling
        return {"p": (plo, phi), "q": (float(self.q.min()), float(self.q.max())),
                "alpha": (float(self.alpha.min()), float(self.alpha.max())),
                "beta": (float(self.beta.min()), float(self.beta.max())),
                "alpha+beta": (float(r.min()), float(r.max()))}

    def with_parameters(self, lam: float, mu: float) -> "DiscreteSystem":
        """Same grid and cache, new (lam, mu)."""
        return DiscreteSystem(self.data.with_parameters(lam, mu), self.grid,
                              self.cache, self.q, self.alpha, self.beta,
                              self.a, self.b, self.c)


def discretize(data: ProblemData, n: int, collar_width: float = 1.0) -> DiscreteSystem:
    """Build grid, pair cache and nodal samples for ``data``."""
    grid = build_grid(data.domain, n, collar_width)
    cache = build_pair_cache(grid, data.p, data.s)
    x = grid.interior
    return DiscreteSystem(data, grid, cache, data.q(x), data.alpha(x),
                          data.beta(x), data.a(x), data.b(x), data.c(x))


@dataclass(frozen=True, eq=False)
class StatePair:
    """A pair of grid functions ``(u, v)`` on the interior nodes."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        v = np.asarray(self.v, dtype=float).ravel()
        if u.shape != v.shape:
            raise UsageError("u and v must have the same length")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_flat(cls, x) -> "StatePair":
        x = np.asarray(x, dtype=float)
        m = x.size // 2
        return cls(x[:m], x[m:])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    def scaled(self, t: float) -> "StatePair":
        return StatePair(t * self.u, t * self.v)

    def is_zero(self) -> bool:
        return not (np.any(self.u) or np.any(self.v))

    def __len__(self):
        return self.u.size


@dataclass
class EnergyBreakdown:
    P: float
    Q: float
    R: float
    J: float
    gradient_norm: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def nehari_defect(self) -> float:
        """``P - Q - R``: zero on the Nehari set."""
        return self.P - self.Q - self.R


def _kinetic_terms(cache: PairKernelCache, pair: StatePair):
    du = cache.differences(pair.u)
    dv = cache.differences(pair.v)
    return du, dv, powabs(du, cache.p) + powabs(dv, cache.p)


def _masked(weight, values):
    # weight * values with 0 * inf treated as 0
    return np.where(values == 0.0, 0.0, weight * values)


def compute_P(cache: PairKernelCache, pair: StatePair) -> float:
    """``rho_X0(u) + rho_X0(v)``."""
    _, _, k = _kinetic_terms(cache, pair)
    return 2.0 * float(np.sum(cache.w * k))


def compute_Q(system: DiscreteSystem, pair: StatePair) -> float:
    """``h^N sum (lam a |u|^q + mu b |v|^q)``."""
    uq = powabs(pair.u, system.q)
    vq = powabs(pair.v, system.q)
    vol = system.grid.cell_volume
    return vol * float(np.sum(system.lam * _masked(system.a, uq)
                              + system.mu * _masked(system.b, vq)))


def compute_R(system: DiscreteSystem, pair: StatePair) -> float:
    """``h^N sum c |u|^alpha |v|^beta``."""
    prod = powabs(pair.u, system.alpha) * powabs(pair.v, system.beta)
    return system.grid.cell_volume * float(np.sum(_masked(system.c, prod)))


def energy(system: DiscreteSystem, pair: StatePair) -> EnergyBreakdown:
    """Energy value with its P, Q, R constituents."""
    cache = system.cache
    _, _, k = _kinetic_terms(cache, pair)
    P = 2.0 * float(np.sum(cache.w * k))
    kin = 2.0 * float(np.sum(cache.w * k / cache.p))
    vol = system.grid.cell_volume
    uq = system.lam * _masked(system.a, powabs(pair.u, system.q))
    vq = system.mu * _masked(system.b, powabs(pair.v, system.q))
    Q = vol * float(np.sum(uq + vq))
    conc = vol * float(np.sum((uq + vq) / system.q))
    rr = _masked(system.c, powabs(pair.u, system.alpha) * powabs(pair.v, system.beta))
    R = vol * float(np.sum(rr))
    conv = vol * float(np.sum(rr / system.coupling))
    return EnergyBreakdown(P=P, Q=Q, R=R, J=kin - conc - conv)


def energy_gradient(system: DiscreteSystem, pair: StatePair):
    """Nodal partial derivatives ``(dJ/du_i, dJ/dv_i)`` of the discrete energy.

    Pairs with ``u_i = u_j`` contribute zero, also when ``p_ij < 2``.
    """
    cache = system.cache
    du = cache.differences(pair.u)
    dv = cache.differences(pair.v)
    gu = 2.0 * cache.scatter(cache.w * signed_pow(du, cache.p))
    gv = 2.0 * cache.scatter(cache.w * signed_pow(dv, cache.p))
    vol = system.grid.cell_volume
    u, v = pair.u, pair.v
    au, bv = powabs(u, system.alpha), powabs(v, system.beta)
    share = system.c / system.coupling
    gu -= vol * (system.lam * _masked(system.a, signed_pow(u, system.q))
                 + _masked(share * system.alpha, signed_pow(u, system.alpha) * bv))
    gv -= vol * (system.mu * _masked(system.b, signed_pow(v, system.q))
                 + _masked(share * system.beta, au * signed_pow(v, system.beta)))
    return gu, gv


def pair_norm(system: DiscreteSystem, pair: StatePair) -> float:
    """``max(||u||_X0, ||v||_X0)``."""
    m = X0Modular(system.cache)
    return max(luxemburg_norm(m, pair.u).value, luxemburg_norm(m, pair.v).value)
