"""Modulars and Luxemburg norms of variable-exponent spaces on a grid.

Two modulars are provided: the Lebesgue modular ``sum_i h^N |u_i|^gamma_i``
and the X0 modular of the pair kernel cache.  Norms are computed by
exponential bracketing from ``eta = 1`` followed by bisection on the modular
residual ``|rho(u / eta) - 1|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import HypothesisError, NumericalError, UsageError
from .exponents import Field
from .grid import Grid, PairKernelCache, powabs, signed_pow

__all__ = [
    "ModularEvaluator", "LebesgueModular", "X0Modular", "NormResult",
    "RelationReport", "EmbeddingEstimate", "modular_lebesgue",
    "luxemburg_norm", "norm_gradient", "check_norm_modular_relations",
    "power_norm_bound", "estimate_embedding_constant", "random_bump",
]


def nodal(grid: Grid, f) -> np.ndarray:
    """Values of a field (or an array already on the nodes) on interior nodes."""
    if isinstance(f, Field):
        return f(grid.interior)
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.n_interior, float(arr))
    if arr.shape != (grid.n_interior,):
        raise UsageError("nodal array does not match the grid")
    return arr


class ModularEvaluator:
    """A modular together with its exponent bounds.

    Subclasses implement ``__call__(u)`` and ``gradient(u)``.
    """

    kind = "abstract"
    lower: float
    upper: float

    def __call__(self, u) -> float:
        raise NotImplementedError

    def gradient(self, u) -> np.ndarray:
        raise NotImplementedError

    @property
    def bounds(self) -> tuple[float, float]:
        return self.lower, self.upper


class LebesgueModular(ModularEvaluator):
    kind = "lebesgue"

    def __init__(self, grid: Grid, gamma):
        self.grid = grid
        self.gamma = nodal(grid, gamma)
        self.volume = grid.cell_volume
        self.lower = float(self.gamma.min())
        self.upper = float(self.gamma.max())

    def __call__(self, u) -> float:
        return self.volume * float(np.sum(powabs(u, self.gamma)))

    def gradient(self, u) -> np.ndarray:
        return self.volume * self.gamma * signed_pow(u, self.gamma)


class X0Modular(ModularEvaluator):
    kind = "X0"

    def __init__(self, cache: PairKernelCache):
        self.cache = cache
        self.lower, self.upper = cache.p_bounds

    def __call__(self, u) -> float:
        diff = self.cache.differences(u)
        return 2.0 * float(np.sum(self.cache.w * powabs(diff, self.cache.p)))

    def gradient(self, u) -> np.ndarray:
        c = self.cache
        diff = c.differences(u)
        return 2.0 * c.scatter(c.w * c.p * signed_pow(diff, c.p))


def modular_lebesgue(grid: Grid, u, gamma) -> float:
    """``h^N sum_i |u_i|^gamma(x_i)``."""
    return LebesgueModular(grid, gamma)(u)


@dataclass
class NormResult:
    value: float
    iterations: int
    bracket: tuple
    residual: float

    def __float__(self):
        return self.value


def luxemburg_norm(m: ModularEvaluator, u, tol: float = 1e-10,
                   max_iter: int = 200) -> NormResult:
    """Luxemburg norm ``inf{eta > 0 : rho(u / eta) <= 1}``.

    Exponential bracketing from ``eta = 1`` by factors of two, then bisection
    until ``|rho(u / eta) - 1| <= tol``.
    """
    if not tol > 0:
        raise UsageError("tol must be positive")
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        return NormResult(0.0, 0, (0.0, 0.0), 0.0)
    eta = 1.0
    r = m(u / eta)
    its = 0
    if abs(r - 1.0) <= tol:
        return NormResult(eta, 0, (eta, eta), abs(r - 1.0))
    if r > 1.0:
        lo = eta
        while r > 1.0:
            eta *= 2.0
            r = m(u / eta)
            its += 1
            if its > 2100:
                raise NumericalError("Luxemburg bracketing failed", bracket=(lo, eta))
            if r > 1.0:
                lo = eta
        hi = eta
    else:
        hi = eta
        while r <= 1.0:
            eta *= 0.5
            r = m(u / eta)
            its += 1
            if its > 2100:
                raise NumericalError("Luxemburg bracketing failed", bracket=(eta, hi))
            if r <= 1.0:
                hi = eta
        lo = eta
    if abs(r - 1.0) <= tol:
        return NormResult(eta, its, (lo, hi), abs(r - 1.0))
    for k in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = m(u / mid)
        res = abs(r - 1.0)
        if res <= tol:
            return NormResult(mid, its + k + 1, (lo, hi), res)
        if r > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    raise NumericalError("Luxemburg bisection did not reach tolerance",
                         bracket=(lo, hi), residual=res)


def norm_gradient(m: ModularEvaluator, u, norm: float | None = None) -> np.ndarray:
    """Gradient of the Luxemburg norm by implicit differentiation of
    ``rho(u / eta) = 1``:  ``eta * grad rho(u/eta) / <grad rho(u/eta), u>``."""
    u = np.asarray(u, dtype=float)
    eta = luxemburg_norm(m, u).value if norm is None else norm
    g = m.gradient(u / eta)
    return eta * g / float(g @ u)


@dataclass
class RelationReport:
    norm: float
    modular: float
    lower_exponent: float
    upper_exponent: float
    trichotomy: bool
    sandwich_lower: bool
    sandwich_upper: bool
    lower_slack: float
    upper_slack: float

    @property
    def ok(self) -> bool:
        return self.trichotomy and self.sandwich_lower and self.sandwich_upper


def check_norm_modular_relations(m: ModularEvaluator, u, tol: float = 1e-9,
                                 norm_tol: float = 1e-12) -> RelationReport:
    """Check the norm/modular trichotomy and power sandwich for ``u``.

    If ``||u|| > 1`` then ``||u||^lo <= rho(u) <= ||u||^hi``; if ``||u|| < 1``
    the exponents swap.  Comparisons are relative with tolerance ``tol``.
    """
    nrm = luxemburg_norm(m, u, tol=norm_tol).value
    rho = m(u)
    lo, hi = m.bounds
    if rho > 1.0 + tol:
        tri = nrm > 1.0
    elif rho < 1.0 - tol:
        tri = nrm < 1.0
    else:
        tri = abs(nrm - 1.0) <= tol
    if nrm == 0.0:
        return RelationReport(0.0, rho, lo, hi, rho == 0.0, True, True, 0.0, 0.0)
    if nrm >= 1.0:
        low_b, up_b = nrm ** lo, nrm ** hi
    else:
        low_b, up_b = nrm ** hi, nrm ** lo
    lower_slack = (rho - low_b) / rho
    upper_slack = (up_b - rho) / rho
    return RelationReport(nrm, rho, lo, hi, bool(tri), lower_slack >= -tol,
                          upper_slack >= -tol, lower_slack, upper_slack)


def power_norm_bound(grid: Grid, u, nu1, nu2) -> tuple[float, float]:
    """Both sides of ``|| |u|^nu1 ||_{nu2} <= ||u||_{nu1 nu2}^{nu1-} + ||u||_{nu1 nu2}^{nu1+}``."""
    n1, n2 = nodal(grid, nu1), nodal(grid, nu2)
    if np.any(n1 < 0) or np.any(n1 * n2 < 1.0):
        raise HypothesisError("power bound needs nu1 >= 0 and nu1 * nu2 >= 1")
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        return 0.0, 0.0
    lhs = luxemburg_norm(LebesgueModular(grid, n2), powabs(u, n1)).value
    base = luxemburg_norm(LebesgueModular(grid, n1 * n2), u).value
    return lhs, base ** n1.min() + base ** n1.max()


# -- embedding constant --------------------------------------------------------

def random_bump(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Smooth non-negative bump with random centre, width and amplitude."""
    dom = grid.domain
    lo, hi = np.array(dom.lower), np.array(dom.upper)
    centre = lo + rng.random(grid.N) * (hi - lo)
    width = dom.side * (0.15 + 0.85 * rng.random())
    amp = 0.5 + 1.5 * rng.random()
    r2 = np.sum((grid.interior - centre) ** 2, axis=1) / width ** 2
    return amp * np.clip(1.0 - r2, 0.0, None) ** 2


@dataclass
class EmbeddingEstimate:
    """Lower estimate of the discrete embedding constant ``||u||_r <= C ||u||_X0``."""

    value: float
    candidate: np.ndarray
    raw_best: float
    evaluated: int
    skipped: int
    history: list = field(default_factory=list)

    def __float__(self):
        return self.value


def estimate_embedding_constant(grid: Grid, cache: PairKernelCache, r,
                                trials: int = 64, seed=0, ascent_steps: int = 50,
                                pbar=None) -> EmbeddingEstimate:
    """Estimate the best constant of ``||u||_{L^r} <= C ||u||_{X0}`` from below.

    The ratio is evaluated on ``trials`` random bumps; the best one is then
    refined by ``ascent_steps`` steps of preconditioned ascent on the
    logarithm of the ratio.  ``pbar`` (nodal ``p(x, x)``) is used to check
    ``r < p*_s``; without it the check uses the smallest pair exponent.
    """
    rn = nodal(grid, r)
    N, s = grid.N, cache.s
    pb = np.full(rn.shape, cache.p_bounds[0]) if pbar is None else nodal(grid, pbar)
    if np.any(s * pb >= N) or np.any(rn >= N * pb / (N - s * pb)):
        raise HypothesisError("embedding exponent must stay below the critical exponent")
    mx = X0Modular(cache)
    mr = LebesgueModular(grid, rn)
    rng = np.random.default_rng(seed)

    def ratio(u):
        nx = luxemburg_norm(mx, u).value
        if nx == 0.0:
            return None, 0.0, 0.0
        nr = luxemburg_norm(mr, u).value
        return nr / nx, nr, nx

    best, best_u, skipped = -math.inf, None, 0
    for _ in range(trials):
        u = random_bump(grid, rng)
        val, _, _ = ratio(u)
        if val is None:
            skipped += 1
            continue
        if val > best:
            best, best_u = val, u
    if best_u is None:
        raise NumericalError("every embedding candidate had zero X0 norm",
                             trials=trials)
    raw_best = best

    # refinement: ascent on log(||u||_r) - log(||u||_X0) in the X0 (p = 2) metric
    chol = cho_factor(cache.laplacian_matrix())
    u = best_u / luxemburg_norm(mx, best_u).value
    val, nr, nx = ratio(u)
    history = [val]
    step = 1.0
    for _ in range(ascent_steps):
        grad = norm_gradient(mr, u, nr) / nr - norm_gradient(mx, u, nx) / nx
        d = cho_solve(chol, grad)
        d_norm = math.sqrt(max(float(d @ grad), 0.0))
        if d_norm == 0.0:
            break
        improved = False
        for _ in range(40):
            trial = u + step * d / d_norm * np.linalg.norm(u)
            tv, tnr, tnx = ratio(trial)
            if tv is not None and tv > val:
                u, val, nr, nx = trial / tnx, tv, tnr / tnx, 1.0
                improved = True
                step = min(2.0 * step, 1.0)
                break
            step *= 0.5
        if not improved:
            break
        history.append(val)
    return EmbeddingEstimate(value=max(val, raw_best), candidate=u,
                             raw_best=raw_best, evaluated=trials - skipped,
                             skipped=skipped, history=history)
