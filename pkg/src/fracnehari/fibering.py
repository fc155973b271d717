"""Energy along rays ``t -> (t u, t v)`` and its critical points.

For a fixed direction the discrete energy is a finite sum of powers of ``t``:

    phi(t) = sum_k A_k / e_k t^e_k - sum_k B_k / q_k t^q_k - sum_k D_k / r_k t^r_k

with kinetic, concave and convex buckets.  Building the curve costs one pass
over the pair cache; afterwards each evaluation costs O(#buckets).  Root
finding works on ``g(t) = t phi'(t) = f1(t) - f2(t) - f3(t)`` in log-space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .energy import DiscreteSystem, StatePair
from .errors import BranchUnavailableError, NumericalError, UsageError
from .grid import powabs

__all__ = [
    "FiberingCurve", "FiberingRoots", "build_fibering", "find_roots",
    "classify_nehari", "nehari_measures", "project", "fibering_table",
    "PLUS", "MINUS", "ZERO", "OFF",
]

PLUS, MINUS, ZERO, OFF = "plus", "minus", "zero", "not-on-manifold"

EXACT_MODE_MAX_N = 128
MERGED_WIDTH = 1e-3


def _group(exponents, coefs, width, weighted=None):
    """Sum coefficients per distinct exponent (or per ``width``-wide interval,
    represented by its midpoint)."""
    exponents = np.asarray(exponents, dtype=float).ravel()
    coefs = np.asarray(coefs, dtype=float).ravel()
    if weighted is None:
        weighted = coefs / exponents
    keep = coefs > 0
    exponents, coefs, weighted = exponents[keep], coefs[keep], weighted[keep]
    if exponents.size == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    if width > 0:
        keys = np.floor(exponents / width)
        uniq, inv = np.unique(keys, return_inverse=True)
        centres = (uniq + 0.5) * width
    else:
        centres, inv = np.unique(exponents, return_inverse=True)
    inv = inv.ravel()
    return (centres, np.bincount(inv, weights=coefs),
            np.bincount(inv, weights=weighted))


@dataclass(frozen=True, eq=False)
class FiberingCurve:
    """Bucketed representation of ``phi``; immutable once built.

    ``*_coef`` are the coefficients of ``t phi'`` (A, B, D) and ``*_weighted``
    the ones of ``phi`` (A/e, B/q, D/r, summed before merging).
    """

    kinetic_exp: np.ndarray
    kinetic_coef: np.ndarray
    kinetic_weighted: np.ndarray
    concave_exp: np.ndarray
    concave_coef: np.ndarray
    concave_weighted: np.ndarray
    convex_exp: np.ndarray
    convex_coef: np.ndarray
    convex_weighted: np.ndarray
    bucket_width: float = 0.0

    @classmethod
    def from_coefficients(cls, kinetic, concave=(), convex=(),
                          bucket_width: float = 0.0) -> "FiberingCurve":
        """Build from ``(exponent, coefficient)`` lists for P, Q and R."""
        parts = []
        for terms in (kinetic, concave, convex):
            arr = np.asarray(list(terms), dtype=float).reshape(-1, 2)
            if np.any(arr[:, 1] < 0):
                raise UsageError("fibering coefficients must be non-negative")
            if np.any(arr[:, 0] <= 0):
                raise UsageError("fibering exponents must be positive")
            parts.extend(_group(arr[:, 0], arr[:, 1], bucket_width))
        return cls(*parts, bucket_width=float(bucket_width))

    # totals at t = 1
    @property
    def P(self) -> float:
        return float(self.kinetic_coef.sum())

    @property
    def Q(self) -> float:
        return float(self.concave_coef.sum())

    @property
    def R(self) -> float:
        return float(self.convex_coef.sum())

    @property
    def n_buckets(self) -> int:
        return self.kinetic_exp.size + self.concave_exp.size + self.convex_exp.size

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(~(t > 0)):
            raise UsageError("fibering curve is evaluated at t > 0 only")
        return t

    @staticmethod
    def _sum(coef, exp, t):
        if coef.size == 0:
            return np.zeros_like(t)
        return np.exp(np.multiply.outer(np.log(t), exp)) @ coef

    def f1(self, t):
        """``sum A t^e`` (the kinetic part of ``t phi'``)."""
        t = self._check(t)
        return self._sum(self.kinetic_coef, self.kinetic_exp, t)

    def f2(self, t):
        t = self._check(t)
        return self._sum(self.concave_coef, self.concave_exp, t)

    def f3(self, t):
        t = self._check(t)
        return self._sum(self.convex_coef, self.convex_exp, t)

    def scaled_slope(self, t):
        """``t phi'(t) = f1 - f2 - f3``."""
        return self.f1(t) - self.f2(t) - self.f3(t)

    def slope_scale(self, t):
        """``f1 + f2 + f3``: magnitude against which ``t phi'`` is compared."""
        return self.f1(t) + self.f2(t) + self.f3(t)

    def evaluate(self, t, order: int = 0):
        """``phi``, ``phi'`` or ``phi''`` at ``t > 0``."""
        t = self._check(t)
        s = self._sum
        if order == 0:
            return (s(self.kinetic_weighted, self.kinetic_exp, t)
                    - s(self.concave_weighted, self.concave_exp, t)
                    - s(self.convex_weighted, self.convex_exp, t))
        if order == 1:
            return self.scaled_slope(t) / t
        if order == 2:
            return (s(self.kinetic_coef * (self.kinetic_exp - 1), self.kinetic_exp, t)
                    - s(self.concave_coef * (self.concave_exp - 1), self.concave_exp, t)
                    - s(self.convex_coef * (self.convex_exp - 1), self.convex_exp, t)) / t ** 2
        raise UsageError(f"order must be 0, 1 or 2, got {order}")

    def curvature_scale(self, t=1.0) -> float:
        """``sum e A t^e + sum q B t^q + sum r D t^r`` divided by ``t^2``."""
        t = self._check(t)
        s = self._sum
        return (s(self.kinetic_coef * self.kinetic_exp, self.kinetic_exp, t)
                + s(self.concave_coef * self.concave_exp, self.concave_exp, t)
                + s(self.convex_coef * self.convex_exp, self.convex_exp, t)) / t ** 2

    def error_bound(self, t) -> float:
        """Bound on ``|phi(t) - phi_exact(t)|`` caused by bucket merging."""
        t = self._check(t)
        if self.bucket_width == 0:
            return np.zeros_like(t)
        grow = np.exp(0.5 * self.bucket_width * np.abs(np.log(t)))
        total = 0.0
        for w, e in ((self.kinetic_weighted, self.kinetic_exp),
                     (self.concave_weighted, self.concave_exp),
                     (self.convex_weighted, self.convex_exp)):
            total = total + self._sum(w, e, t)
        return total * (grow - 1.0)


def build_fibering(system: DiscreteSystem, pair: StatePair,
                   bucket_width: Optional[float] = None) -> FiberingCurve:
    """Bucket the energy of ``pair`` by exponent.

    ``bucket_width=None`` picks exact mode (one bucket per distinct exponent)
    up to 128 nodes per axis and ``1e-3`` merging beyond that.
    """
    if pair.is_zero():
        raise UsageError("the fibering curve of the zero pair is undefined")
    if bucket_width is None:
        bucket_width = 0.0 if system.grid.n <= EXACT_MODE_MAX_N else MERGED_WIDTH
    if bucket_width < 0:
        raise UsageError("bucket_width must be non-negative")
    cache = system.cache
    du = cache.differences(pair.u)
    dv = cache.differences(pair.v)
    kin = 2.0 * cache.w * (powabs(du, cache.p) + powabs(dv, cache.p))
    if bucket_width == 0:
        nb = cache.p_values.size
        A = np.bincount(cache.bucket, weights=kin, minlength=nb)
        At = np.bincount(cache.bucket, weights=kin / cache.p, minlength=nb)
        keep = A > 0
        kinetic = (cache.p_values[keep], A[keep], At[keep])
    else:
        kinetic = _group(cache.p, kin, bucket_width, kin / cache.p)
    vol = system.grid.cell_volume
    uq = powabs(pair.u, system.q)
    vq = powabs(pair.v, system.q)
    conc = vol * (system.lam * np.where(uq == 0, 0.0, system.a * uq)
                  + system.mu * np.where(vq == 0, 0.0, system.b * vq))
    prod = powabs(pair.u, system.alpha) * powabs(pair.v, system.beta)
    conv = vol * np.where(prod == 0, 0.0, system.c * prod)
    concave = _group(system.q, conc, bucket_width)
    convex = _group(system.coupling, conv, bucket_width)
    return FiberingCurve(*kinetic, *concave, *convex, bucket_width=float(bucket_width))


def fibering_table(curve: FiberingCurve, ts) -> np.ndarray:
    """Rows ``(t, phi, phi', phi'')``."""
    ts = np.asarray(ts, dtype=float)
    return np.column_stack([ts, curve.evaluate(ts, 0), curve.evaluate(ts, 1),
                            curve.evaluate(ts, 2)])


# -- roots ---------------------------------------------------------------------

@dataclass
class FiberingRoots:
    t_plus: Optional[float] = None
    t_minus: Optional[float] = None
    t_star: Optional[float] = None
    t_max_f: Optional[float] = None
    regime: str = "no-root"
    second_plus: Optional[float] = None
    second_minus: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def both(self) -> bool:
        return self.t_plus is not None and self.t_minus is not None


_MAX_OCTAVES = 60


def _bisect_log(fun, lo, hi, rel_width, max_iter=400):
    """Bisection in ``log t`` for a sign change of ``fun`` on ``[lo, hi]``.

    ``fun(lo)`` and ``fun(hi)`` must have opposite signs.
    """
    flo = fun(lo)
    a, b = math.log(lo), math.log(hi)
    it = 0
    while b - a > rel_width and it < max_iter:
        mid = 0.5 * (a + b)
        fm = fun(math.exp(mid))
        if fm == 0.0:
            return math.exp(mid), (math.exp(mid), math.exp(mid)), it + 1
        if (fm > 0) == (flo > 0):
            a, flo = mid, fm
        else:
            b = mid
        it += 1
    return math.exp(0.5 * (a + b)), (math.exp(a), math.exp(b)), it


def _polish(curve, t, bracket, steps):
    """Safeguarded Newton on ``phi'``: steps leaving the bracket or not
    reducing ``|phi'|`` are rejected."""
    lo, hi = bracket
    r = float(curve.evaluate(t, 1))
    for _ in range(steps):
        d2 = float(curve.evaluate(t, 2))
        if d2 == 0.0 or r == 0.0:
            break
        tn = t - r / d2
        if not lo <= tn <= hi:
            break
        rn = float(curve.evaluate(tn, 1))
        if abs(rn) >= abs(r):
            break
        t, r = tn, rn
    return t


def _expand(fun, start, factor, want_positive, limit):
    """Multiply ``start`` by ``factor`` until ``fun`` has the wanted sign."""
    t = start
    for _ in range(limit):
        v = fun(t)
        if (v > 0) == want_positive and v != 0:
            return t
        t *= factor
    return None


def find_roots(curve: FiberingCurve, tol: float = 1e-12, newton_steps: int = 5,
               residual_tol: float = 1e-8) -> FiberingRoots:
    """Critical points of ``phi``: ``t_plus`` (local min) < ``t_minus`` (local max).

    Without a concave part only ``t_minus`` exists; without a convex part only
    ``t_plus``.  When both parts are present and the kinetic term never beats
    them, the regime is flagged ``no-root``.  ``tol`` is the relative width of
    the final bracket.
    """
    g = lambda t: float(curve.scaled_slope(t))
    scale = lambda t: float(curve.slope_scale(t))
    has_q, has_r = curve.Q > 0, curve.R > 0
    out = FiberingRoots()
    diag = out.diagnostics
    limit = 2 * _MAX_OCTAVES

    def solve(lo, hi, label):
        t, br, its = _bisect_log(g, lo, hi, tol)
        t = _polish(curve, t, br, newton_steps)
        res = abs(g(t)) / scale(t)
        diag[label] = {"bracket": br, "iterations": its, "residual": res}
        if res > residual_tol:
            raise NumericalError(f"fibering root {label} did not converge",
                                 bracket=br, residual=res, iterations=its)
        return t

    if not has_q and not has_r:
        out.regime = "no-root"
        diag["reason"] = "phi' > 0 for all t (no concave or convex part)"
        return out

    if not has_q:
        # g > 0 near 0, g < 0 for large t
        hi = _expand(g, 1.0, 2.0, False, limit)
        lo = _expand(g, 1.0, 0.5, True, limit)
        if hi is None or lo is None:
            raise NumericalError("could not bracket t_minus", lo=lo, hi=hi)
        out.t_minus = solve(lo, hi, "t_minus")
        out.regime = "minus-only"
    elif not has_r:
        # g < 0 near 0, g > 0 for large t
        hi = _expand(g, 1.0, 2.0, True, limit)
        lo = _expand(g, 1.0, 0.5, False, limit)
        if hi is None or lo is None:
            raise NumericalError("could not bracket t_plus", lo=lo, hi=hi)
        out.t_plus = solve(lo, hi, "t_plus")
        out.regime = "plus-only"
    else:
        # maximiser of f1 - f3: zero of sum e A t^e - sum r D t^r
        h = lambda t: float(curve._sum(curve.kinetic_coef * curve.kinetic_exp,
                                       curve.kinetic_exp, np.asarray(t))
                            - curve._sum(curve.convex_coef * curve.convex_exp,
                                         curve.convex_exp, np.asarray(t)))
        hi = _expand(h, 1.0, 2.0, False, limit)
        lo = _expand(h, 1.0, 0.5, True, limit)
        if hi is None or lo is None:
            raise NumericalError("could not bracket the maximiser of f1 - f3")
        tm, _, _ = _bisect_log(h, lo, hi, tol)
        out.t_max_f = tm
        split = tm if g(tm) > 0 else _best_positive(g, tm)
        diag["split"] = split
        if split is None:
            out.regime = "no-root"
            diag["reason"] = "f2 >= f1 - f3 everywhere: lambda + mu too large"
            return out
        lo = _expand(g, split, 0.5, False, limit)
        hi = _expand(g, max(1.0, 2.0 * split), 2.0, False, limit)
        if lo is None or hi is None:
            raise NumericalError("could not bracket the fibering roots",
                                 split=split, lo=lo, hi=hi)
        out.t_plus = solve(lo, split, "t_plus")
        out.t_minus = solve(split, hi, "t_minus")
        out.regime = "two-roots"
        lo_s, hi_s = out.t_plus, out.t_minus
        phi = lambda t: float(curve.evaluate(t, 0))
        if phi(lo_s) < 0 < phi(hi_s):
            out.t_star, _, _ = _bisect_log(phi, lo_s, hi_s, tol)
    if out.t_plus is not None:
        out.second_plus = float(curve.evaluate(out.t_plus, 2))
    if out.t_minus is not None:
        out.second_minus = float(curve.evaluate(out.t_minus, 2))
    return out


def _best_positive(g, t_max):
    """Point in ``(0, t_max]`` where ``g > 0``, or None.

    ``g`` is sampled on a log grid, then the best sample is refined by a
    bounded scalar maximisation.
    """
    s_hi = math.log(t_max)
    s = s_hi - np.linspace(0.0, _MAX_OCTAVES * math.log(2.0), 481)
    vals = np.array([g(math.exp(x)) for x in s])
    k = int(np.argmax(vals))
    if vals[k] > 0:
        return math.exp(s[k])
    a = s[min(k + 1, s.size - 1)]
    b = s[max(k - 1, 0)]
    if a == b:
        return None
    res = minimize_scalar(lambda x: -g(math.exp(x)), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-12})
    return math.exp(res.x) if -res.fun > 0 else None


# -- classification and projection --------------------------------------------

def nehari_measures(system: DiscreteSystem, pair: StatePair,
                    bucket_width: Optional[float] = None):
    """``(phi'(1), phi''(1), slope scale, curvature scale)`` of ``pair``."""
    curve = build_fibering(system, pair, bucket_width)
    return (float(curve.evaluate(1.0, 1)), float(curve.evaluate(1.0, 2)),
            float(curve.slope_scale(1.0)), float(curve.curvature_scale(1.0)))


def classify_nehari(system: DiscreteSystem, pair: StatePair, tol: float = 1e-8,
                    bucket_width: Optional[float] = None) -> str:
    """``plus``, ``minus``, ``zero`` or ``not-on-manifold``.

    ``pair`` is on the Nehari set when ``|P - Q - R| <= tol (P + Q + R)``; the
    sign of ``phi''(1)`` decides the part, with ``zero`` when
    ``|phi''(1)| <= tol * sum(e A + q B + r D)``.
    """
    if pair.is_zero():
        return OFF
    d1, d2, s1, s2 = nehari_measures(system, pair, bucket_width)
    if abs(d1) > tol * s1:
        return OFF
    if abs(d2) <= tol * s2:
        return ZERO
    return PLUS if d2 > 0 else MINUS


def project(system: DiscreteSystem, pair: StatePair, branch: str,
            bucket_width: Optional[float] = None, return_root: bool = False):
    """Rescale ``pair`` onto the ``plus`` or ``minus`` part of its ray."""
    if branch not in (PLUS, MINUS):
        raise UsageError(f"branch must be 'plus' or 'minus', got {branch!r}")
    curve = build_fibering(system, pair, bucket_width)
    roots = find_roots(curve)
    t = roots.t_plus if branch == PLUS else roots.t_minus
    if t is None:
        raise BranchUnavailableError(f"no {branch} root on this ray",
                                     regime=roots.regime, Q=curve.Q, R=curve.R,
                                     **roots.diagnostics)
    out = pair.scaled(t)
    return (out, t, roots) if return_root else out
