"""Variable exponents, weights and the standing hypotheses of the system.

Exponents (``q``, ``alpha``, ``beta`` and the pair exponent ``p``) and weights
(``a``, ``b``, ``c``) are represented by :class:`Field` objects that can be
constants, callables of a point, callables of a pair of points, or values
tabulated on grid nodes.  :func:`check_assumptions` evaluates every standing
hypothesis on a finite sample of the closure of the domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import HypothesisError, UsageError

__all__ = [
    "Box", "Field", "ExponentField", "WeightField", "ProblemData",
    "AssumptionCheck", "AssumptionReport", "PROFILES",
    "averaged_pair", "exponent_bounds", "critical_exponent",
    "check_assumptions", "closure_samples", "desk_instance",
    "variable_instance",
]


def as_points(x, dim: Optional[int] = None) -> np.ndarray:
    """Coerce ``x`` to a float array of shape ``(m, dim)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if dim in (None, 1) else x.reshape(1, -1)
    if dim is not None and x.shape[1] != dim:
        raise UsageError(f"expected points of dimension {dim}, got {x.shape[1]}")
    return x


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``prod_k (lower_k, upper_k)`` with equal side lengths."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi):
            raise UsageError("box bounds have different dimensions")
        if any(b <= a for a, b in zip(lo, hi)):
            raise UsageError("box must have positive side lengths")
        sides = np.subtract(hi, lo)
        if not np.allclose(sides, sides[0], rtol=1e-12, atol=0.0):
            raise UsageError("uniform grids need a box with equal side lengths")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int = 1) -> "Box":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def side(self) -> float:
        return self.upper[0] - self.lower[0]

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.dim)

    @property
    def measure(self) -> float:
        return self.side ** self.dim

    def contains(self, x) -> np.ndarray:
        x = as_points(x, self.dim)
        return np.all((x > np.array(self.lower)) & (x < np.array(self.upper)), axis=1)

    def distance(self, x) -> np.ndarray:
        """Euclidean distance from each point to the closed box."""
        x = as_points(x, self.dim)
        below = np.maximum(np.array(self.lower) - x, 0.0)
        above = np.maximum(x - np.array(self.upper), 0.0)
        return np.sqrt(np.sum((below + above) ** 2, axis=1))


# -- built-in profiles -------------------------------------------------------

def _sin_bump(base=2.0, amplitude=0.0, frequency=1.0):
    def g(x):
        return base + amplitude * np.prod(np.sin(math.pi * frequency * x), axis=1)
    return g


def _cos_bump(base=2.0, amplitude=0.0, frequency=1.0):
    def g(x):
        return base + amplitude * np.prod(np.cos(math.pi * frequency * x), axis=1)
    return g


def _linear(base=2.0, slope=0.0):
    def g(x):
        return base + slope * np.sum(x, axis=1)
    return g


#: Named point profiles usable from configuration files.  Each factory takes
#: keyword parameters and returns a vectorised ``g(x)`` on ``(m, N)`` arrays.
PROFILES: dict[str, Callable[..., Callable]] = {
    "sin-bump": _sin_bump,
    "cos-bump": _cos_bump,
    "linear": _linear,
}


class Field:
    """Scalar field on the domain, or on pairs of points.

    Parameters
    ----------
    kind : {'constant', 'point', 'pair', 'table'}
    value : float, optional
        Value of a constant field.
    func : callable, optional
        ``func(x)`` for point fields, ``func(x, y)`` for pair fields, both
        vectorised over ``(m, N)`` arrays.
    nodes, values : array_like, optional
        Node coordinates and nodal values of a tabulated field; evaluation
        off the nodes uses the nearest node.
    name : str
        Label used in reports.
    """

    allow_zero = False

    def __init__(self, kind, value=None, func=None, nodes=None, values=None,
                 name=""):
        if kind not in ("constant", "point", "pair", "table"):
            raise UsageError(f"unknown field kind {kind!r}")
        self.kind = kind
        self.value = None if value is None else float(value)
        self.func = func
        self.name = name
        self.cached_inf: Optional[float] = None
        self.cached_sup: Optional[float] = None
        self._tree = None
        self.nodes = None
        self.values = None
        if kind == "constant":
            if value is None:
                raise UsageError("constant field needs a value")
            self.cached_inf = self.cached_sup = self.value
        elif kind in ("point", "pair"):
            if func is None:
                raise UsageError(f"{kind} field needs a callable")
        else:
            if nodes is None or values is None:
                raise UsageError("tabulated field needs nodes and values")
            self.values = np.asarray(values, dtype=float).ravel()
            self.nodes = as_points(nodes)
            if self.nodes.shape[0] != self.values.size:
                raise UsageError("tabulated field: node and value counts differ")
            self._tree = cKDTree(self.nodes)
        self._validate_values(self._sample_values())

    # constructors
    @classmethod
    def constant(cls, value, name=""):
        return cls("constant", value=value, name=name)

    @classmethod
    def from_function(cls, func, name=""):
        return cls("point", func=func, name=name)

    @classmethod
    def from_pair_function(cls, func, name=""):
        return cls("pair", func=func, name=name)

    @classmethod
    def tabulated(cls, nodes, values, name=""):
        return cls("table", nodes=nodes, values=values, name=name)

    @classmethod
    def profile(cls, profile, name="", **params):
        try:
            factory = PROFILES[profile]
        except KeyError:
            raise UsageError(f"unknown profile {profile!r}; "
                             f"known: {sorted(PROFILES)}") from None
        return cls("point", func=factory(**params), name=name)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def _sample_values(self):
        if self.kind == "constant":
            return np.array([self.value])
        if self.kind == "table":
            return self.values
        return None

    def _validate_values(self, vals):
        if vals is None:
            return
        if np.any(np.isnan(vals)):
            raise UsageError(f"field {self.name!r} has NaN values")

    def __call__(self, x) -> np.ndarray:
        """Point values; for pair fields the diagonal ``p(x, x)``."""
        x = as_points(x)
        if self.kind == "constant":
            return np.full(x.shape[0], self.value)
        if self.kind == "point":
            return np.asarray(self.func(x), dtype=float).reshape(x.shape[0])
        if self.kind == "pair":
            return np.asarray(self.func(x, x), dtype=float).reshape(x.shape[0])
        _, idx = self._tree.query(x)
        return self.values[idx]

    def pair(self, x, y) -> np.ndarray:
        """Values ``p(x_k, y_k)`` for matched rows of ``x`` and ``y``."""
        x = as_points(x)
        y = as_points(y, x.shape[1])
        if self.kind == "constant":
            return np.full(x.shape[0], self.value)
        if self.kind == "pair":
            return np.asarray(self.func(x, y), dtype=float).reshape(x.shape[0])
        raise UsageError(f"field {self.name!r} is not a pair field")

    def __repr__(self):
        if self.kind == "constant":
            return f"{type(self).__name__}({self.value!r}, name={self.name!r})"
        return f"{type(self).__name__}(kind={self.kind!r}, name={self.name!r})"


class ExponentField(Field):
    """Exponent field; admissible ones belong to C_+ (infimum above 1)."""


class WeightField(Field):
    """Non-negative weight field.  ``+inf`` entries are admitted so that an
    unbounded tabulation can be represented and rejected by the L^inf check."""

    allow_zero = True

    def _validate_values(self, vals):
        super()._validate_values(vals)
        if vals is not None and np.any(vals < 0):
            raise HypothesisError(f"weight {self.name!r} takes negative values")


def averaged_pair(point: Field, name="p") -> ExponentField:
    """Symmetric pair exponent ``p(x, y) = (g(x) + g(y)) / 2``.

    The diagonal reproduces ``g``; a constant ``g`` gives a constant field.
    """
    if point.is_constant:
        return ExponentField.constant(point.value, name=name)

    def p(x, y):
        return 0.5 * (point(x) + point(y))

    return ExponentField.from_pair_function(p, name=name)


# -- bounds and critical exponent --------------------------------------------

def exponent_bounds(field: Field, samples) -> tuple[float, float]:
    """Infimum and supremum of ``field`` over a sample set.

    ``samples`` is an ``(m, N)`` point array.  Pair fields are evaluated on
    every unordered pair of sample points including the diagonal; an explicit
    ``(x, y)`` tuple of matched rows can be passed instead.  The result is
    stored in ``field.cached_inf`` / ``field.cached_sup``.
    """
    if isinstance(samples, tuple):
        x, y = samples
        x = as_points(x)
        if x.shape[0] == 0:
            raise UsageError("empty sample set")
        vals = field.pair(x, y) if field.kind == "pair" else field(x)
    else:
        x = as_points(samples)
        if x.shape[0] == 0:
            raise UsageError("empty sample set")
        if field.kind == "pair":
            i, j = np.triu_indices(x.shape[0])
            vals = field.pair(x[i], x[j])
        else:
            vals = field(x)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    field.cached_inf, field.cached_sup = lo, hi
    return lo, hi


def critical_exponent(p: Field, s: float, N: int, x) -> np.ndarray | float:
    """Fractional critical exponent ``N pbar / (N - s pbar)`` with ``pbar(x) = p(x, x)``.

    Raises :class:`HypothesisError` where ``s * pbar(x) >= N``.
    """
    scalar = np.ndim(x) == 0 or (np.ndim(x) == 1 and N > 1)
    pbar = p(as_points(x, N))
    sp = s * pbar
    if np.any(sp >= N):
        raise HypothesisError(f"s*p(x,x) = {float(np.max(sp))} >= N = {N}; "
                              "critical exponent undefined")
    out = N * pbar / (N - sp)
    return float(out[0]) if scalar else out


# -- problem data --------------------------------------------------------------

@dataclass
class ProblemData:
    """Continuous problem: exponents, weights, parameters and domain."""

    N: int
    s: float
    p: ExponentField
    q: ExponentField
    alpha: ExponentField
    beta: ExponentField
    a: WeightField
    b: WeightField
    c: WeightField
    lam: float
    mu: float
    domain: Box = None

    def __post_init__(self):
        if self.domain is None:
            self.domain = Box.unit(self.N)
        if self.domain.dim != self.N:
            raise UsageError("domain dimension does not match N")
        if not 0.0 < self.s < 1.0:
            raise HypothesisError(f"s must lie in (0, 1), got {self.s}")
        if not self.lam > 0:
            raise HypothesisError(f"lambda must be positive, got {self.lam}")
        if not self.mu > 0:
            raise HypothesisError(f"mu must be positive, got {self.mu}")
        if self.p.kind not in ("constant", "pair"):
            raise UsageError("p must be a constant or a pair field")

    def with_parameters(self, lam: float, mu: float) -> "ProblemData":
        return ProblemData(self.N, self.s, self.p, self.q, self.alpha, self.beta,
                           self.a, self.b, self.c, lam, mu, self.domain)


def desk_instance(lam: float = 1e-3, mu: float | None = None) -> ProblemData:
    """1D constant-exponent instance: p=2, q=1.5, alpha=beta=1.5, s=0.4, a=b=c=1."""
    return ProblemData(
        N=1, s=0.4,
        p=ExponentField.constant(2.0, "p"),
        q=ExponentField.constant(1.5, "q"),
        alpha=ExponentField.constant(1.5, "alpha"),
        beta=ExponentField.constant(1.5, "beta"),
        a=WeightField.constant(1.0, "a"),
        b=WeightField.constant(1.0, "b"),
        c=WeightField.constant(1.0, "c"),
        lam=lam, mu=lam if mu is None else mu,
        domain=Box.unit(1),
    )


def variable_instance(lam: float = 1e-3, mu: float | None = None,
                      N: int = 1) -> ProblemData:
    """Instance with genuinely variable exponents and weights.

    On the unit interval ``pbar`` ranges over [2, 2.05] (over [1.95, 2.05] once
    collar points are included), ``q`` over [1.2, 1.25] and ``alpha + beta``
    over [3.45, 3.5]; the ordering and the gap condition hold with margin.
    """
    pbar = Field.profile("sin-bump", base=2.0, amplitude=0.05, frequency=1.0)
    ab = Field.profile("sin-bump", base=1.725, amplitude=0.025, frequency=1.0)
    return ProblemData(
        N=N, s=0.4,
        p=averaged_pair(pbar),
        q=ExponentField.profile("linear", name="q", base=1.2, slope=0.05 / N),
        alpha=ExponentField("point", func=ab.func, name="alpha"),
        beta=ExponentField("point", func=ab.func, name="beta"),
        a=WeightField.profile("linear", name="a", base=1.0, slope=1.0),
        b=WeightField.constant(1.0, "b"),
        c=WeightField.profile("cos-bump", name="c", base=1.0, amplitude=0.5),
        lam=lam, mu=lam if mu is None else mu,
        domain=Box.unit(N),
    )


# -- hypotheses --------------------------------------------------------------

@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""
    value: Optional[float] = None


@dataclass
class AssumptionReport:
    checks: list = field(default_factory=list)
    bounds: dict = field(default_factory=dict)
    limitations: list = field(default_factory=list)

    def add(self, name, passed, detail="", value=None):
        self.checks.append(AssumptionCheck(name, bool(passed), detail, value))

    def __getitem__(self, name) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list:
        return [c for c in self.checks if not c.passed]

    def format(self) -> str:
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"[{mark}] {c.name}: {c.detail}")
        for note in self.limitations:
            lines.append(f"note: {note}")
        return "\n".join(lines)


def closure_samples(domain: Box, per_axis: int) -> np.ndarray:
    """Uniform tensor samples of the closed box, endpoints included."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _safe_bounds(field: Field, samples) -> tuple[float, float]:
    if field.is_constant:
        return field.value, field.value
    return exponent_bounds(field, samples)


def check_assumptions(data: ProblemData, grid=None, cache=None,
                      oversample: int = 4, max_pair_samples: int = 400
                      ) -> AssumptionReport:
    """Evaluate the standing hypotheses on a discrete sample of the closure.

    Point fields are sampled on the grid nodes plus a tensor grid of the
    closure refined by ``oversample``.  The pair exponent is sampled on the
    pairs of a (sub-sampled) point set covering the domain and its collar,
    plus every pair stored in ``cache`` when one is supplied.  Failures are
    report entries, never exceptions.
    """
    rep = AssumptionReport()
    n_axis = (grid.n if grid is not None else 64) * oversample + 1
    pts = closure_samples(data.domain, n_axis)
    if grid is not None:
        pts = np.vstack([pts, grid.interior])

    # pair samples: closure points and, when available, collar nodes
    ext = pts
    if grid is not None and grid.collar.size:
        ext = np.vstack([pts, grid.collar])
    if ext.shape[0] > max_pair_samples:
        step = int(math.ceil(ext.shape[0] / max_pair_samples))
        ext = ext[::step]

    # C_+ memberships and bounds
    def point_bounds(f):
        return _safe_bounds(f, pts)

    bounds = {}
    for f, key in ((data.q, "q"), (data.alpha, "alpha"), (data.beta, "beta")):
        lo, hi = point_bounds(f)
        bounds[key] = (lo, hi)
        ok = lo > 1.0 and math.isfinite(hi)
        rep.add(f"C+({key})", ok, f"inf={lo:.6g}, sup={hi:.6g}")

    if data.p.is_constant:
        p_lo = p_hi = data.p.value
        sym_err = 0.0
    else:
        i, j = np.triu_indices(ext.shape[0])
        pij = data.p.pair(ext[i], ext[j])
        pji = data.p.pair(ext[j], ext[i])
        sym_err = float(np.max(np.abs(pij - pji)))
        vals = [pij, data.p(pts)]
        if cache is not None:
            vals.append(cache.p)
        allv = np.concatenate(vals)
        p_lo, p_hi = float(np.min(allv)), float(np.max(allv))
        data.p.cached_inf, data.p.cached_sup = p_lo, p_hi
    bounds["p"] = (p_lo, p_hi)
    rep.add("P1", p_lo > 1.0 and math.isfinite(p_hi), f"p in [{p_lo:.6g}, {p_hi:.6g}]")
    rep.add("P2", sym_err == 0.0, f"max |p(x,y)-p(y,x)| = {sym_err:.3g}")

    for f, key in ((data.a, "a"), (data.b, "b"), (data.c, "c")):
        vals = f(pts)
        bounds[key] = (float(np.min(vals)), float(np.max(vals)))
        rep.add(f"nonneg({key})", bool(np.all(vals >= 0)), f"min={np.min(vals):.6g}")

    pbar = data.p(pts)
    sp_max = data.s * max(p_hi, float(np.max(pbar)))
    rep.add("sp+<N", sp_max < data.N, f"s*p+ = {sp_max:.6g}, N = {data.N}")

    ab = data.alpha(pts) + data.beta(pts)
    bounds["ab"] = (float(np.min(ab)), float(np.max(ab)))
    q_lo, q_hi = bounds["q"]
    abm = bounds["alpha"][0] + bounds["beta"][0]
    abp = bounds["alpha"][1] + bounds["beta"][1]
    if np.all(data.s * pbar < data.N):
        pstar = float(np.min(data.N * pbar / (data.N - data.s * pbar)))
    else:
        pstar = float("nan")
    chain = [1.0, q_lo, q_hi, p_lo, p_hi, abm, abp, pstar]
    strict = [True, False, True, False, True, False, True]
    ok = math.isfinite(pstar)
    for k, st in enumerate(strict):
        lhs, rhs = chain[k], chain[k + 1]
        ok = ok and (lhs < rhs if st else lhs <= rhs)
    rep.add("A1", ok, "1 < q- <= q+ < p- <= p+ < (a+b)- <= (a+b)+ < p*- with "
            + ", ".join(f"{v:.6g}" for v in chain[1:]))

    if ok:
        lhs = p_lo / abp
        rhs = (p_lo - q_hi) / (abp - q_hi) * (abm - q_lo) / (p_hi - q_lo)
        rep.add("A2", lhs < rhs, f"{lhs:.6g} < {rhs:.6g}", value=rhs - lhs)
    else:
        rep.add("A2", False, "not evaluated: ordering (A1) violated")

    # (A3): discrete modular of a, b with exponent q* = (alpha+beta)/(alpha+beta-q)
    if grid is not None:
        x, vol = grid.interior, grid.cell_volume
    else:
        x, vol = pts, data.domain.measure / pts.shape[0]
    abx = data.alpha(x) + data.beta(x)
    qx = data.q(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        qstar = abx / (abx - qx)
    for f, key in ((data.a, "a"), (data.b, "b")):
        with np.errstate(over="ignore", invalid="ignore"):
            mod = float(vol * np.sum(np.abs(f(x)) ** qstar))
        good = math.isfinite(mod) and bool(np.all(abx > qx))
        rep.add(f"A3({key})", good, f"modular of {key} with q* = {mod:.6g}", value=mod)

    c_sup = bounds["c"][1]
    if grid is not None:
        c_sup = max(c_sup, float(np.max(data.c(grid.interior))))
    rep.add("A4", math.isfinite(c_sup), f"sup c = {c_sup:.6g}", value=c_sup)

    rep.bounds = bounds
    rep.limitations.append(
        "continuity of exponents and weights is not certified; only sampled "
        "bounds are checked")
    return rep
