"""Threshold constants, branch minimisation on the Nehari set, lemma checks.

Minimisation on a branch is preconditioned projected descent on the reduced
functional ``F(w) = J(t(w) w)``, where ``t(w)`` is the branch root of the
fibering curve of ``w``.  Because ``dJ/dt`` vanishes at ``t(w)``, the
gradient of F at a Nehari point is the energy gradient with its component
along the ray removed.  Directions are preconditioned by the kinetic matrix
of the ``p = 2`` modular, which makes the iteration insensitive to the grid
size.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .energy import (DiscreteSystem, StatePair, energy, energy_gradient,
                     pair_norm)
from .errors import (BranchUnavailableError, HypothesisError, NumericalError,
                     UsageError)
from .fibering import (MINUS, PLUS, build_fibering, classify_nehari,
                       find_roots, nehari_measures, project)
from .grid import signed_pow
from .vx_space import (EmbeddingEstimate, LebesgueModular,
                       estimate_embedding_constant, luxemburg_norm,
                       random_bump)

__all__ = [
    "ThresholdSet", "compute_constants", "NehariPoint", "SolveOptions",
    "minimize_on_branch", "nonnegativize", "SolveReport",
    "solve_two_solutions", "LemmaCheck", "LemmaReport", "verify_lemma_suite",
    "random_pair", "Preconditioner",
]


# -- thresholds ----------------------------------------------------------------

@dataclass
class ThresholdSet:
    """Constants of the P/Q/R estimates and the parameter thresholds.

    ``estimated`` is True because the embedding constant is a numerical lower
    estimate; every derived quantity inherits that caveat.
    """

    C1: float
    C2: float
    K1: float
    K2: float
    delta: float
    delta0: float
    K_lower: float
    d1: float
    d2: float
    embedding: float
    a_norm: float
    b_norm: float
    c_sup: float
    exponents: dict
    estimated: bool = True

    @property
    def delta_hat(self) -> float:
        return self.delta

    @property
    def delta0_hat(self) -> float:
        return self.delta0

    def as_dict(self) -> dict:
        return asdict(self)


def _exponent_bounds(system: DiscreteSystem) -> dict:
    b = system.bounds()
    p_lo, p_hi = b["p"]
    q_lo, q_hi = b["q"]
    ab_lo = b["alpha"][0] + b["beta"][0]
    ab_hi = b["alpha"][1] + b["beta"][1]
    return {"p-": p_lo, "p+": p_hi, "q-": q_lo, "q+": q_hi,
            "ab-": ab_lo, "ab+": ab_hi}


def compute_constants(system: DiscreteSystem,
                      embedding: Optional[EmbeddingEstimate | float] = None,
                      trials: int = 64, seed=0) -> ThresholdSet:
    """Constants C1, C2 of the P/Q/R estimates and the thresholds delta, delta0.

    ``embedding`` is the constant of ``||u||_{alpha+beta} <= C ||u||_X0``;
    when omitted it is estimated from ``trials`` seeded candidates.
    """
    e = _exponent_bounds(system)
    pm, pp, qm, qp, rm, rp = (e["p-"], e["p+"], e["q-"], e["q+"], e["ab-"], e["ab+"])
    if not (1 < qm <= qp < pm <= pp < rm <= rp):
        raise HypothesisError("exponent ordering 1 < q- <= q+ < p- <= p+ < "
                              "(alpha+beta)- fails on the grid: " + ", ".join(
                                  f"{k} = {v:.6g}" for k, v in e.items()))
    grid = system.grid
    if embedding is None:
        embedding = estimate_embedding_constant(
            grid, system.cache, system.coupling, trials=trials, seed=seed,
            pbar=system.data.p(grid.interior))
    C = float(embedding)
    r = system.coupling
    qstar = r / (r - system.q)
    norms = []
    for w in (system.a, system.b):
        if not np.all(np.isfinite(w)):
            raise HypothesisError("weights must be finite on the grid nodes")
        norms.append(luxemburg_norm(LebesgueModular(grid, qstar), w).value)
    c_sup = float(np.max(system.c))
    if not math.isfinite(c_sup):
        raise HypothesisError("c must be bounded")
    K1 = 2.0 * (norms[0] + norms[1]) * max(C ** qm, C ** qp)
    K2 = c_sup * max(C ** rm, C ** rp)
    C1, C2 = 4.0 * K1, 4.0 * K2 + 1.0
    if C1 <= 0:
        raise HypothesisError("a and b vanish identically: C1 = 0")
    X = (pm - qp) / (C2 * (rp - qp))
    delta = (1.0 / C1) * ((rm - pp) / (rm - qm)) * X ** ((pp - qm) / (rm - pp))
    lm = system.lam + system.mu
    d1 = X ** (qm / (rm - pp)) * (
        (1.0 / pp - 1.0 / rm) * X ** ((pp - qm) / (rm - pp))
        - (1.0 / qm - 1.0 / rm) * C1 * lm)
    d2 = X ** ((qp - qm) / (rm - pp)) * d1
    return ThresholdSet(C1=C1, C2=C2, K1=K1, K2=K2, delta=delta,
                        delta0=(qm / pp) * delta, K_lower=min(d1, d2), d1=d1,
                        d2=d2, embedding=C, a_norm=norms[0], b_norm=norms[1],
                        c_sup=c_sup, exponents=e)


# -- projected descent ---------------------------------------------------------

class Preconditioner:
    """Cholesky factor of the ``p = 2`` kinetic matrix, applied per component."""

    def __init__(self, system: DiscreteSystem):
        self.K = system.cache.laplacian_matrix()
        self.factor = cho_factor(self.K)

    def solve(self, g: np.ndarray) -> np.ndarray:
        m = self.K.shape[0]
        return np.concatenate([cho_solve(self.factor, g[:m]),
                               cho_solve(self.factor, g[m:])])

    def apply(self, x: np.ndarray) -> np.ndarray:
        m = self.K.shape[0]
        return np.concatenate([self.K @ x[:m], self.K @ x[m:]])


@dataclass
class SolveOptions:
    tol_grad: float = 1e-6
    max_iter: int = 2000
    multistart: int = 8
    multistart_iter: int = 150
    seed: int = 0
    armijo: float = 1e-4
    max_backtracks: int = 60
    tol_manifold: float = 1e-8
    bucket_width: Optional[float] = None
    embedding_trials: int = 64

    def __post_init__(self):
        for name in ("tol_grad", "tol_manifold", "armijo"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        if self.max_iter < 1 or self.multistart < 0 or self.multistart_iter < 1:
            raise UsageError("iteration caps must be positive")


@dataclass
class NehariPoint:
    pair: StatePair
    branch: str
    J_value: float
    P: float
    Q: float
    R: float
    gradient_residual: float
    fibering_second: float
    iterations: int = 0
    converged: bool = False
    status: str = ""
    history: list = field(default_factory=list)

    @property
    def manifold_defect(self) -> float:
        return self.P - self.Q - self.R


def _gradient_data(system, pair, pre):
    """Projected gradient, preconditioned direction, slope and residual.

    The residual is the preconditioned norm of the projected gradient
    relative to that of the kinetic part of the gradient.
    """
    gu, gv = energy_gradient(system, pair)
    g = np.concatenate([gu, gv])
    z = pair.flat()
    Kz = pre.apply(z)
    g_perp = g - (float(g @ z) / float(z @ Kz)) * Kz
    d = pre.solve(g_perp)
    c = system.cache
    ku = 2.0 * c.scatter(c.w * signed_pow(c.differences(pair.u), c.p))
    kv = 2.0 * c.scatter(c.w * signed_pow(c.differences(pair.v), c.p))
    gk = np.concatenate([ku, kv])
    kin = math.sqrt(max(float(gk @ pre.solve(gk)), 0.0))
    slope = float(g_perp @ d)
    res = math.sqrt(max(slope, 0.0)) / kin if kin > 0 else math.inf
    return g_perp, d, slope, res


def _point(system, pair, branch, res, its, converged, status, history, bw):
    e = energy(system, pair)
    _, d2, _, _ = nehari_measures(system, pair, bw)
    return NehariPoint(pair=pair, branch=branch, J_value=e.J, P=e.P, Q=e.Q,
                       R=e.R, gradient_residual=res, fibering_second=d2,
                       iterations=its, converged=converged, status=status,
                       history=history)


def minimize_on_branch(system: DiscreteSystem, branch: str, init: StatePair,
                       opts: Optional[SolveOptions] = None,
                       max_iter: Optional[int] = None,
                       pre: Optional[Preconditioner] = None) -> NehariPoint:
    """Minimise the energy over the ``plus`` or ``minus`` part of the Nehari set.

    ``init`` is any nonzero pair; it is first projected onto the branch.
    Iterates are accepted by an Armijo test on the energy, so the recorded
    energies decrease strictly.  Stops when the relative projected-gradient
    residual drops below ``opts.tol_grad`` or the step collapses.
    """
    opts = opts or SolveOptions()
    cap = opts.max_iter if max_iter is None else max_iter
    pre = pre or Preconditioner(system)
    bw = opts.bucket_width
    z = project(system, init, branch, bw)
    J = energy(system, z).J
    history = [J]
    g, d, slope, res = _gradient_data(system, z, pre)
    sigma = 1.0
    its = 0
    status = "max-iter"
    while res > opts.tol_grad and its < cap:
        # trust cap: a step moves at most half the iterate's kinetic size
        x = z.flat()
        size = math.sqrt(float(x @ pre.apply(x)))
        sigma = min(sigma, 0.5 * size / math.sqrt(slope))
        accepted = False
        for _ in range(opts.max_backtracks):
            try:
                zt = project(system, StatePair.from_flat(x - sigma * d), branch, bw)
            except NumericalError:
                sigma *= 0.5
                continue
            Jt = energy(system, zt).J
            if Jt < J and Jt <= J - opts.armijo * sigma * slope:
                accepted = True
                break
            sigma *= 0.5
        if not accepted:
            status = "step-collapse"
            break
        its += 1
        gt, dt, slope_t, res = _gradient_data(system, zt, pre)
        # Barzilai-Borwein step in the preconditioner metric for the next trial
        step = zt.flat() - x
        curv = float(step @ (gt - g))
        sigma = (float(step @ pre.apply(step)) / curv) if curv > 0 else 2.0 * sigma
        z, J, g, d, slope = zt, Jt, gt, dt, slope_t
        history.append(J)
    converged = res <= opts.tol_grad
    if converged:
        status = "converged"
    return _point(system, z, branch, res, its, converged, status, history, bw)


def nonnegativize(pair: StatePair) -> StatePair:
    """Componentwise absolute value; never increases the energy."""
    return StatePair(np.abs(pair.u), np.abs(pair.v))


def random_pair(system: DiscreteSystem, rng: np.random.Generator) -> StatePair:
    """Pair of random smooth non-negative bumps."""
    while True:
        u = random_bump(system.grid, rng)
        v = random_bump(system.grid, rng)
        if np.any(u) and np.any(v):
            return StatePair(u, v)


# -- two solutions ---------------------------------------------------------------

@dataclass
class SolveReport:
    plus_solution: Optional[NehariPoint]
    minus_solution: Optional[NehariPoint]
    theta_plus: Optional[float]
    theta_minus: Optional[float]
    thresholds: ThresholdSet
    checks: dict
    warnings: list
    grid_info: dict
    multistart: dict
    semi_trivial: dict
    failures: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return (self.plus_solution is not None and self.minus_solution is not None
                and all(self.checks.values()))

    def summary(self) -> dict:
        def pt(p):
            if p is None:
                return None
            return {"J": p.J_value, "P": p.P, "Q": p.Q, "R": p.R,
                    "gradient_residual": p.gradient_residual,
                    "fibering_second": p.fibering_second,
                    "iterations": p.iterations, "converged": p.converged,
                    "status": p.status, "energy_history": p.history}
        return {
            "success": self.success,
            "theta_plus": self.theta_plus, "theta_minus": self.theta_minus,
            "plus": pt(self.plus_solution), "minus": pt(self.minus_solution),
            "thresholds": self.thresholds.as_dict(), "checks": self.checks,
            "warnings": self.warnings, "grid": self.grid_info,
            "multistart": self.multistart, "semi_trivial": self.semi_trivial,
            "failures": self.failures,
        }


def _best_start(system, branch, opts, pre, rng):
    inits = [StatePair(np.ones(system.m), np.ones(system.m))]
    inits += [random_pair(system, rng) for _ in range(opts.multistart)]
    runs = []
    for k, init in enumerate(inits):
        for _ in range(10):
            try:
                pt = minimize_on_branch(system, branch, init, opts,
                                        max_iter=opts.multistart_iter, pre=pre)
                break
            except BranchUnavailableError:
                init = random_pair(system, rng)
        else:
            continue
        runs.append((pt.J_value, k, pt))
    if not runs:
        raise BranchUnavailableError(f"no start reached the {branch} branch")
    runs.sort(key=lambda r: (r[0], r[1]))
    return runs[0][2], [r[0] for r in sorted(runs, key=lambda r: r[1])]


def _solve_branch(system, branch, opts, pre, rng):
    best, energies = _best_start(system, branch, opts, pre, rng)
    pt = best
    for _ in range(4):
        start = nonnegativize(pt.pair)
        pt = minimize_on_branch(system, branch, start, opts, pre=pre)
        if np.all(pt.pair.u >= 0) and np.all(pt.pair.v >= 0):
            break
    return pt, energies


def solve_two_solutions(system: DiscreteSystem, opts: Optional[SolveOptions] = None,
                        thresholds: Optional[ThresholdSet] = None) -> SolveReport:
    """Minimise on both branches and assemble the report.

    Each branch runs a multistart (the constant pair plus ``opts.multistart``
    random bump pairs) with a loose iteration cap; the best start is replaced
    by its absolute value and polished to ``opts.tol_grad``.
    """
    opts = opts or SolveOptions()
    if thresholds is None:
        thresholds = compute_constants(system, trials=opts.embedding_trials,
                                       seed=opts.seed)
    warnings = []
    lm = system.lam + system.mu
    if lm >= thresholds.delta:
        warnings.append(f"lambda + mu = {lm:.6g} >= delta_hat = {thresholds.delta:.6g}")
    elif lm >= thresholds.delta0:
        warnings.append(f"lambda + mu = {lm:.6g} >= delta0_hat = {thresholds.delta0:.6g}")
    pre = Preconditioner(system)
    points, failures, multistart = {}, {}, {}
    for k, branch in enumerate((PLUS, MINUS)):
        rng = np.random.default_rng([opts.seed, k])
        try:
            pt, energies = _solve_branch(system, branch, opts, pre, rng)
            points[branch] = pt
            multistart[branch] = energies
        except NumericalError as exc:
            failures[branch] = f"{type(exc).__name__}: {exc}"
            points[branch] = None
    plus, minus = points[PLUS], points[MINUS]
    checks = {}
    tol = opts.tol_manifold
    for name, pt in ((PLUS, plus), (MINUS, minus)):
        if pt is None:
            continue
        checks[f"{name}_classified"] = classify_nehari(system, pt.pair, tol) == name
        checks[f"{name}_manifold_identity"] = (
            abs(pt.manifold_defect) <= tol * max(1.0, pt.P))
        checks[f"{name}_nonnegative"] = bool(np.all(pt.pair.u >= 0)
                                             and np.all(pt.pair.v >= 0))
        checks[f"{name}_converged"] = pt.converged
    if plus is not None:
        checks["theta_plus_negative"] = plus.J_value < 0
    if minus is not None:
        checks["theta_minus_positive"] = minus.J_value > 0
        mx = pair_norm(system, StatePair(minus.pair.u, np.zeros(system.m)))
        my = pair_norm(system, StatePair(minus.pair.v, np.zeros(system.m)))
        checks["minus_not_semi_trivial"] = min(mx, my) > 1e-6
    semi = {}
    if minus is not None:
        semi = _semi_trivial_diagnostic(system, minus, opts.bucket_width)
    if plus is not None and minus is not None:
        diff = plus.pair.flat() - minus.pair.flat()
        checks["distinct"] = (float(np.sum(diff ** 2)) * system.grid.cell_volume) > 0
    if failures:
        warnings.extend(f"{b} branch failed: {m}" for b, m in failures.items())
    g = system.grid
    grid_info = {"N": g.N, "n": g.n, "h": g.h, "collar_width": g.collar_width,
                 "n_interior": g.n_interior, "n_collar": g.n_collar,
                 "n_pairs": system.cache.n_pairs,
                 "lambda": system.lam, "mu": system.mu}
    return SolveReport(plus, minus, plus.J_value if plus else None,
                       minus.J_value if minus else None, thresholds, checks,
                       warnings, grid_info, multistart, semi, failures)


def _semi_trivial_diagnostic(system, minus: NehariPoint, bw) -> dict:
    """Energies of ``(u, 0)`` and ``(0, v)`` projected to the plus branch.

    A semi-trivial Nehari point has no coupling term and sits on the plus
    branch with negative energy, below the positive minus-branch level.
    """
    out = {"theta_minus": minus.J_value}
    zero = np.zeros(system.m)
    for key, pair in (("u_only", StatePair(minus.pair.u, zero)),
                      ("v_only", StatePair(zero, minus.pair.v))):
        if pair.is_zero():
            out[key] = None
            continue
        try:
            out[key] = energy(system, project(system, pair, PLUS, bw)).J
        except NumericalError:
            out[key] = None
    vals = [out[k] for k in ("u_only", "v_only") if out[k] is not None]
    out["below_theta_minus"] = bool(vals) and all(v < minus.J_value for v in vals)
    return out


# -- lemma verification -----------------------------------------------------------

@dataclass
class LemmaCheck:
    name: str
    samples: int = 0
    violations: int = 0
    worst_slack: float = math.inf
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, slack: float, ok: Optional[bool] = None):
        """Add one sample; ``slack < 0`` (or ``ok=False``) is a violation."""
        self.samples += 1
        self.worst_slack = min(self.worst_slack, slack)
        if (slack < 0) if ok is None else not ok:
            self.violations += 1


@dataclass
class LemmaReport:
    checks: dict
    thresholds: ThresholdSet
    lam: float
    mu: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, name) -> LemmaCheck:
        return self.checks[name]

    def format(self) -> str:
        lines = []
        for c in self.checks.values():
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"{mark} {c.name}: {c.violations}/{c.samples} violations, "
                         f"worst slack {c.worst_slack:.3e}{' ' + c.detail if c.detail else ''}")
        return "\n".join(lines)


def _signed_random_pair(system, rng):
    """Random direction: a smooth bump pair, optionally with signed noise and
    a random overall scale spanning both sides of norm one."""
    pair = random_pair(system, rng)
    u, v = pair.u, pair.v
    if rng.random() < 0.5:
        u = u + 0.3 * rng.standard_normal(u.size) * np.max(u)
        v = v + 0.3 * rng.standard_normal(v.size) * np.max(v)
    scale = 10.0 ** rng.uniform(-3, 3)
    return StatePair(scale * u, scale * v)


def verify_lemma_suite(system: DiscreteSystem, samples: int = 200, seed=0,
                       thresholds: Optional[ThresholdSet] = None,
                       tol: float = 1e-8, rel: float = 1e-9) -> LemmaReport:
    """Check the quantitative estimates on random pairs and projected points.

    Failures are recorded as violations, never raised.  ``rel`` is the
    relative slack granted to the inequality checks for rounding.
    """
    th = thresholds or compute_constants(system, seed=seed)
    e = th.exponents
    pm, pp, qm, qp, rm, rp = (e["p-"], e["p+"], e["q-"], e["q+"], e["ab-"], e["ab+"])
    lm = system.lam + system.mu
    rng = np.random.default_rng(seed)
    names = ["P_sandwich", "Q_bound", "R_bound", "thresholds_positive",
             "no_degenerate_points", "plus_Q_positive", "plus_J_negative",
             "minus_R_positive", "minus_J_positive", "manifold_identity",
             "coercivity_bound", "roots_available"]
    ch = {n: LemmaCheck(n) for n in names}
    ch["thresholds_positive"].record(min(th.delta, th.delta0),
                                     th.delta > 0 and th.delta0 <= th.delta)
    for _ in range(samples):
        pair = _signed_random_pair(system, rng)
        en = energy(system, pair)
        nrm = pair_norm(system, pair)
        if nrm >= 1:
            lo, hi = nrm ** pm, 2 * nrm ** pp
        else:
            lo, hi = nrm ** pp, 2 * nrm ** pm
        ch["P_sandwich"].record(min(en.P - lo * (1 - rel), hi * (1 + rel) - en.P) / en.P)
        qb = th.C1 * lm * max(nrm ** qm, nrm ** qp)
        ch["Q_bound"].record((qb * (1 + rel) - en.Q) / qb)
        rb = th.C2 * max(nrm ** rm, nrm ** rp)
        ch["R_bound"].record((rb * (1 + rel) - en.R) / rb)

        curve = build_fibering(system, pair)
        roots = find_roots(curve)
        if curve.Q > 0 and curve.R > 0:
            # with R = 0 (disjoint supports) only t_plus exists by design
            ch["roots_available"].record(1.0 if roots.both else -1.0)
        for branch, t in ((PLUS, roots.t_plus), (MINUS, roots.t_minus)):
            if t is None:
                continue
            z = pair.scaled(t)
            ez = energy(system, z)
            d1, d2, s1, s2 = nehari_measures(system, z)
            ch["no_degenerate_points"].record(abs(d2) / s2 - tol)
            ch["manifold_identity"].record(
                tol * max(1.0, ez.P) - abs(ez.P - ez.Q - ez.R))
            if branch == PLUS:
                ch["plus_Q_positive"].record(ez.Q / max(ez.P, 1e-300), ez.Q > 0)
                ch["plus_J_negative"].record(-ez.J / max(ez.P, 1e-300), ez.J < 0)
            else:
                ch["minus_R_positive"].record(ez.R / max(ez.P, 1e-300), ez.R > 0)
                ch["minus_J_positive"].record(ez.J / max(ez.P, 1e-300), ez.J > 0)
            nz = pair_norm(system, z)
            if nz > 1:
                bound = ((1 / pp - 1 / rm) * nz ** pm
                         - th.C1 * lm * (1 / qm - 1 / rm) * nz ** qp)
                ch["coercivity_bound"].record(
                    (ez.J - bound) / max(abs(ez.J), abs(bound)) + rel)
    return LemmaReport(ch, th, system.lam, system.mu)
