"""End-to-end acceptance criteria A1 to A10.

Each test records one PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria".
"""
import csv
import json
import math
import time

import numpy as np
import pytest
from conftest import record_acceptance

from fracnehari import (FiberingCurve, LebesgueModular, StatePair, X0Modular,
                        build_fibering, check_norm_modular_relations,
                        compute_constants, desk_instance, discretize, energy,
                        energy_gradient, find_roots, variable_instance)
from fracnehari.cli import main
from fracnehari.energy import pair_norm
from fracnehari.fibering import nehari_measures
from fracnehari.solver import random_pair

DESK_CONFIG = """\
[problem]
N = 1
s = 0.4
domain = 0, 1
p = 2.0
q = 1.5
alpha = 1.5
beta = 1.5
a = 1.0
b = 1.0
c = 1.0
lambda = 0.25*delta0
mu = 0.25*delta0

[discretization]
n = 32

[converge]
n_values = 16, 32, 64
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("acceptance")
    (d / "desk.ini").write_text(DESK_CONFIG)
    return d


def cli(workdir, mode, out):
    return main(["--config", str(workdir / "desk.ini"), "--mode", mode,
                 "--out", str(workdir / out), "--quiet"])


def signed_direction(system, rng):
    pair = random_pair(system, rng)
    u, v = pair.u, pair.v
    if rng.random() < 0.5:
        u = u + 0.3 * rng.standard_normal(u.size) * u.max()
        v = v + 0.3 * rng.standard_normal(v.size) * v.max()
    return StatePair(u, v)


def at_quarter_delta0(data, n, trials=64):
    system = discretize(data, n)
    th = compute_constants(system, trials=trials)
    lam = th.delta0 / 4
    system = system.with_parameters(lam, lam)
    return system, compute_constants(system, embedding=th.embedding)


# -- A1 ----------------------------------------------------------------------------------

def test_A1_two_solutions(workdir):
    start = time.perf_counter()
    code = cli(workdir, "solve", "run1")
    elapsed = time.perf_counter() - start
    rep = json.loads((workdir / "run1" / "report.json").read_text())
    plus, minus = rep["plus"], rep["minus"]
    sol = {}
    for name in ("plus", "minus"):
        with open(workdir / "run1" / f"{name}.csv") as fh:
            rows = np.array([[float(x) for x in r] for r in list(csv.reader(fh))[1:]])
        sol[name] = rows
    h = 1.0 / 32
    u, v = sol["minus"][:, 1], sol["minus"][:, 2]
    nonneg = all(np.all(sol[k][:, 1:] >= 0) for k in sol)
    ok = (code == 0 and rep["theta_plus"] < 0 < rep["theta_minus"]
          and math.sqrt(h * np.sum(u ** 2)) > 1e-6
          and math.sqrt(h * np.sum(v ** 2)) > 1e-6
          and nonneg
          and plus["gradient_residual"] <= 1e-6
          and minus["gradient_residual"] <= 1e-6
          and rep["checks"]["minus_not_semi_trivial"]
          and elapsed <= 60.0)
    record_acceptance("A1", ok, f"theta+ = {rep['theta_plus']:.6g}, "
                      f"theta- = {rep['theta_minus']:.6g}, residuals "
                      f"{plus['gradient_residual']:.2e}/{minus['gradient_residual']:.2e}, "
                      f"{elapsed:.1f} s")
    assert ok


# -- A2 ----------------------------------------------------------------------------------

def _bisect(f, lo, hi, width=1e-12):
    flo = f(lo)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == (flo > 0):
            lo, flo = mid, f(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_A2_fibering_roots():
    curve = FiberingCurve.from_coefficients([(2.0, 1.0)], [(1.5, 0.1)], [(3.0, 1.0)])
    r = find_roots(curve)
    dphi = lambda t: t - 0.1 * math.sqrt(t) - t * t
    tp, tm = _bisect(dphi, 1e-3, 0.25), _bisect(dphi, 0.25, 2.0)
    ok = (r.both and abs(r.t_plus - tp) <= 1e-9 and abs(r.t_minus - tm) <= 1e-9
          and r.second_plus > 0 > r.second_minus)
    record_acceptance("A2", ok, f"t+ = {r.t_plus:.15g} (oracle {tp:.15g}), "
                      f"t- = {r.t_minus:.15g} (oracle {tm:.15g})")
    assert ok


# -- A3 ----------------------------------------------------------------------------------

def test_A3_norm_modular_relations():
    system = discretize(variable_instance(0.01), 32)
    rng = np.random.default_rng(2024)
    modulars = {"L^(2+x)": LebesgueModular(system.grid, 2.0 + system.grid.interior[:, 0]),
                "X0 variable p": X0Modular(system.cache)}
    bad = {k: 0 for k in modulars}
    for _ in range(200):
        u = 10 ** rng.uniform(-3, 3) * rng.standard_normal(system.m)
        for k, m in modulars.items():
            if not check_norm_modular_relations(m, u, tol=1e-9).ok:
                bad[k] += 1
    ok = sum(bad.values()) == 0
    record_acceptance("A3", ok, "violations over 200 functions: "
                      + ", ".join(f"{k}: {v}" for k, v in bad.items()))
    assert ok


# -- A4 ----------------------------------------------------------------------------------

def test_A4_gradient_exactness():
    worst_fd = worst_pair = 0.0
    for data in (desk_instance(0.05), variable_instance(0.05)):
        system = discretize(data, 16)
        rng = np.random.default_rng(7)
        for _ in range(50):
            u, v = rng.standard_normal(system.m), rng.standard_normal(system.m)
            phi, psi = rng.standard_normal(system.m), rng.standard_normal(system.m)
            pair = StatePair(u, v)
            gu, gv = energy_gradient(system, pair)
            h = 1e-6
            fd = (energy(system, StatePair(u + h * phi, v + h * psi)).J
                  - energy(system, StatePair(u - h * phi, v - h * psi)).J) / (2 * h)
            dd = float(gu @ phi + gv @ psi)
            worst_fd = max(worst_fd, abs(dd - fd) / abs(fd))
            slope = float(build_fibering(system, pair, 0.0).evaluate(1.0, 1))
            pairing = float(gu @ u + gv @ v)
            worst_pair = max(worst_pair, abs(pairing - slope) / abs(slope))
    ok = worst_fd <= 1e-5 and worst_pair <= 1e-10
    record_acceptance("A4", ok, f"worst finite-difference error {worst_fd:.2e}, "
                      f"worst pairing error {worst_pair:.2e}")
    assert ok


# -- A5 ----------------------------------------------------------------------------------

def test_A5_estimates():
    counts = {}
    for label, data in (("desk", desk_instance(1.0)), ("variable", variable_instance(1.0))):
        system, th = at_quarter_delta0(data, 32)
        e = th.exponents
        lm = system.lam + system.mu
        rng = np.random.default_rng(5)
        viol = [0, 0, 0]
        for _ in range(200):
            pair = signed_direction(system, rng).scaled(10 ** rng.uniform(-3, 3))
            en = energy(system, pair)
            nrm = pair_norm(system, pair)
            lo_e, hi_e = (e["p-"], e["p+"]) if nrm >= 1 else (e["p+"], e["p-"])
            rel = 1e-9
            if not nrm ** lo_e * (1 - rel) <= en.P <= 2 * nrm ** hi_e * (1 + rel):
                viol[0] += 1
            if en.Q > th.C1 * lm * max(nrm ** e["q-"], nrm ** e["q+"]) * (1 + rel):
                viol[1] += 1
            if en.R > th.C2 * max(nrm ** e["ab-"], nrm ** e["ab+"]) * (1 + rel):
                viol[2] += 1
        counts[label] = viol
    ok = all(sum(v) == 0 for v in counts.values())
    record_acceptance("A5", ok, "violations (P sandwich, Q bound, R bound): "
                      + ", ".join(f"{k} {v}" for k, v in counts.items()))
    assert ok


# -- A6, A7, A8 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def projected_samples():
    system, _ = at_quarter_delta0(desk_instance(1.0), 32)
    rng = np.random.default_rng(11)
    out = {"plus": [], "minus": [], "missing": 0}
    for _ in range(200):
        pair = signed_direction(system, rng)
        curve = build_fibering(system, pair)
        roots = find_roots(curve)
        if curve.Q > 0 and curve.R > 0 and not roots.both:
            out["missing"] += 1
        for branch, t in (("plus", roots.t_plus), ("minus", roots.t_minus)):
            if t is None:
                continue
            z = pair.scaled(t)
            en = energy(system, z)
            d1, d2, s1, s2 = nehari_measures(system, z)
            out[branch].append({"P": en.P, "Q": en.Q, "R": en.R, "J": en.J,
                                "d2": d2, "s2": s2})
    return out


def test_A6_no_degenerate_points(projected_samples):
    pts = projected_samples["plus"] + projected_samples["minus"]
    worst = min(abs(p["d2"]) / p["s2"] for p in pts)
    ok = worst > 1e-8 and projected_samples["missing"] == 0
    record_acceptance("A6", ok, f"{len(pts)} projected points, smallest "
                      f"|phi''(1)|/scale = {worst:.3e}, directions without both "
                      f"roots: {projected_samples['missing']}")
    assert ok


def test_A7_sign_lemmas(projected_samples):
    plus, minus = projected_samples["plus"], projected_samples["minus"]
    vp = sum(1 for p in plus if not (p["Q"] > 0 and p["J"] < 0))
    vm = sum(1 for p in minus if not (p["R"] > 0 and p["J"] > 0))
    ok = vp == 0 and vm == 0 and len(plus) >= 200 and len(minus) > 0
    record_acceptance("A7", ok, f"plus points {len(plus)} ({vp} violations), "
                      f"minus points {len(minus)} ({vm} violations)")
    assert ok


def test_A8_manifold_identity(projected_samples):
    pts = projected_samples["plus"] + projected_samples["minus"]
    ratios = [abs(p["P"] - p["Q"] - p["R"]) / max(1.0, p["P"]) for p in pts]
    ok = max(ratios) <= 1e-8
    record_acceptance("A8", ok, f"{len(pts)} points, worst |P-Q-R|/max(1,P) = {max(ratios):.2e}")
    assert ok


# -- A9 ----------------------------------------------------------------------------------

def test_A9_refinement(workdir):
    code = cli(workdir, "converge", "converge")
    with open(workdir / "converge" / "converge.csv") as fh:
        rows = list(csv.DictReader(fh))
    theta = [float(r["theta_minus"]) for r in rows]
    gaps = [abs(b - a) for a, b in zip(theta, theta[1:])]
    ratio = gaps[0] / gaps[1]
    monotone = all(np.diff(theta) > 0) or all(np.diff(theta) < 0)
    ok = code == 0 and ratio >= 1.5 and monotone
    record_acceptance("A9", ok, "theta- at n = 16, 32, 64: "
                      + ", ".join(f"{t:.6g}" for t in theta)
                      + f"; gaps {gaps[0]:.4g}, {gaps[1]:.4g}, ratio {ratio:.3f}")
    assert ok


# -- A10 ---------------------------------------------------------------------------------

def test_A10_determinism(workdir):
    if not (workdir / "run1" / "plus.csv").exists():
        assert cli(workdir, "solve", "run1") == 0
    assert cli(workdir, "solve", "run2") == 0
    same = all((workdir / "run1" / f).read_bytes() == (workdir / "run2" / f).read_bytes()
               for f in ("plus.csv", "minus.csv"))
    record_acceptance("A10", same, "plus.csv and minus.csv byte-identical across two runs"
                      if same else "CSV outputs differ between runs")
    assert same
