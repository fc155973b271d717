"""Command line driver.

Usage::

    fracnehari --config run.ini [--mode MODE] [--seed K] [--out DIR]
               [--dump-pairs] [--quiet]

Exit codes: 0 success, 1 a verification check failed, 2 usage or
configuration error, 3 violated hypothesis, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import MODES, RunConfig, parse_config
from .energy import DiscreteSystem, StatePair, discretize
from .errors import FracNehariError, HypothesisError, NumericalError, UsageError
from .exponents import check_assumptions
from .fibering import (MINUS, PLUS, build_fibering, fibering_table, find_roots)
from .grid import dump_pairs_csv
from .solver import (SolveOptions, compute_constants, minimize_on_branch,
                     random_pair, solve_two_solutions, verify_lemma_suite)
from .vx_space import estimate_embedding_constant

__all__ = ["main", "run", "fmt", "dump_json"]


def fmt(x) -> str:
    """17 significant digits; ``nan`` for missing values."""
    if x is None:
        return "nan"
    return format(float(x), ".17g")


def dump_json(obj, indent: int = 0) -> str:
    """JSON text with every float printed to 17 significant digits.

    Non-finite floats become ``null``.
    """
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Path):
        return dump_json(str(obj), indent)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{dump_json(str(k))}: {dump_json(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(dump_json(v, indent + 1) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([v if isinstance(v, (str, int, np.integer)) else fmt(v)
                         for v in row])


def _coord_names(N):
    return ["x"] if N == 1 else [f"x{k + 1}" for k in range(N)]


def _write_solution(path: Path, system: DiscreteSystem, pair: StatePair):
    x = system.grid.interior
    rows = [list(x[k]) + [pair.u[k], pair.v[k]] for k in range(x.shape[0])]
    _write_csv(path, _coord_names(system.grid.N) + ["u", "v"], rows)


class _Run:
    """Shared state of one invocation."""

    def __init__(self, config: RunConfig, quiet: bool):
        self.cfg = config
        self.quiet = quiet
        self.out = Path(config.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)

    def say(self, msg: str):
        if not self.quiet:
            print(msg)

    def prepare(self, n: int, lam_mu=None, require_assumptions=True):
        """Discretise, check hypotheses, compute thresholds and resolve
        (lambda, mu)."""
        cfg = self.cfg
        system = discretize(cfg.problem, n, cfg.collar_width)
        rep = check_assumptions(cfg.problem, system.grid, system.cache)
        if require_assumptions and not rep.all_passed:
            raise HypothesisError("hypotheses fail: " + ", ".join(
                f"{c.name} ({c.detail})" for c in rep.failed()))
        emb = estimate_embedding_constant(
            system.grid, system.cache, system.coupling,
            trials=cfg.solver.embedding_trials, seed=cfg.seed,
            pbar=cfg.problem.p(system.grid.interior))
        th = compute_constants(system, embedding=emb)
        if lam_mu is None:
            lam_mu = (cfg.lam.resolve(th.delta, th.delta0),
                      cfg.mu.resolve(th.delta, th.delta0))
        system = system.with_parameters(*lam_mu)
        th = compute_constants(system, embedding=emb)
        return system, th, rep

    def opts(self) -> SolveOptions:
        return self.cfg.solver


def _mode_solve(r: _Run) -> int:
    cfg = r.cfg
    system, th, _ = r.prepare(cfg.n)
    report = solve_two_solutions(system, r.opts(), th)
    summary = report.summary()
    summary["config"] = {"lambda_spec": str(cfg.lam), "mu_spec": str(cfg.mu),
                         "seed": cfg.seed}
    (r.out / "report.json").write_text(dump_json(summary) + "\n")
    for branch, pt in ((PLUS, report.plus_solution), (MINUS, report.minus_solution)):
        if pt is not None:
            _write_solution(r.out / f"{branch}.csv", system, pt.pair)
    lines = [f"lambda = {fmt(system.lam)}, mu = {fmt(system.mu)}",
             f"delta_hat = {fmt(th.delta)}, delta0_hat = {fmt(th.delta0)} (estimated)",
             f"theta_plus = {fmt(report.theta_plus)}",
             f"theta_minus = {fmt(report.theta_minus)}"]
    lines += [f"{'PASS' if ok else 'FAIL'} {name}" for name, ok in report.checks.items()]
    lines += [f"warning: {w}" for w in report.warnings]
    (r.out / "report.txt").write_text("\n".join(lines) + "\n")
    r.say("\n".join(lines))
    if report.failures:
        return NumericalError.exit_code
    return 0 if report.success else 1


def _mode_verify(r: _Run) -> int:
    cfg = r.cfg
    system, th, assumptions = r.prepare(cfg.n, require_assumptions=False)
    text = ["hypotheses:", assumptions.format()]
    if not assumptions.all_passed:
        (r.out / "verify.txt").write_text("\n".join(text) + "\n")
        r.say("\n".join(text))
        return HypothesisError.exit_code
    lemmas = verify_lemma_suite(system, cfg.samples, cfg.seed, th, tol=cfg.solver.tol_manifold)
    text += ["estimates:", lemmas.format()]
    data = {"lambda": system.lam, "mu": system.mu, "thresholds": th.as_dict(),
            "hypotheses": {c.name: c.passed for c in assumptions.checks},
            "checks": {c.name: {"passed": c.passed, "samples": c.samples,
                                "violations": c.violations,
                                "worst_slack": c.worst_slack}
                       for c in lemmas.checks.values()}}
    (r.out / "verify.json").write_text(dump_json(data) + "\n")
    (r.out / "verify.txt").write_text("\n".join(text) + "\n")
    r.say("\n".join(text))
    return 0 if lemmas.all_passed else 1


def _probe_directions(system, count, seed):
    rng = np.random.default_rng(seed)
    dirs = [StatePair(np.ones(system.m), np.ones(system.m))]
    dirs += [random_pair(system, rng) for _ in range(count - 1)]
    return dirs


def _sweep_cell(system, probes, opts):
    found = 0
    for d in probes:
        if find_roots(build_fibering(system, d, opts.bucket_width)).both:
            found += 1
    theta = {}
    for branch in (PLUS, MINUS):
        theta[branch] = None
        for d in probes:
            try:
                theta[branch] = minimize_on_branch(system, branch, d, opts).J_value
                break
            except NumericalError:
                continue
    return theta[PLUS], theta[MINUS], found


def _mode_sweep(r: _Run) -> int:
    cfg = r.cfg
    base, th, _ = r.prepare(cfg.n, lam_mu=(1.0, 1.0))
    k = cfg.sweep_size
    probes = _probe_directions(base, cfg.sweep_probes, cfg.seed)
    cells = [(i, j) for i in range(1, k + 1) for j in range(1, k + 1)]
    opts = r.opts()

    def work(ij):
        i, j = ij
        lam, mu = i * th.delta / k, j * th.delta / k
        return (lam, mu) + _sweep_cell(base.with_parameters(lam, mu), probes, opts)

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        rows = list(pool.map(work, cells))
    out_rows = [(lam, mu, tp, tm, found, th.delta) for lam, mu, tp, tm, found in rows]
    _write_csv(r.out / "sweep.csv",
               ["lambda", "mu", "theta_plus", "theta_minus", "roots_found", "delta_hat"],
               out_rows)
    below = [row for row in out_rows if row[0] + row[1] < th.delta0]
    ok = all(row[4] == len(probes) for row in below)
    r.say(f"sweep: {len(out_rows)} cells, delta_hat = {fmt(th.delta)}, "
          f"all probes two-rooted below delta0_hat: {ok}")
    return 0


def _mode_converge(r: _Run) -> int:
    cfg = r.cfg
    base, th, _ = r.prepare(cfg.n)
    lam_mu = (base.lam, base.mu)
    rows, minus = [], []
    failed = False
    for n in cfg.converge_n:
        system, th_n, _ = r.prepare(n, lam_mu=lam_mu)
        rep = solve_two_solutions(system, r.opts(), th_n)
        failed = failed or bool(rep.failures)
        minus.append(rep.theta_minus)
        gap = (abs(minus[-1] - minus[-2]) if len(minus) > 1
               and None not in minus[-2:] else None)
        rows.append((n, system.grid.h, rep.theta_plus, rep.theta_minus, gap))
        r.say(f"n = {n}: theta_plus = {fmt(rep.theta_plus)}, "
              f"theta_minus = {fmt(rep.theta_minus)}")
    _write_csv(r.out / "converge.csv",
               ["n", "h", "theta_plus", "theta_minus", "gap_minus"], rows)
    gaps = [row[4] for row in rows[1:]]
    shrinking = (None not in gaps
                 and all(gaps[k + 1] < gaps[k] for k in range(len(gaps) - 1)))
    (r.out / "converge.json").write_text(dump_json(
        {"lambda": lam_mu[0], "mu": lam_mu[1], "n_values": list(cfg.converge_n),
         "theta_minus": minus, "gaps": gaps, "gaps_shrinking": shrinking}) + "\n")
    if failed:
        return NumericalError.exit_code
    return 0 if shrinking else 1


def _direction(system, spec: str) -> StatePair:
    if spec == "constant":
        return StatePair(np.ones(system.m), np.ones(system.m))
    if spec == "bump":
        dom = system.grid.domain
        centre = 0.5 * (np.array(dom.lower) + np.array(dom.upper))
        r2 = np.sum((system.grid.interior - centre) ** 2, axis=1) / (0.5 * dom.side) ** 2
        u = np.clip(1.0 - r2, 0.0, None) ** 2
        return StatePair(u, u.copy())
    seed = int(spec.split(":", 1)[1])
    return random_pair(system, np.random.default_rng(seed))


def _mode_fibering(r: _Run) -> int:
    cfg = r.cfg
    system, th, _ = r.prepare(cfg.n)
    pair = _direction(system, cfg.direction)
    curve = build_fibering(system, pair, cfg.bucket_width)
    ts = np.geomspace(cfg.t_range[0], cfg.t_range[1], cfg.t_points)
    _write_csv(r.out / "fibering.csv", ["t", "phi", "dphi", "d2phi"],
               fibering_table(curve, ts))
    roots = find_roots(curve)
    info = {"direction": cfg.direction, "lambda": system.lam, "mu": system.mu,
            "t_plus": roots.t_plus, "t_minus": roots.t_minus,
            "t_star": roots.t_star, "t_max_f": roots.t_max_f,
            "regime": roots.regime, "buckets": curve.n_buckets,
            "bucket_width": curve.bucket_width}
    (r.out / "fibering.json").write_text(dump_json(info) + "\n")
    r.say(f"direction {cfg.direction}: regime {roots.regime}, "
          f"t_plus = {fmt(roots.t_plus)}, t_minus = {fmt(roots.t_minus)}")
    return 0


_HANDLERS = {"solve": _mode_solve, "verify": _mode_verify, "sweep": _mode_sweep,
             "converge": _mode_converge, "fibering-dump": _mode_fibering}


def run(config: RunConfig, quiet: bool = False) -> int:
    """Execute the configured mode, write its artifacts and return the exit code."""
    r = _Run(config, quiet)
    if config.dump_pairs:
        system = discretize(config.problem, config.n, config.collar_width)
        dump_pairs_csv(system.cache, r.out / "pairs.csv")
    return _HANDLERS[config.mode](r)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fracnehari",
        description="Two non-negative solutions of a fractional variable-exponent "
                    "concave-convex system by Nehari-set minimisation.")
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--mode", choices=MODES, help="override the configured mode")
    ap.add_argument("--seed", type=int, help="override the solver seed")
    ap.add_argument("--out", help="override the output directory")
    ap.add_argument("--dump-pairs", action="store_true",
                    help="also write the pair kernel cache as pairs.csv")
    ap.add_argument("--quiet", action="store_true", help="no console summary")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.mode:
            cfg.mode = args.mode
        if args.seed is not None:
            if args.seed < 0:
                raise UsageError("--seed must be non-negative")
            cfg.solver = dataclasses.replace(cfg.solver, seed=args.seed)
        if args.out:
            cfg.out_dir = Path(args.out)
        if args.dump_pairs:
            cfg.dump_pairs = True
        return run(cfg, quiet=args.quiet)
    except FracNehariError as exc:
        print(f"fracnehari: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
