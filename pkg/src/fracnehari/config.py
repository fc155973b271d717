"""Run configuration files.

The format is INI-style (parsed with :mod:`configparser`), with ``#``
comments.  Sections and keys::

    [run]
    mode = solve            # solve | verify | sweep | converge | fibering-dump

    [problem]
    N = 1
    s = 0.4
    domain = 0, 1           # the cube [0, 1]^N
    p = 2.0                 # constant, profile or table; see below
    q = 1.5
    alpha = 1.5
    beta = 1.5
    a = 1.0
    b = 1.0
    c = 1.0
    lambda = 0.25*delta0    # number, or a multiple of delta or delta0
    mu = 0.25*delta0

    [discretization]
    n = 64
    collar_width = 1.0
    bucket_width = auto     # auto | 0 (exact) | positive width

    [solver]
    tol_grad = 1e-6
    tol_manifold = 1e-8
    max_iter = 2000
    multistart = 8
    multistart_iter = 150
    seed = 0
    embedding_trials = 64
    samples = 200           # verify mode
    workers = 4             # sweep mode

    [output]
    dir = out
    dump_pairs = false

    [sweep]
    size = 8
    probes = 8

    [converge]
    n_values = 16, 32, 64, 128

    [fibering]
    direction = constant    # constant | bump | random:<seed>
    t_min = 1e-3
    t_max = 1e2
    points = 200

Field values are a number, a profile call such as
``sin-bump(base=2, amplitude=0.05, frequency=1)`` (profiles: sin-bump,
cos-bump, linear) or ``table(path=file.csv, column=name)``.  Tables are CSV
files with coordinate columns ``x`` (or ``x1 .. xN``) and the named value
column; relative paths are resolved against the config file.  A point
profile or table given for ``p`` is turned into the pair exponent
``(g(x) + g(y)) / 2``.
"""
from __future__ import annotations

import configparser
import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, HypothesisError, UsageError
from .exponents import (PROFILES, Box, ExponentField, Field, ProblemData,
                        WeightField, averaged_pair)
from .solver import SolveOptions

__all__ = ["RunConfig", "ParameterSpec", "parse_config", "parse_field", "MODES"]

MODES = ("solve", "verify", "sweep", "converge", "fibering-dump")

_SCHEMA = {
    "run": {"mode": "solve"},
    "problem": {"N": "1", "s": None, "domain": "0, 1", "p": None, "q": None,
                "alpha": None, "beta": None, "a": None, "b": None, "c": None,
                "lambda": None, "mu": None},
    "discretization": {"n": "64", "collar_width": "1.0", "bucket_width": "auto"},
    "solver": {"tol_grad": "1e-6", "tol_manifold": "1e-8", "max_iter": "2000",
               "multistart": "8", "multistart_iter": "150", "seed": "0",
               "embedding_trials": "64", "samples": "200", "workers": "4"},
    "output": {"dir": "out", "dump_pairs": "false"},
    "sweep": {"size": "8", "probes": "8"},
    "converge": {"n_values": "16, 32, 64, 128"},
    "fibering": {"direction": "constant", "t_min": "1e-3", "t_max": "1e2",
                 "points": "200"},
}

_CALL = re.compile(r"^([A-Za-z][\w-]*)\s*\((.*)\)$")
_MULTIPLE = re.compile(r"^([-+0-9.eE]+)\s*\*\s*(delta0|delta)$")


@dataclass(frozen=True)
class ParameterSpec:
    """A parameter given as a number or as a multiple of a threshold."""

    value: float
    relative_to: Optional[str] = None   # None, 'delta' or 'delta0'

    def resolve(self, delta: float, delta0: float) -> float:
        if self.relative_to is None:
            return self.value
        return self.value * (delta if self.relative_to == "delta" else delta0)

    def __str__(self):
        if self.relative_to is None:
            return repr(self.value)
        return f"{self.value!r}*{self.relative_to}"


@dataclass
class RunConfig:
    mode: str
    problem: ProblemData
    lam: ParameterSpec
    mu: ParameterSpec
    n: int = 64
    collar_width: float = 1.0
    bucket_width: Optional[float] = None
    solver: SolveOptions = field(default_factory=SolveOptions)
    samples: int = 200
    workers: int = 4
    out_dir: Path = Path("out")
    dump_pairs: bool = False
    sweep_size: int = 8
    sweep_probes: int = 8
    converge_n: tuple = (16, 32, 64, 128)
    direction: str = "constant"
    t_range: tuple = (1e-3, 1e2)
    t_points: int = 200
    path: Optional[Path] = None

    @property
    def seed(self) -> int:
        return self.solver.seed


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` to its line number by scanning the raw text."""
    out, section = {}, None
    for k, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = k
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            out[(section, m.group(1).strip())] = k
    return out


def _split_args(text: str) -> dict:
    args = {}
    if not text.strip():
        return args
    for part in text.split(","):
        if "=" not in part:
            raise UsageError(f"argument {part.strip()!r} is not key=value")
        k, v = part.split("=", 1)
        args[k.strip()] = v.strip()
    return args


def _read_table(path: Path, column: str, dim: int):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read table {path}: {exc}") from None
    if not rows:
        raise UsageError(f"table {path} is empty")
    cols = ["x"] if dim == 1 and "x" in rows[0] else [f"x{k + 1}" for k in range(dim)]
    missing = [c for c in cols + [column] if c not in rows[0]]
    if missing:
        raise UsageError(f"table {path} lacks columns {missing}")
    try:
        nodes = np.array([[float(r[c]) for c in cols] for r in rows])
        values = np.array([float(r[column]) for r in rows])
    except ValueError as exc:
        raise UsageError(f"table {path}: {exc}") from None
    return nodes, values


def parse_field(text: str, name: str, kind: type = ExponentField, dim: int = 1,
                base_dir: Optional[Path] = None) -> Field:
    """Field from a config value: number, profile call or table reference."""
    text = text.strip()
    try:
        return kind.constant(float(text), name=name)
    except ValueError:
        pass
    m = _CALL.match(text)
    if not m:
        raise UsageError(f"cannot parse field {name} = {text!r}")
    fn, args = m.group(1), _split_args(m.group(2))
    if fn == "table":
        if set(args) != {"path", "column"}:
            raise UsageError("table() takes exactly path= and column=")
        path = Path(args["path"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        nodes, values = _read_table(path, args["column"], dim)
        return kind.tabulated(nodes, values, name=name)
    if fn not in PROFILES:
        raise UsageError(f"unknown profile {fn!r}; known: {sorted(PROFILES)} and table")
    try:
        params = {k: float(v) for k, v in args.items()}
        return kind.profile(fn, name=name, **params)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad arguments for {fn}: {exc}") from None


def _parameter(text: str) -> ParameterSpec:
    text = text.strip()
    m = _MULTIPLE.match(text)
    if m:
        spec = ParameterSpec(float(m.group(1)), m.group(2))
    else:
        spec = ParameterSpec(float(text))
    if not spec.value > 0:
        raise HypothesisError(f"parameter must be positive, got {text}")
    return spec


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(path) -> RunConfig:
    """Read, validate and default-fill a run configuration.

    Raises
    ------
    ConfigError
        Missing file, malformed syntax, unknown section or key, missing or
        invalid value; the message carries the line number when known.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config file not found", path=path)
    text = path.read_text()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                   comment_prefixes=("#",), empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno, path) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, path) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", exc.lineno, path) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"malformed line {line.strip()!r}", lineno, path) from None
    lines = _key_lines(text)

    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)), path)
        for key in cp[sec]:
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]",
                                  lines.get((sec, key)), path)

    def get(sec, key):
        if cp.has_option(sec, key):
            return cp.get(sec, key).strip(), lines.get((sec, key))
        default = _SCHEMA[sec][key]
        if default is None:
            raise ConfigError(f"missing required key {key!r} in [{sec}]",
                              lines.get((sec, None)), path)
        return default, None

    def conv(sec, key, fn, check=None, what=""):
        raw, line = get(sec, key)
        try:
            val = fn(raw)
        except HypothesisError as exc:
            raise type(exc)(f"{path}:{line}: {exc}" if line else str(exc)) from None
        except (ValueError, UsageError) as exc:
            raise ConfigError(f"invalid value for {key}: {raw!r} ({exc})", line, path) from None
        if check is not None and not check(val):
            raise ConfigError(f"{key} must be {what}, got {raw!r}", line, path)
        return val

    pos = lambda v: v > 0
    mode = conv("run", "mode", str, lambda m: m in MODES, "one of " + ", ".join(MODES))
    N = conv("problem", "N", int, lambda v: v in (1, 2, 3), "1, 2 or 3")
    s = conv("problem", "s", float, lambda v: 0 < v < 1, "in (0, 1)")

    def domain(raw):
        parts = [float(x) for x in raw.replace(" ", "").split(",") if x]
        if len(parts) != 2 or not parts[0] < parts[1]:
            raise ValueError("expected 'lower, upper' with lower < upper")
        return Box((parts[0],) * N, (parts[1],) * N)

    dom = conv("problem", "domain", domain)
    base = path.parent
    fields = {}
    for key, kind in (("p", ExponentField), ("q", ExponentField),
                      ("alpha", ExponentField), ("beta", ExponentField),
                      ("a", WeightField), ("b", WeightField), ("c", WeightField)):
        fields[key] = conv("problem", key,
                           lambda raw, key=key, kind=kind: parse_field(raw, key, kind, N, base))
    p = fields["p"]
    if p.kind in ("point", "table"):
        p = averaged_pair(p)
    lam = conv("problem", "lambda", _parameter)
    mu = conv("problem", "mu", _parameter)
    problem = ProblemData(N=N, s=s, p=p, q=fields["q"], alpha=fields["alpha"],
                          beta=fields["beta"], a=fields["a"], b=fields["b"],
                          c=fields["c"], lam=lam.resolve(1.0, 1.0),
                          mu=mu.resolve(1.0, 1.0), domain=dom)

    n = conv("discretization", "n", int, lambda v: v >= 4, "an integer >= 4")
    W = conv("discretization", "collar_width", float, pos, "positive")

    def bucket(raw):
        return None if raw.lower() == "auto" else float(raw)

    bw = conv("discretization", "bucket_width", bucket,
              lambda v: v is None or v >= 0, "auto or >= 0")
    opts = SolveOptions(
        tol_grad=conv("solver", "tol_grad", float, pos, "positive"),
        tol_manifold=conv("solver", "tol_manifold", float, pos, "positive"),
        max_iter=conv("solver", "max_iter", int, pos, "positive"),
        multistart=conv("solver", "multistart", int, lambda v: v >= 0, ">= 0"),
        multistart_iter=conv("solver", "multistart_iter", int, pos, "positive"),
        seed=conv("solver", "seed", int, lambda v: v >= 0, ">= 0"),
        embedding_trials=conv("solver", "embedding_trials", int, pos, "positive"),
        bucket_width=bw)

    def int_list(raw):
        vals = tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
        if not vals:
            raise ValueError("empty list")
        return vals

    def direction(raw):
        if raw in ("constant", "bump") or re.fullmatch(r"random:\d+", raw):
            return raw
        raise ValueError("expected constant, bump or random:<seed>")

    t_min = conv("fibering", "t_min", float, pos, "positive")
    t_max = conv("fibering", "t_max", float, lambda v: v > t_min, "above t_min")
    return RunConfig(
        mode=mode, problem=problem, lam=lam, mu=mu, n=n, collar_width=W,
        bucket_width=bw, solver=opts,
        samples=conv("solver", "samples", int, pos, "positive"),
        workers=conv("solver", "workers", int, pos, "positive"),
        out_dir=Path(conv("output", "dir", str, bool, "non-empty")),
        dump_pairs=conv("output", "dump_pairs", _bool),
        sweep_size=conv("sweep", "size", int, pos, "positive"),
        sweep_probes=conv("sweep", "probes", int, pos, "positive"),
        converge_n=conv("converge", "n_values", int_list,
                        lambda v: all(k >= 4 for k in v), "integers >= 4"),
        direction=conv("fibering", "direction", direction),
        t_range=(t_min, t_max),
        t_points=conv("fibering", "points", int, lambda v: v >= 2, ">= 2"),
        path=path)
