"""
Run configuration, checkpoints, trajectories and CSV tables.

Configuration files are INI documents read with :mod:`configparser`.  Every
section and key is optional except ``[domain] N``; unknown sections or keys
are rejected with the line they appear on.  See the README for the schema.

A trajectory file is a sequence of checkpoint records.  Each record is a
fixed little-endian header followed by the N*N coefficients in row-major
mode order as float64::

    magic   8s   b"SQGC0001"
    version u32  1
    N       u32
    G       u32
    quad    u32  0 = trapezoid, 1 = midpoint
    t       f64
    mu      f64
"""

from __future__ import annotations

import configparser
import csv
import math
import os
import re
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .estimates import EnsembleSpec, Profile, VerificationReport
from .evolution import SolverConfig, Stepper, Trajectory
from .nonlinear import Dealias
from .spectral import DomainSpec, Quadrature, dealias_size

MAGIC = b"SQGC0001"
VERSION = 1
HEADER = struct.Struct("<8sIIIIdd")
_QUAD_CODES = {Quadrature.TRAPEZOID: 0, Quadrature.MIDPOINT: 1}
OUTPUT_ENV = "SQGBESOV_OUTPUT"


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


class CheckpointError(ValueError):
    pass


# -- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "random"  # random | mode | file
    m: int = 1
    n: int = 1
    amplitude: float = 1.0
    profile: Profile = Profile.DECAY
    r: float = 4.0
    besov_norm: float | None = 1.0
    path: str | None = None


@dataclass(frozen=True)
class VerifyConfig:
    gammas: tuple[float, ...] = (0.05, 0.25, 0.45)
    mus: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4)
    growth_slack: float = 1.5
    mu_slack: float = 2.0
    scaling_slack: float = 0.1


@dataclass(frozen=True)
class GronwallConfig:
    perturbation: float = 1e-6
    resolutions: tuple[int, ...] = (32, 48)


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec
    solver: SolverConfig
    mus: tuple[float, ...] = (0.0,)
    dealias: Dealias = Dealias.THREE_HALVES
    experiment_id: str = "run"
    seed: int = 0
    output_dir: Path | None = None
    initial: InitialCondition = field(default_factory=InitialCondition)
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    gronwall: GronwallConfig = field(default_factory=GronwallConfig)
    c_T: float = 0.1

    @property
    def mu(self) -> float:
        return self.mus[0]

    def run_dir(self) -> Path:
        root = self.output_dir
        if root is None:
            root = Path(os.environ.get(OUTPUT_ENV, "runs"))
        return Path(root) / self.experiment_id


def _tuple(conv):
    def parse(s: str):
        items = [x.strip() for x in s.split(",") if x.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(conv(x) for x in items)
    return parse


def _bool_none_float(s: str):
    return None if s.strip().lower() in ("none", "") else float(s)


def _int(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(v)


# section -> key -> parser; parsers raise ValueError on bad text
SCHEMA: dict[str, dict[str, Any]] = {
    "domain": {"N": _int, "G": _int, "quadrature": str},
    "solver": {"T": float, "dt": float, "window": float, "picard_tol": float,
               "picard_max_iter": _int, "stepper": str, "grad_ceiling": float, "c_T": float},
    "nonlinearity": {"mu": _tuple(float), "dealias": str},
    "experiment": {"id": str, "seed": _int, "output_dir": str},
    "initial": {"kind": str, "m": _int, "n": _int, "amplitude": float, "profile": str,
                "r": float, "besov_norm": _bool_none_float, "path": str},
    "ensemble": {"count": _int, "profile": str, "r": float, "resolutions": _tuple(_int)},
    "verify": {"gammas": _tuple(float), "mus": _tuple(float), "growth_slack": float,
               "mu_slack": float, "scaling_slack": float},
    "gronwall": {"perturbation": float, "resolutions": _tuple(_int)},
}


def _locate(text: str) -> dict[tuple[str, str], int]:
    """Line numbers of every key, by section."""
    where: dict[tuple[str, str], int] = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            where[(section, "")] = i
            continue
        if section is not None and ("=" in line or ":" in line):
            key = re.split(r"[=:]", line, 1)[0].strip()
            where.setdefault((section, key), i)
    return where


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str  # keys are case sensitive
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"cannot parse {source}: expected a [section] header", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"cannot parse {source}: expected 'key = value'", line=line) from None
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"cannot parse {source}: {exc.message}", line=line) from None
    lines = _locate(text)
    raw: dict[str, dict[str, Any]] = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", field=sec, line=lines.get((sec, "")))
        raw[sec] = {}
        for key, value in cp.items(sec):
            name = f"{sec}.{key}"
            if key not in SCHEMA[sec]:
                raise ConfigError("unknown key", field=name, line=lines.get((sec, key)))
            try:
                raw[sec][key] = SCHEMA[sec][key](value)
            except ValueError as exc:
                raise ConfigError(f"bad value {value!r} ({exc})", field=name, line=lines.get((sec, key))) from None
    return build_config(raw)


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def _get(raw, sec, key, default=None):
    return raw.get(sec, {}).get(key, default)


def _check(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(message, field=name)


def build_config(raw: dict[str, dict[str, Any]]) -> RunConfig:
    """Validate a nested ``{section: {key: value}}`` mapping into a RunConfig."""
    N = _get(raw, "domain", "N")
    _check(N is not None, "domain.N", "required")
    _check(N >= 1, "domain.N", f"must be >= 1, got {N}")
    try:
        quad = Quadrature(_get(raw, "domain", "quadrature", "trapezoid"))
    except ValueError:
        raise ConfigError("must be 'trapezoid' or 'midpoint'", field="domain.quadrature") from None
    G = _get(raw, "domain", "G", dealias_size(N, quad))
    _check(G >= N, "domain.G", f"must be >= N ({N}), got {G}")
    _check(quad is not Quadrature.MIDPOINT or G > N, "domain.G", "midpoint quadrature needs G > N")
    domain = DomainSpec(N, G, quad)

    s = raw.get("solver", {})
    T = s.get("T", 0.1)
    dt = s.get("dt", 1e-3)
    _check(T > 0, "solver.T", f"must be positive, got {T}")
    _check(dt > 0, "solver.dt", f"must be positive, got {dt}")
    window = s.get("window", T)
    _check(window > 0, "solver.window", f"must be positive, got {window}")
    _check(dt <= window, "solver.dt", f"must not exceed window ({window}), got {dt}")
    _check(window <= T, "solver.window", f"must not exceed T ({T}), got {window}")
    n = T / dt
    _check(abs(n - round(n)) <= 1e-9 * n, "solver.dt", f"T ({T}) must be an integer multiple of dt ({dt})")
    tol = s.get("picard_tol", 1e-12)
    _check(tol > 0, "solver.picard_tol", f"must be positive, got {tol}")
    iters = s.get("picard_max_iter", 200)
    _check(iters >= 1, "solver.picard_max_iter", f"must be >= 1, got {iters}")
    ceiling = s.get("grad_ceiling", 1e6)
    _check(ceiling > 0, "solver.grad_ceiling", f"must be positive, got {ceiling}")
    try:
        stepper = Stepper(s.get("stepper", "picard"))
    except ValueError:
        raise ConfigError("must be 'picard' or 'explicit_rk4'", field="solver.stepper") from None
    c_T = s.get("c_T", 0.1)
    _check(c_T > 0, "solver.c_T", f"must be positive, got {c_T}")
    solver = SolverConfig(T, dt, window, tol, iters, stepper, ceiling)

    mus = _get(raw, "nonlinearity", "mu", (0.0,))
    _check(all(m >= 0 and math.isfinite(m) for m in mus), "nonlinearity.mu", f"must be finite and >= 0, got {mus}")
    try:
        dealias = Dealias(_get(raw, "nonlinearity", "dealias", "three_halves_rule"))
    except ValueError:
        raise ConfigError("must be 'three_halves_rule' or 'none'", field="nonlinearity.dealias") from None

    e = raw.get("experiment", {})
    exp_id = e.get("id", "run")
    _check(bool(re.fullmatch(r"[A-Za-z0-9_.-]+", exp_id)), "experiment.id",
           f"must be a plain file name, got {exp_id!r}")
    seed = e.get("seed", 0)
    _check(seed >= 0, "experiment.seed", f"must be >= 0, got {seed}")
    out = e.get("output_dir")

    i = raw.get("initial", {})
    kind = i.get("kind", "random")
    _check(kind in ("random", "mode", "file"), "initial.kind", f"must be random, mode or file, got {kind!r}")
    try:
        iprof = Profile(i.get("profile", "decay"))
    except ValueError:
        raise ConfigError("must be 'flat' or 'decay'", field="initial.profile") from None
    im, inn = i.get("m", 1), i.get("n", 1)
    _check(1 <= im <= N, "initial.m", f"must lie in 1..N, got {im}")
    _check(1 <= inn <= N, "initial.n", f"must lie in 1..N, got {inn}")
    target = i.get("besov_norm", 1.0)
    _check(target is None or target > 0, "initial.besov_norm", f"must be positive, got {target}")
    _check(kind != "file" or "path" in i, "initial.path", "required when kind = file")
    initial = InitialCondition(kind, im, inn, i.get("amplitude", 1.0), iprof, i.get("r", 4.0), target, i.get("path"))

    en = raw.get("ensemble", {})
    count = en.get("count", 100)
    _check(count >= 1, "ensemble.count", f"must be >= 1, got {count}")
    res = en.get("resolutions", (32, 48, 64))
    _check(all(n >= 1 for n in res), "ensemble.resolutions", f"must be positive, got {res}")
    try:
        eprof = Profile(en.get("profile", "decay"))
    except ValueError:
        raise ConfigError("must be 'flat' or 'decay'", field="ensemble.profile") from None
    ensemble = EnsembleSpec(count, eprof, en.get("r", 4.0), seed, res)

    v = raw.get("verify", {})
    gammas = v.get("gammas", VerifyConfig.gammas)
    _check(all(0 < g < 0.5 for g in gammas), "verify.gammas", f"must lie in (0, 1/2), got {gammas}")
    vmus = v.get("mus", VerifyConfig.mus)
    _check(all(m > 0 for m in vmus), "verify.mus", f"must be positive, got {vmus}")
    for key in ("growth_slack", "mu_slack", "scaling_slack"):
        val = v.get(key, getattr(VerifyConfig, key))
        _check(val > 0, f"verify.{key}", f"must be positive, got {val}")
    verify = VerifyConfig(gammas, vmus, v.get("growth_slack", 1.5), v.get("mu_slack", 2.0),
                          v.get("scaling_slack", 0.1))

    g = raw.get("gronwall", {})
    pert = g.get("perturbation", 1e-6)
    _check(pert > 0, "gronwall.perturbation", f"must be positive, got {pert}")
    gres = g.get("resolutions", (32, 48))
    _check(all(n >= 1 for n in gres), "gronwall.resolutions", f"must be positive, got {gres}")

    return RunConfig(domain, solver, mus, dealias, exp_id, seed, Path(out) if out else None,
                     initial, ensemble, verify, GronwallConfig(pert, gres), c_T)


def config_to_raw(cfg: RunConfig) -> dict[str, dict[str, Any]]:
    """Inverse of :func:`build_config` up to defaults."""
    s = cfg.solver
    raw = {
        "domain": {"N": cfg.domain.N, "G": cfg.domain.G, "quadrature": cfg.domain.quadrature.value},
        "solver": {"T": s.T, "dt": s.dt, "window": s.window, "picard_tol": s.picard_tol,
                   "picard_max_iter": s.picard_max_iter, "stepper": s.stepper.value,
                   "grad_ceiling": s.grad_ceiling, "c_T": cfg.c_T},
        "nonlinearity": {"mu": cfg.mus, "dealias": cfg.dealias.value},
        "experiment": {"id": cfg.experiment_id, "seed": cfg.seed},
        "initial": {"kind": cfg.initial.kind, "m": cfg.initial.m, "n": cfg.initial.n,
                    "amplitude": cfg.initial.amplitude, "profile": cfg.initial.profile.value,
                    "r": cfg.initial.r, "besov_norm": cfg.initial.besov_norm},
        "ensemble": {"count": cfg.ensemble.count, "profile": cfg.ensemble.profile.value,
                     "r": cfg.ensemble.r, "resolutions": cfg.ensemble.resolutions},
        "verify": {f.name: getattr(cfg.verify, f.name) for f in fields(VerifyConfig)},
        "gronwall": {"perturbation": cfg.gronwall.perturbation, "resolutions": cfg.gronwall.resolutions},
    }
    if cfg.output_dir is not None:
        raw["experiment"]["output_dir"] = str(cfg.output_dir)
    if cfg.initial.path is not None:
        raw["initial"]["path"] = cfg.initial.path
    return raw


def with_overrides(cfg: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """Apply ``{"section.key": value}`` overrides and re-validate."""
    raw = config_to_raw(cfg)
    for name, value in overrides.items():
        sec, _, key = name.partition(".")
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError("unknown key", field=name)
        if isinstance(value, str):
            try:
                value = SCHEMA[sec][key](value)
            except ValueError as exc:
                raise ConfigError(f"bad value {value!r} ({exc})", field=name) from None
        raw.setdefault(sec, {})[key] = value
    if "domain.N" in overrides and "domain.G" not in overrides:
        raw["domain"].pop("G")
    if "solver.T" in overrides and "solver.window" not in overrides:
        raw["solver"]["window"] = min(raw["solver"]["window"], raw["solver"]["T"])
    return build_config(raw)


def _fmt_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt_value(x) for x in v)
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    """INI text that loads back to an equal configuration."""
    out = []
    for sec, items in config_to_raw(cfg).items():
        out.append(f"[{sec}]")
        out.extend(f"{k} = {_fmt_value(v)}" for k, v in items.items())
        out.append("")
    return "\n".join(out)


# -- checkpoints -------------------------------------------------------------


def _pack(domain: DomainSpec, t: float, mu: float, coeff: np.ndarray) -> bytes:
    head = HEADER.pack(MAGIC, VERSION, domain.N, domain.G, _QUAD_CODES[domain.quadrature], t, mu)
    return head + np.ascontiguousarray(coeff, dtype="<f8").tobytes()


def write_checkpoint(path, domain: DomainSpec, t: float, mu: float, coeff: np.ndarray) -> None:
    Path(path).write_bytes(_pack(domain, t, mu, coeff))


def _records(data: bytes, source: str):
    pos = 0
    while pos < len(data):
        if len(data) - pos < HEADER.size:
            raise CheckpointError(f"{source}: truncated header at byte {pos}")
        magic, version, N, G, quad, t, mu = HEADER.unpack_from(data, pos)
        if magic[:4] != MAGIC[:4]:
            raise CheckpointError(f"{source}: bad magic {magic!r} at byte {pos}")
        if magic != MAGIC or version != VERSION:
            raise CheckpointError(f"{source}: unsupported format version {magic!r}/{version} (expected {VERSION})")
        codes = {v: k for k, v in _QUAD_CODES.items()}
        if quad not in codes:
            raise CheckpointError(f"{source}: unknown quadrature code {quad}")
        pos += HEADER.size
        size = 8 * N * N
        if len(data) - pos < size:
            raise CheckpointError(f"{source}: truncated payload, expected {size} bytes, found {len(data) - pos}")
        coeff = np.frombuffer(data, dtype="<f8", count=N * N, offset=pos).reshape(N, N).astype(float)
        pos += size
        yield DomainSpec(N, G, codes[quad]), t, mu, coeff


def read_checkpoint(path) -> tuple[DomainSpec, float, float, np.ndarray]:
    recs = list(_records(Path(path).read_bytes(), str(path)))
    if not recs:
        raise CheckpointError(f"{path}: empty file")
    return recs[-1]


def write_trajectory(traj: Trajectory, path) -> None:
    if len(traj) == 0:
        raise ValueError("nothing to write: empty trajectory")
    blob = b"".join(_pack(traj.domain, t, traj.mu, c) for t, c in zip(traj.times, traj.coeffs))
    Path(path).write_bytes(blob)


def read_trajectory(path) -> Trajectory:
    recs = list(_records(Path(path).read_bytes(), str(path)))
    if not recs:
        raise CheckpointError(f"{path}: empty file")
    domain, _, mu, _ = recs[0]
    for d, _, m, _ in recs[1:]:
        if d != domain or m != mu and not (math.isnan(m) and math.isnan(mu)):
            raise CheckpointError(f"{path}: records disagree on N, G or mu")
    return Trajectory(domain, [r[1] for r in recs], np.stack([r[3] for r in recs]), mu)


# -- tables ----------------------------------------------------------------

NORM_COLUMNS = ("time", "l2_norm", "besov_2_2_1", "grad_linf")
REPORT_COLUMNS = ("inequality_id", "N", "mu", "max_ratio")


def _num(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def write_norm_series(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NORM_COLUMNS)
        d = traj.diagnostics
        for i, t in enumerate(traj.times):
            w.writerow([_num(t), _num(d["l2_norm"][i]), _num(d["besov_2_2_1"][i]), _num(d["grad_linf"][i])])


def read_norm_series(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != NORM_COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(NORM_COLUMNS))
    return {c: data[:, k] for k, c in enumerate(NORM_COLUMNS)}


Row = tuple[str, int, float, float]


def report_rows(reports: Iterable[VerificationReport | Row]) -> list[Row]:
    rows: list[Row] = []
    for r in reports:
        rows.extend(r.rows() if isinstance(r, VerificationReport) else [r])
    return rows


def write_report(reports: Iterable[VerificationReport | Row], path) -> None:
    """One row per (inequality, N, mu); mu is blank where it does not apply."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for ident, n, mu, ratio in report_rows(reports):
            w.writerow([ident, int(n), _num(mu), _num(ratio)])


def read_report(path) -> list[Row]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != REPORT_COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    return [(r[0], int(r[1]), float(r[2]) if r[2] else math.nan, float(r[3])) for r in rows[1:]]


__all__ = [
    "MAGIC", "VERSION", "OUTPUT_ENV", "ConfigError", "CheckpointError", "RunConfig", "InitialCondition",
    "VerifyConfig", "GronwallConfig", "parse_config", "load_config", "build_config", "with_overrides",
    "dump_config", "write_checkpoint", "read_checkpoint", "write_trajectory", "read_trajectory",
    "write_norm_series", "read_norm_series", "write_report", "read_report", "report_rows",
]
