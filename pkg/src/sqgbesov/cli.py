"""
Command-line driver.

Every subcommand reads a configuration file, applies ``--set section.key=value``
overrides, and writes its artefacts into ``<output root>/<experiment id>/``.
The output root is ``--output``, else ``[experiment] output_dir``, else the
``SQGBESOV_OUTPUT`` environment variable, else ``./runs``.
"""

from __future__ import annotations

import argparse
import csv
import enum
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments, persist, plotting
from .dyadic import BesovIndex, besov_norm
from .evolution import BlowUpError, PicardNonConvergence, SolverError, existence_window, mu_sweep, solve
from .spectral import SpectralField

log = logging.getLogger("sqgbesov")


class Exit(enum.IntEnum):
    OK = 0
    CHECK_FAILED = 1
    CONFIG_ERROR = 2
    BLOW_UP = 3
    PICARD_NONCONVERGENCE = 4
    IO_ERROR = 5
    SOLVER_ERROR = 6


def _override(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or "." not in key:
        raise argparse.ArgumentTypeError(f"expected section.key=value, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sqgbesov", description=__doc__.strip().splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, config_required=True):
        if config_required:
            sp.add_argument("config", type=Path, help="INI run configuration")
        else:
            sp.add_argument("--config", type=Path, help="INI run configuration")
        sp.add_argument("--set", dest="overrides", type=_override, action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one configuration value")
        sp.add_argument("--output", type=Path, help="output root (default: $SQGBESOV_OUTPUT or ./runs)")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads for ensemble checks")
        return sp

    common(sub.add_parser("simulate", help="evolve the initial field and store the trajectory"))
    common(sub.add_parser("sweep-mu", help="compare regularised runs across the configured mu values"))
    common(sub.add_parser("verify", help="measure the constants of every inequality on the ensemble"))
    bn = common(sub.add_parser("besov-norm", help="print the B^s_{p,q} norm of a stored field"), False)
    bn.add_argument("field", type=Path, help="checkpoint or trajectory file (last state is used)")
    bn.add_argument("--s", type=float, default=2.0)
    bn.add_argument("--p", type=float, default=2.0)
    bn.add_argument("--q", type=float, default=1.0)
    common(sub.add_parser("gronwall", help="perturbation growth against the Gronwall envelope"))
    common(sub.add_parser("report", help="render figures for the CSV files of a run directory"))
    return p


def _load(args) -> persist.RunConfig:
    cfg = persist.load_config(args.config)
    if args.overrides:
        cfg = persist.with_overrides(cfg, dict(args.overrides))
    if args.output is not None:
        cfg = persist.with_overrides(cfg, {"experiment.output_dir": str(args.output)})
    return cfg


def _run_dir(cfg: persist.RunConfig) -> Path:
    d = cfg.run_dir()
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.ini").write_text(persist.dump_config(cfg))
    return d


def cmd_simulate(args) -> Exit:
    cfg = _load(args)
    theta0 = experiments.initial_field(cfg)
    horizon = existence_window(theta0, cfg.c_T)
    if cfg.solver.T > horizon:
        log.warning("T = %g exceeds the estimated existence window %.3g", cfg.solver.T, horizon)
    traj = solve(theta0, cfg.mu, cfg.solver, cfg.dealias)
    out = _run_dir(cfg)
    persist.write_trajectory(traj, out / "trajectory.sqgc")
    persist.write_norm_series(traj, out / "norms.csv")
    d = traj.diagnostics
    print(f"t = {traj.times[-1]:.6g}  l2 = {d['l2_norm'][-1]:.12g}  besov_2_2_1 = {d['besov_2_2_1'][-1]:.12g}"
          f"  grad_linf = {d['grad_linf'][-1]:.6g}")
    print(f"wrote {out}")
    return Exit.OK


def cmd_sweep(args) -> Exit:
    cfg = _load(args)
    mus = sorted((m for m in cfg.mus if m > 0), reverse=True)
    if not mus:
        raise persist.ConfigError("sweep-mu needs at least one positive value", field="nonlinearity.mu")
    theta0 = experiments.initial_field(cfg)
    rep = mu_sweep(theta0, mus, cfg.solver, with_mu0=True, dealias=cfg.dealias)
    out = _run_dir(cfg)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mu", "chemin_lerner_norm", "sup_l2_difference_to_next"])
        for i, mu in enumerate(mus):
            nxt = rep.differences[i] if i < len(rep.differences) else rep.mu0_difference
            w.writerow([repr(mu), repr(rep.cl_norms[i]), "" if nxt is None else repr(float(nxt))])
    print(f"chemin-lerner norms: {', '.join(f'{v:.10g}' for v in rep.cl_norms)}")
    if rep.differences:
        print(f"consecutive differences: {', '.join(f'{v:.4g}' for v in rep.differences)}")
    print(f"difference to mu = 0: {rep.mu0_difference:.4g}")
    print(f"uniform bound: {'pass' if rep.uniform_bound_ok else 'FAIL'}  "
          f"cauchy: {'pass' if rep.cauchy_ok else 'FAIL'}")
    return Exit.OK if rep.passed else Exit.CHECK_FAILED


def cmd_verify(args) -> Exit:
    cfg = _load(args)
    reports = experiments.verify_suite(cfg, jobs=args.jobs)
    out = _run_dir(cfg)
    persist.write_report(reports, out / "report.csv")
    width = max(len(r.inequality_id) for r in reports)
    for r in reports:
        worst = max(r.ratio) if r.ratio else 0.0
        print(f"{'pass' if r.passed else 'FAIL'}  {r.inequality_id:<{width}}  max ratio {worst:.4g}")
    return Exit.OK if all(r.passed for r in reports) else Exit.CHECK_FAILED


def cmd_besov(args) -> Exit:
    if args.config is not None:
        _load(args)  # validates the file and overrides even though only the field is used
    domain, _, _, coeff = persist.read_checkpoint(args.field)
    value = besov_norm(SpectralField(domain, coeff), BesovIndex(args.s, args.p, args.q))
    print(repr(value))
    return Exit.OK


def cmd_gronwall(args) -> Exit:
    cfg = _load(args)
    study = experiments.gronwall_study(cfg)
    out = _run_dir(cfg)
    with open(out / "gronwall.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "time", "grad_integral", "ratio", "envelope"])
        for n, r in zip(study.resolutions, study.reports):
            for row in zip(r.times, r.grad_integral, r.ratio, r.envelope):
                w.writerow([n, *(repr(float(x)) for x in row)])
    for n, r in zip(study.resolutions, study.reports):
        print(f"N = {n}: fitted C = {r.constant:.6g}, final growth {r.ratio[-1]:.8g}, "
              f"envelope {'holds' if r.holds else 'VIOLATED'}")
    print(f"constant ratio across resolutions: {study.constant_ratio:.4g}")
    return Exit.OK if study.passed else Exit.CHECK_FAILED


def cmd_report(args) -> Exit:
    cfg = _load(args)
    out = cfg.run_dir()
    made = []
    if (out / "norms.csv").exists():
        made.append(plotting.plot_norm_series(persist.read_norm_series(out / "norms.csv"), out / "norms.png"))
    if (out / "report.csv").exists():
        made.append(plotting.plot_report(persist.read_report(out / "report.csv"), out / "report.png"))
    if (out / "sweep.csv").exists():
        with open(out / "sweep.csv", newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        mus = [float(r[0]) for r in rows]
        cl = [float(r[1]) for r in rows]
        diffs = [float(r[2]) if r[2] else math.nan for r in rows[:-1]]
        made.append(plotting.plot_sweep(mus, cl, diffs, out / "sweep.png"))
    if (out / "gronwall.csv").exists():
        data = np.loadtxt(out / "gronwall.csv", delimiter=",", skiprows=1, ndmin=2)
        curves = {int(n): {"time": data[data[:, 0] == n, 1], "ratio": data[data[:, 0] == n, 3],
                           "envelope": data[data[:, 0] == n, 4]} for n in np.unique(data[:, 0])}
        made.append(plotting.plot_growth(curves, out / "gronwall.png"))
    if not made:
        print(f"no CSV output found in {out}", file=sys.stderr)
        return Exit.IO_ERROR
    for path in made:
        print(f"wrote {path}")
    return Exit.OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep-mu": cmd_sweep,
    "verify": cmd_verify,
    "besov-norm": cmd_besov,
    "gronwall": cmd_gronwall,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s: %(message)s")
    try:
        return int(COMMANDS[args.command](args))
    except persist.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return Exit.CONFIG_ERROR
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return Exit.BLOW_UP
    except PicardNonConvergence as exc:
        print(f"picard: {exc}", file=sys.stderr)
        return Exit.PICARD_NONCONVERGENCE
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return Exit.SOLVER_ERROR
    except (OSError, persist.CheckpointError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return Exit.IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
