"""Command-line entry point: ``srsp run|verify|converge CONFIG``.

Failures print one line ``error[CODE]: message`` to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import convergence, oracles
from .diagnostics import (
    conservation_report,
    probe_lipschitz,
    verify_kinetic_bound,
    verify_norm_equivalence,
)
from .ensemble import Ensemble, random_ensemble
from .integrator import BlowUpError, run
from .io import (
    ConfigError,
    DiagnosticsWriter,
    RunConfig,
    SnapshotError,
    load_config,
    snapshot_read,
    snapshot_write,
    write_svg,
    write_table,
)

EXIT_USAGE = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4
EXIT_SNAPSHOT = 5
EXIT_IO = 6

# ladder errors below this are accumulated phase roundoff, not truncation error
ROUNDOFF = 1e-11

log = logging.getLogger("srsp")


class CommandError(Exception):
    def __init__(self, code: str, status: int, message: str):
        super().__init__(message)
        self.code = code
        self.status = status


def initial_ensemble(cfg: RunConfig) -> Ensemble:
    if cfg.snapshot is not None:
        return snapshot_read(cfg.snapshot, cfg.dom, coupling=cfg.coupling)
    return random_ensemble(cfg.dom, cfg.K, m=cfg.m, weights=cfg.weights, seed=cfg.seed,
                           damping=cfg.damping, coupling=cfg.coupling)


def command_run(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    outdir = Path(cfg.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    e0 = initial_ensemble(cfg)

    def on_step(i, e):
        if cfg.snapshot_cadence and i % cfg.snapshot_cadence == 0:
            snapshot_write(e, outdir / f"snapshot_{i:08d}.srsp")

    with DiagnosticsWriter(outdir / "diagnostics.csv") as writer:
        try:
            final = run(e0, cfg.step, writer, on_step=on_step)
        except BlowUpError as exc:
            writer(exc.record)
            print("final record: " + ", ".join(f"{k}={v!r}" for k, v in vars(exc.record).items()), file=out)
            raise CommandError("E_BLOWUP", EXIT_BLOWUP, str(exc)) from None
    records = writer.records
    if cfg.snapshot_cadence:
        snapshot_write(final, outdir / "final.srsp")
    print(f"wrote {len(records)} records to {outdir / 'diagnostics.csv'}", file=out)
    if len(records) >= 2:
        for line in conservation_report(records).lines():
            print(line, file=out)
    if cfg.plot:
        t = [r.t for r in records]
        write_svg(outdir / "mass.svg", t, {"mass": [r.mass for r in records]}, "L2_lambda mass")
        write_svg(outdir / "energy.svg", t, {"energy_Tm": [r.energy_Tm for r in records],
                                             "energy_half_p": [r.energy_half_p for r in records]}, "energy")
        write_svg(outdir / "gram_defect.svg", t, {"gram_defect": [r.gram_defect for r in records]},
                  "max |G - I|")
    return 0


def command_verify(cfg: RunConfig, trials: int | None = None, seed: int | None = None, out=None) -> int:
    out = out or sys.stdout
    trials = cfg.verify_trials if trials is None else trials
    seed = cfg.verify_seed if seed is None else seed
    if trials < 1:
        raise CommandError("E_USAGE", EXIT_USAGE, f"trials must be >= 1, got {trials}")
    dom = cfg.dom
    failures = []

    def check(name, ok, detail):
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=out)
        if not ok:
            failures.append(name)

    eig = oracles.eigenvalue_table_error(dom, seed=seed)
    check("eigenvalue_table", eig <= 1e-13, f"max rel err {eig:.2e}")
    syn = oracles.direct_synthesis_error(dom, seed=seed)
    check("synthesis_vs_direct_sum", syn <= 1e-12, f"max rel err {syn:.2e}")
    gaps = oracles.poisson_fd_study(dom.L[0], seed=seed)
    orders = oracles.observed_orders([1.0 / M for M, _ in gaps], [g for _, g in gaps])
    check("poisson_fd_order", all(o >= 1.9 for o in orders),
          "gaps " + " ".join(f"M={M}:{g:.3e}" for M, g in gaps) + " orders " + " ".join(f"{o:.3f}" for o in orders))

    rep = verify_norm_equivalence(dom, seed, trials)
    check("norm_equivalence", rep.passed, rep.summary())
    for m in sorted({0.1, 1.0, 10.0, cfg.m}):
        rep = verify_kinetic_bound(dom, m, seed, trials)
        check(f"kinetic_bound_m={m:g}", rep.passed, rep.summary())

    lip_a = probe_lipschitz(dom, 2, seed, trials)
    lip_b = probe_lipschitz(dom, 2, seed + 1_000_003, trials)
    homog = max(max(lip_a.scaling_errors.values()), max(lip_b.scaling_errors.values()))
    check("lipschitz_scaling", homog <= 1e-10, f"max rel err of s^2 law {homog:.2e}")
    spread = abs(lip_a.max_quotient / lip_b.max_quotient - 1.0)
    print(f"INFO lipschitz max quotients {lip_a.max_quotient:.6g} / {lip_b.max_quotient:.6g} "
          f"(relative spread {spread:.3f})", file=out)

    if failures:
        raise CommandError("E_VERIFY", EXIT_VERIFY, "verification failed: " + ", ".join(failures))
    print("all checks passed", file=out)
    return 0


def command_converge(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    outdir = Path(cfg.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    e0 = initial_ensemble(cfg)
    rows = convergence.dt_ladder(e0, cfg.dt0, cfg.t_final, cfg.dt_levels, cfg.step.scheme, cfg.ref_factor)
    rows += convergence.n_ladder(cfg.dom, cfg.K, m=cfg.m, weights=e0.weights, coupling=cfg.coupling,
                                 seed=cfg.seed, damping=cfg.damping, dt=cfg.dt0 / 2 ** (cfg.dt_levels - 1),
                                 t_final=cfg.t_final, levels=cfg.n_levels, scheme=cfg.step.scheme)
    header = ("ladder", "level", "dt", "N", "error", "observed_order", "tail_norm")
    write_table(outdir / "convergence.csv", header,
                [(r.ladder, r.level, r.dt, r.N, r.error, r.observed_order, r.tail_norm) for r in rows])
    for r in rows:
        print(f"{r.ladder} level={r.level} dt={r.dt:.6g} N={r.N} error={r.error:.6e} "
              f"order={r.observed_order:.4f} tail={r.tail_norm:.3e}", file=out)
    dt_rows = [r for r in rows if r.ladder == "dt"]
    dt_orders = [r.observed_order for r in dt_rows if math.isfinite(r.observed_order)]
    if dt_orders and max(r.error for r in dt_rows) > ROUNDOFF:
        print(f"dt slope estimate: {float(np.mean(dt_orders)):.4f} (last {dt_orders[-1]:.4f})", file=out)
    else:
        print("dt slope estimate: n/a (errors at roundoff)", file=out)
    n_rows = [r for r in rows if r.ladder == "N"]
    print("N ladder tail norms: " + " ".join(f"N={r.N}:{r.tail_norm:.3e}" for r in n_rows), file=out)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CommandError("E_USAGE", EXIT_USAGE, message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="srsp", description="Semi-relativistic Schrodinger-Poisson ensemble simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="integrate and write diagnostics.csv")
    p.add_argument("config")
    p = sub.add_parser("verify", help="run the bound and oracle checks")
    p.add_argument("config")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p = sub.add_parser("converge", help="dt and N refinement ladders; writes convergence.csv")
    p.add_argument("config")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CommandError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return exc.status
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            return command_run(cfg)
        if args.command == "verify":
            return command_verify(cfg, args.trials, args.seed)
        return command_converge(cfg)
    except CommandError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return exc.status
    except ConfigError as exc:
        print(f"error[E_CONFIG]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SnapshotError as exc:
        print(f"error[E_SNAPSHOT]: {exc}", file=sys.stderr)
        return EXIT_SNAPSHOT
    except FileNotFoundError as exc:
        print(f"error[E_IO]: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error[E_IO]: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error[E_INPUT]: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
