"""Command-line interface: simulate, fit, sweep, gedmd, reproduce."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import pipelines
from . import simulation as sim
from .config import ExperimentConfig
from .errors import ConfigError, InputError, NumericError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2

log = logging.getLogger("koopman_spectral")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _configure_logging():
    level = os.environ.get("KOOPMAN_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _threads(n):
    return (os.cpu_count() or 1) if n == 0 else n


def _load(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config", "a config file is required")
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _dataset(args, cfg):
    if getattr(args, "dataset", None):
        try:
            return sim.read_dataset(args.dataset)
        except OSError as exc:
            raise InputError(f"cannot read dataset {args.dataset}: {exc.strerror}") from None
    return pipelines.build_config_dataset(cfg)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    dataset = pipelines.build_config_dataset(cfg)
    out = Path(args.out)
    pipelines.write_config(out, cfg)
    out.mkdir(parents=True, exist_ok=True)
    sim.write_dataset(out / "dataset.csv", dataset, pipelines.dataset_metadata(cfg))
    print(f"wrote {dataset.pair_count} pairs to {out / 'dataset.csv'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _load(args)
    if not cfg.init_points:
        raise UsageError("init_grid is empty; nothing to fit")
    dataset = _dataset(args, cfg)
    fit = pipelines.run_fit(cfg, dataset, _threads(args.threads))
    out = Path(args.out)
    pipelines.write_fit(out, cfg, fit)
    n_ok = sum(r.converged for r in fit.results)
    print(f"{n_ok}/{len(fit.results)} starts converged; {len(fit.clusters)} clusters")
    for c in fit.clusters:
        print(f"  lambda = {c.eigenvalue.real:+.6f} {c.eigenvalue.imag:+.6f}i  (n={c.count}, loss={c.best_loss:.3e})")
    return EXIT_OK if n_ok else EXIT_NUMERIC


def cmd_sweep(args) -> int:
    cfg = _load(args)
    dataset = _dataset(args, cfg)
    curve = pipelines.run_sweep(cfg, dataset)
    out = Path(args.out)
    pipelines.write_sweep(out, cfg, curve, svg=not args.no_svg)
    diag = pipelines.sweep_diagnostics(cfg, curve)
    line = f"{len(curve.beta)} points; symmetry defect {diag['symmetry_defect']:.3e}"
    if not math.isnan(diag["periodicity_defect"]):
        line += f"; periodicity defect {diag['periodicity_defect']:.3e} at period {diag['period']:.6g}"
    print(line)
    if args.beta_true is not None:
        from .landscape import minima_near_truth

        b, loss = minima_near_truth(curve, args.beta_true, args.window)
        print(f"argmin near {args.beta_true:g}: beta = {b:.6g}, loss = {loss:.6e}")
    return EXIT_OK


def cmd_gedmd(args) -> int:
    cfg = _load(args)
    dataset = _dataset(args, cfg)
    models = pipelines.run_gedmd(cfg, dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lattice = pipelines.analytic_lattice(cfg)
    pipelines._write(out / "gedmd_spectrum.csv", pipelines.gedmd_csv(cfg, models, lattice))
    for m in models:
        vals = ", ".join(f"{v.real:+.4f}{v.imag:+.4f}i" for v in m.sorted_eigenvalues())
        print(f"{m.derivative_mode}: {vals}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    seed = 0 if args.seed is None else args.seed
    rows = pipelines.reproduce(args.experiment, args.out, seed, _threads(args.threads), svg=not args.no_svg)
    for r in rows:
        print(
            f"{r['run']:<24} {r['method']:<8} {r['derivative_mode']:<20} "
            f"analytic {complex(r['analytic_re'], r['analytic_im']):.4g}  distance {r['distance']:.3e}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="koopman-spectral", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(p, dataset=False):
        p.add_argument("--config", metavar="PATH", help="experiment JSON config")
        p.add_argument("--out", metavar="DIR", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads (0 = auto)")
        if dataset:
            p.add_argument("--dataset", metavar="PATH", help="use this dataset CSV instead of simulating")

    p = sub.add_parser("simulate", help="simulate trajectories and write a dataset CSV")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="multi-start eigenvalue learning")
    common(p, dataset=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="loss landscape along beta")
    common(p, dataset=True)
    p.add_argument("--no-svg", action="store_true")
    p.add_argument("--beta-true", type=float, help="report the grid minimum near this frequency")
    p.add_argument("--window", type=float, default=5.0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gedmd", help="gEDMD baseline spectrum")
    common(p, dataset=True)
    p.set_defaults(func=cmd_gedmd)

    p = sub.add_parser("reproduce", help="run a full reference experiment (exp1 or exp2)")
    p.add_argument("experiment", choices=["exp1", "exp2"])
    p.add_argument("--out", metavar="DIR", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=cmd_reproduce)
    return parser


def _exit_code(exc) -> int:
    if isinstance(exc, pipelines.StageError):
        exc = exc.cause
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, (InputError, UsageError)):
        return EXIT_USAGE
    raise exc


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 0:
        parser.error("--threads must be >= 0")
    try:
        return args.func(args)
    except (pipelines.StageError, NumericError, InputError, UsageError) as exc:
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
