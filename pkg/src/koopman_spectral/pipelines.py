"""Config-driven stages (simulate, fit, gedmd, sweep) and the reproduction runs."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import simulation as sim
from .config import ExperimentConfig, exp1_configs, exp2_configs
from .errors import ConfigError, InputError
from .gedmd import EXACT, fit_gedmd, spectrum_report
from .landscape import curve_to_csv, curve_to_svg, periodicity_defect, symmetry_defect, sweep_beta
from .optimizer import cluster_spectrum, multi_start
from .spectral_loss import precompute_gram

log = logging.getLogger(__name__)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _header(meta) -> list[str]:
    return [f"# {k}: {v}" for k, v in meta.items()]


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def simulate_trajectories(cfg: ExperimentConfig) -> list:
    s = cfg.sampling
    field = cfg.field
    if field is None:
        raise ConfigError("system", "simulation requires a vector field")
    count = int(s["trajectory_count"])
    init_seed, subsample_seed = sim.split_seed(cfg.seed, 2)
    x0s = sim.sample_initial_states(count, s["box_lo"], s["box_hi"], init_seed)
    delta = float(s["delta"])
    substeps = max(1, math.ceil(delta / float(s["max_substep"]) - 1e-9))
    trajs = sim.sample_regular_many(field, x0s, delta, float(s["horizon"]), substeps)
    if s["mode"] == "irregular-subset":
        seeds = sim.split_seed(subsample_seed, count)
        trajs = [sim.subsample_irregular(t, int(s["keep_count"]), sd) for t, sd in zip(trajs, seeds)]
    return trajs


def build_config_dataset(cfg: ExperimentConfig):
    return sim.build_dataset(simulate_trajectories(cfg))


def dataset_metadata(cfg: ExperimentConfig) -> dict:
    meta = dict(cfg.metadata())
    meta["system"] = json.dumps(cfg.raw["system"], sort_keys=True)
    meta["sampling"] = json.dumps(cfg.sampling, sort_keys=True)
    meta["integrator"] = "rk4"
    return meta


def analytic_lattice(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.field is None:
        return np.array(cfg.reference_eigenvalues, dtype=complex)
    return cfg.field.lattice(int(cfg.raw["analysis"]["lattice_order"]))


@dataclass
class FitOutput:
    results: list
    clusters: list


def run_fit(cfg: ExperimentConfig, dataset, threads: int = 1) -> FitOutput:
    points = cfg.init_points
    if not points:
        raise InputError("init_grid is empty")
    blocks = precompute_gram(dataset, cfg.dictionary)
    results = multi_start(blocks, points, cfg.optim, threads=threads)
    clusters = cluster_spectrum(results, float(cfg.raw["analysis"]["cluster_radius"]))
    log.info("%s: %d/%d starts converged", cfg.name, sum(r.converged for r in results), len(results))
    return FitOutput(results, clusters)


def _nearest(value, lattice):
    if len(lattice) == 0:
        return complex("nan"), math.nan
    k = int(np.argmin(np.abs(lattice - value)))
    return complex(lattice[k]), float(abs(lattice[k] - value))


def fit_csv(cfg, fit: FitOutput, lattice) -> str:
    lines = _header(cfg.metadata())
    lines.append(
        "start,init_alpha,init_beta,alpha,beta,loss,status,iterations,fallbacks,"
        "nearest_analytic_re,nearest_analytic_im,distance"
    )
    for i, r in enumerate(fit.results):
        near, dist = _nearest(r.eigenvalue, lattice)
        lines.append(
            ",".join(
                [
                    str(i),
                    _fmt(r.init[0]),
                    _fmt(r.init[1]),
                    _fmt(r.eigenvalue.real),
                    _fmt(r.eigenvalue.imag),
                    _fmt(r.loss),
                    r.status,
                    str(len(r.trace) - 1),
                    str(r.fallback_count),
                    _fmt(near.real),
                    _fmt(near.imag),
                    _fmt(dist),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def clusters_csv(cfg, fit: FitOutput, lattice) -> str:
    lines = _header(cfg.metadata())
    lines.append("re,im,count,best_loss,nearest_analytic_re,nearest_analytic_im,distance")
    for c in fit.clusters:
        near, dist = _nearest(c.eigenvalue, lattice)
        lines.append(
            ",".join(
                [_fmt(c.eigenvalue.real), _fmt(c.eigenvalue.imag), str(c.count), _fmt(c.best_loss), _fmt(near.real), _fmt(near.imag), _fmt(dist)]
            )
        )
    return "\n".join(lines) + "\n"


def trace_csv(cfg, result) -> str:
    lines = _header(cfg.metadata())
    lines.append("iter,alpha,beta,loss,grad_norm")
    for it, a, b, loss, g in result.trace:
        lines.append(f"{it},{_fmt(a)},{_fmt(b)},{_fmt(loss)},{_fmt(g)}")
    return "\n".join(lines) + "\n"


def write_fit(out_dir: Path, cfg, fit: FitOutput) -> None:
    lattice = analytic_lattice(cfg)
    _write(out_dir / "spectrum.csv", fit_csv(cfg, fit, lattice))
    _write(out_dir / "clusters.csv", clusters_csv(cfg, fit, lattice))
    for i, r in enumerate(fit.results):
        _write(out_dir / "traces" / f"trace_{i:03d}.csv", trace_csv(cfg, r))


def run_gedmd(cfg: ExperimentConfig, dataset) -> list:
    models = []
    for mode in cfg.raw["gedmd"]["modes"]:
        if mode == EXACT and cfg.field is None:
            raise ConfigError("system", f"{EXACT} mode requires a vector field")
        models.append(fit_gedmd(dataset, cfg.gedmd_dictionary, cfg.field, mode))
    return models


def gedmd_csv(cfg, models, lattice) -> str:
    lines = _header(cfg.metadata())
    lines.append("method,derivative_mode,delta,re,im,nearest_analytic_re,nearest_analytic_im,distance")
    delta = _fmt(cfg.sampling["delta"])
    for m in models:
        for w in m.warnings:
            lines.insert(len(lines) - 1, f"# warning ({m.derivative_mode}): {w}")
        for row in spectrum_report(m, lattice):
            lines.append(
                ",".join(
                    [
                        "gedmd",
                        m.derivative_mode,
                        delta,
                        _fmt(row.eigenvalue.real),
                        _fmt(row.eigenvalue.imag),
                        _fmt(row.nearest.real),
                        _fmt(row.nearest.imag),
                        _fmt(row.distance),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def run_sweep(cfg: ExperimentConfig, dataset, a_fixed=None):
    blocks = precompute_gram(dataset, cfg.dictionary)
    return sweep_beta(blocks, cfg.sweep, a_fixed)


def sweep_diagnostics(cfg, curve) -> dict:
    out = {"symmetry_defect": math.nan, "periodicity_defect": math.nan, "period": math.nan}
    try:
        out["symmetry_defect"] = symmetry_defect(curve)
    except InputError:
        pass
    period = cfg.sweep_period
    if period is not None:
        out["period"] = period
        try:
            out["periodicity_defect"] = periodicity_defect(curve, period)
        except InputError:
            pass
    return out


def write_sweep(out_dir: Path, cfg, curve, svg: bool = True) -> None:
    _write(out_dir / "landscape.csv", curve_to_csv(curve, cfg.name, cfg.metadata()))
    if svg:
        markers = []
        for ref in cfg.reference_eigenvalues:
            markers.append(ref.imag)
        _write(out_dir / "landscape.svg", curve_to_svg(curve, markers, title=cfg.name))


def write_config(out_dir: Path, cfg) -> None:
    _write(out_dir / "config.json", json.dumps(cfg.raw, sort_keys=True, indent=2) + "\n")


def summary_rows(cfg, fit: FitOutput, models, curve) -> list[dict]:
    """Nearest learned eigenvalue to each reference eigenvalue, per method."""
    rows = []
    learned = np.array([c.eigenvalue for c in fit.clusters], dtype=complex)
    spectra = [("proposed", "", learned)]
    spectra += [("gedmd", m.derivative_mode, m.eigenvalues) for m in models]
    diag = sweep_diagnostics(cfg, curve) if curve is not None else {}
    converged = sum(r.converged for r in fit.results)
    for ref in cfg.reference_eigenvalues:
        for method, mode, values in spectra:
            if len(values):
                k = int(np.argmin(np.abs(values - ref)))
                best, dist = complex(values[k]), float(abs(values[k] - ref))
            else:
                best, dist = complex("nan"), math.nan
            rows.append(
                {
                    "run": cfg.name,
                    "method": method,
                    "derivative_mode": mode,
                    "analytic_re": ref.real,
                    "analytic_im": ref.imag,
                    "learned_re": best.real,
                    "learned_im": best.imag,
                    "distance": dist,
                    "converged_starts": converged if method == "proposed" else "",
                    "total_starts": len(fit.results) if method == "proposed" else "",
                    "periodicity_defect": diag.get("periodicity_defect", math.nan),
                    "symmetry_defect": diag.get("symmetry_defect", math.nan),
                }
            )
    return rows


SUMMARY_COLUMNS = (
    "run", "method", "derivative_mode", "analytic_re", "analytic_im", "learned_re", "learned_im",
    "distance", "converged_starts", "total_starts", "periodicity_defect", "symmetry_defect",
)


def summary_csv(rows, meta) -> str:
    lines = _header(meta)
    lines.append(",".join(SUMMARY_COLUMNS))
    for row in rows:
        cells = []
        for col in SUMMARY_COLUMNS:
            v = row[col]
            cells.append(_fmt(v) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


class StageError(Exception):
    def __init__(self, stage, run, cause):
        super().__init__(f"stage '{stage}' failed for {run}: {cause}")
        self.stage = stage
        self.cause = cause


def run_experiment(cfg, out_dir: Path, threads: int = 1, svg: bool = True) -> list[dict]:
    """simulate -> fit -> gedmd -> sweep for one config, writing all artifacts."""
    stage = "simulate"
    try:
        dataset = build_config_dataset(cfg)
        write_config(out_dir, cfg)
        sim.write_dataset(out_dir / "dataset.csv", dataset, dataset_metadata(cfg))
        stage = "fit"
        fit = run_fit(cfg, dataset, threads)
        write_fit(out_dir, cfg, fit)
        stage = "gedmd"
        models = run_gedmd(cfg, dataset)
        _write(out_dir / "gedmd_spectrum.csv", gedmd_csv(cfg, models, analytic_lattice(cfg)))
        stage = "sweep"
        curve = run_sweep(cfg, dataset)
        write_sweep(out_dir, cfg, curve, svg)
    except Exception as exc:
        raise StageError(stage, cfg.name, exc) from exc
    return summary_rows(cfg, fit, models, curve)


def reproduce(which: str, out_dir, seed: int = 0, threads: int = 1, svg: bool = True) -> list[dict]:
    """Run every sub-experiment of ``exp1`` or ``exp2`` and write ``summary.csv``."""
    if which == "exp1":
        configs = exp1_configs(seed)
    elif which == "exp2":
        configs = exp2_configs(seed)
    else:
        raise InputError(f"unknown experiment {which!r}; expected exp1 or exp2")
    out_dir = Path(out_dir)
    rows = []
    for cfg in configs:
        log.info("running %s", cfg.name)
        rows.extend(run_experiment(cfg, out_dir / cfg.name, threads, svg))
    meta = {"experiment": which, "seed": seed, "configs": " ".join(f"{c.name}={c.config_hash}" for c in configs)}
    _write(out_dir / "summary.csv", summary_csv(rows, meta))
    return rows
