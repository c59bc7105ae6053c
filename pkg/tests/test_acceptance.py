"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import filecmp
import math
import time
from pathlib import Path

import numpy as np
import pytest

from koopman_spectral.dictionary import Dictionary, build_monomial_dictionary
from koopman_spectral.gedmd import EXACT, FINITE_DIFFERENCE, fit_gedmd
from koopman_spectral.landscape import SweepSpec, periodicity_defect, sweep_beta, symmetry_defect
from koopman_spectral.optimizer import cluster_spectrum, init_grid, multi_start
from koopman_spectral.pipelines import reproduce
from koopman_spectral.simulation import HarmonicOscillator, KlusSystem
from koopman_spectral.spectral_loss import assemble_C, fixed_coefficient_loss, loss_and_gradient, loss_only

KLUS = KlusSystem(-0.8, -0.7)
OMEGA = 50.0
PERIOD = 2 * math.pi / 0.2


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:>2}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, f"criterion {number} failed: {detail}"

    return emit


def all_blocks(exp1, exp2):
    out = {f"klus-delta{d}": bl for d, (_, _, bl) in exp1.items()}
    out.update({f"harmonic-{k}": bl for k, (_, _, bl) in exp2.items()})
    return out


def test_criterion_01_gradient(exp2, report):
    _, _, bl = exp2["regular0.01"]
    rng = np.random.default_rng(2024)
    h = 1e-6
    start = time.perf_counter()
    worst, tested, attempts = 0.0, 0, 0
    while tested < 100:
        attempts += 1
        a, b = rng.uniform(-2, 2), rng.uniform(-60, 60)
        ev = loss_and_gradient(bl, a, b)
        if not ev.gap > 1e-8:
            continue
        fd = np.array(
            [
                (loss_only(bl, a + h, b) - loss_only(bl, a - h, b)) / (2 * h),
                (loss_only(bl, a, b + h) - loss_only(bl, a, b - h)) / (2 * h),
            ]
        )
        worst = max(worst, np.linalg.norm(ev.grad - fd) / np.linalg.norm(ev.grad))
        tested += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-5 and elapsed < 10
    report(1, "gradient vs central differences", ok, f"max rel err {worst:.2e} over {tested} points ({attempts} drawn), {elapsed:.2f}s")


def test_criterion_02_psd(exp1, exp2, report):
    start = time.perf_counter()
    worst = math.inf
    for bl in all_blocks(exp1, exp2).values():
        for alpha in (-1.0, 0.0, 1.0):
            for beta in np.linspace(-60, 60, 2001):
                C = assemble_C(bl, alpha, beta)
                lam = np.linalg.eigvalsh(C)[0]
                worst = min(worst, lam / max(1.0, np.linalg.norm(C, 2)))
    elapsed = time.perf_counter() - start
    ok = worst >= -1e-10 and elapsed < 30
    report(2, "C Hermitian PSD along sweeps", ok, f"min scaled eigenvalue {worst:.2e}, {elapsed:.2f}s")


def test_criterion_03_aliasing(exp2, report):
    start = time.perf_counter()
    spec = SweepSpec(0.0, (-60.0, 60.0), 20001)
    regular = periodicity_defect(sweep_beta(exp2["regular0.2"][2], spec), PERIOD)
    irregular = periodicity_defect(sweep_beta(exp2["irregular"][2], spec), PERIOD)
    elapsed = time.perf_counter() - start
    ok = regular <= 1e-6 and irregular >= 100 * regular and elapsed < 30
    report(3, "aliasing period 10*pi", ok, f"regular defect {regular:.2e}, irregular {irregular:.2e}, {elapsed:.2f}s")


def test_criterion_04_symmetry(exp1, exp2, report):
    worst = 0.0
    for bl in all_blocks(exp1, exp2).values():
        for alpha in (-0.7, 0.0):
            worst = max(worst, symmetry_defect(sweep_beta(bl, SweepSpec(alpha, (-60.0, 60.0), 2001))))
    report(4, "sweep curves even in beta", worst <= 1e-12, f"max relative defect {worst:.2e}")


def test_criterion_05_zero_loss(exp1, report):
    c = (2 * KLUS.gamma - KLUS.delta) / KLUS.delta
    losses = {}
    for delta, (cfg, _, bl) in exp1.items():
        d = cfg.dictionary
        a = np.zeros(d.size, dtype=complex)
        a[d.index_of((0, 1))] = c
        a[d.index_of((2, 0))] = 1.0
        a /= np.linalg.norm(a)
        losses[delta] = fixed_coefficient_loss(bl, -0.7, 0.0, a)
    worst = max(losses.values())
    detail = ", ".join(f"delta={k}: {v:.1e}" for k, v in losses.items())
    report(5, "analytic eigenpair has zero loss", worst <= 1e-8, detail)


@pytest.mark.parametrize("delta", [0.05, 0.25, 0.5])
def test_criterion_06_klus_multistart(exp1, report, delta):
    cfg, _, bl = exp1[delta]
    lattice = KLUS.lattice(6)
    start = time.perf_counter()
    results = multi_start(bl, init_grid((-3, 1), (-1, 1), 4, 4), cfg.optim)
    elapsed = time.perf_counter() - start
    bad = [
        r for r in results
        if not (r.converged and r.loss < 1e-6 and np.min(np.abs(lattice - r.eigenvalue)) < 1e-2)
    ]
    clusters = cluster_spectrum(results, radius=1e-3)
    near = min((abs(c.eigenvalue + 0.7) for c in clusters), default=math.inf)
    ok = len(results) == 16 and not bad and near < 1e-3 and elapsed < 120
    report(6, f"Klus multi-start delta={delta}", ok, f"{16 - len(bad)}/16 on lattice, closest cluster to -0.7 at {near:.1e}, {elapsed:.2f}s")


def test_criterion_07_irregular_recovery(exp2, report):
    cfg, _, bl = exp2["irregular"]
    results = multi_start(bl, init_grid((-2, 2), (-60, 60), 5, 5), cfg.optim)
    hits = sum(abs(r.eigenvalue.real) < 1e-3 and abs(abs(r.eigenvalue.imag) - OMEGA) < 0.1 for r in results)
    report(7, "irregular sampling recovers +-50i", hits >= 0.5 * len(results), f"{hits}/{len(results)} starts (seed {cfg.seed})")


def test_criterion_08_regular_aliasing(exp2, report):
    cfg, _, bl = exp2["regular0.2"]
    results = multi_start(bl, init_grid((-2, 2), (-60, 60), 5, 5), cfg.optim)
    ks = np.arange(-20, 21)
    aliases = np.abs(OMEGA - ks * PERIOD)
    converged = [r for r in results if r.converged]
    off = [r for r in converged if np.min(np.abs(abs(r.eigenvalue.imag) - aliases)) >= 0.1]
    landed = [r for r in converged if abs(abs(r.eigenvalue.imag) - OMEGA) > 1]
    ok = bool(converged) and not off and bool(landed)
    freqs = sorted({round(abs(r.eigenvalue.imag), 3) for r in converged})
    report(8, "regular sampling lands on aliases", ok, f"{len(converged)} converged, |beta| in {freqs}, {len(landed)} on an alias")


def test_criterion_09_gedmd_oracle(report):
    rng = np.random.default_rng(7)
    states = rng.uniform(-2, 2, (50, 2))
    harm = fit_gedmd(states, build_monomial_dictionary(2, 1), HarmonicOscillator(OMEGA), EXACT).sorted_eigenvalues()
    klus = fit_gedmd(states, Dictionary(2, ((1, 0), (0, 1), (2, 0)), 2), KLUS, EXACT).sorted_eigenvalues()
    err_h = np.max(np.abs(harm - np.array([-50j, 50j])))
    err_k = np.max(np.abs(klus - np.array([-1.6, -0.8, -0.7])))
    report(9, "exact gEDMD on invariant subspaces", max(err_h, err_k) <= 1e-8, f"harmonic err {err_h:.1e}, Klus err {err_k:.1e}")


def test_criterion_10_gedmd_spurious(exp1, report):
    cfg, ds, _ = exp1[0.5]
    model = fit_gedmd(ds, cfg.dictionary, mode=FINITE_DIFFERENCE)
    lattice = np.append(KLUS.lattice(6), 0.0)
    far = max(np.min(np.abs(lattice - v)) for v in model.eigenvalues)
    report(10, "finite-difference gEDMD spurious eigenvalue at delta=0.5", far > 0.05, f"largest lattice distance {far:.3f}")


def csv_files(root: Path):
    return sorted(p.relative_to(root) for p in root.rglob("*.csv"))


def test_criterion_11_determinism(tmp_path, report):
    mismatched, counted = [], 0
    for which in ("exp1", "exp2"):
        a, b = tmp_path / f"{which}-a", tmp_path / f"{which}-b"
        reproduce(which, a, seed=0, threads=4, svg=False)
        reproduce(which, b, seed=0, threads=1, svg=False)
        files_a, files_b = csv_files(a), csv_files(b)
        if files_a != files_b:
            mismatched.append(f"{which}: file sets differ")
            continue
        counted += len(files_a)
        mismatched += [f"{which}/{f}" for f in files_a if not filecmp.cmp(a / f, b / f, shallow=False)]
    ok = counted > 0 and not mismatched
    report(11, "reproduce reruns are byte-identical", ok, f"{counted} CSVs compared, mismatches: {mismatched or 'none'}")
