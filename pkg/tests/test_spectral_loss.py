import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koopman_spectral.dictionary import Dictionary, build_monomial_dictionary, evaluate
from koopman_spectral.errors import DivergedScale, InputError
from koopman_spectral.simulation import KlusSystem, Trajectory, build_dataset
from koopman_spectral.spectral_loss import (
    assemble_C,
    dC_dalpha,
    dC_dbeta,
    fixed_coefficient_loss,
    gram_from_features,
    loss_and_gradient,
    loss_only,
    precompute_gram,
    smallest_eigenpair,
)


def brute_force_C(g_before, g_after, intervals, alpha, beta):
    lam = complex(alpha, beta)
    C = np.zeros((g_before.shape[1],) * 2, dtype=complex)
    for gb, ga, d in zip(g_before, g_after, intervals):
        v = ga - np.exp(lam * d) * gb
        C += np.outer(v, v.conj())
    return C / len(intervals)


def one_pair(x_before, x_after, dt=1.0):
    ds = build_dataset([Trajectory([0.0, dt], [[x_before], [x_after]])])
    return precompute_gram(ds, Dictionary(1, ((1,),), 1))


def test_single_pair_blocks():
    bl = one_pair(1.0, 2.0)
    np.testing.assert_array_equal(bl.A, [[4]])
    np.testing.assert_array_equal(bl.B, [[[1]]])
    np.testing.assert_array_equal(bl.D, [[[2]]])


def test_single_pair_C():
    np.testing.assert_array_equal(assemble_C(one_pair(1.0, 1.0), 0.0, 0.0), [[0]])
    np.testing.assert_array_equal(assemble_C(one_pair(1.0, 2.0), 0.0, 0.0), [[1]])


def test_gram_invariants(exp1, exp2):
    for _, ds, bl in list(exp1.values()) + list(exp2.values()):
        assert bl.multiplicities.sum() == ds.pair_count
        for H in [bl.A, *bl.B]:
            assert np.max(np.abs(H - H.conj().T)) <= 1e-14 * max(1.0, np.max(np.abs(H)))
            assert np.linalg.eigvalsh(H)[0] >= -1e-12 * max(1.0, np.linalg.norm(H, 2))
        assert np.trace(bl.A).real == pytest.approx(np.mean(np.sum(np.abs(bl.g_after) ** 2, axis=1)), rel=1e-12)


def test_interval_grouping(exp1, exp2):
    assert len(exp1[0.25][2].unique_intervals) == 1
    assert len(exp2["regular0.2"][2].unique_intervals) == 1
    assert len(exp2["irregular"][2].unique_intervals) > 1


def test_C_matches_brute_force(exp2, rng):
    for key in ("regular0.2", "irregular"):
        bl = exp2[key][2]
        for alpha, beta in rng.uniform([-2, -60], [2, 60], (10, 2)):
            C = assemble_C(bl, alpha, beta)
            ref = brute_force_C(bl.g_before, bl.g_after, bl.intervals, alpha, beta)
            np.testing.assert_allclose(C, ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_C_brute_force_complex_features(rng):
    gb = rng.normal(size=(9, 3)) + 1j * rng.normal(size=(9, 3))
    ga = rng.normal(size=(9, 3)) + 1j * rng.normal(size=(9, 3))
    dt = np.array([0.1, 0.1, 0.3, 0.2, 0.3, 0.1, 0.5, 0.2, 0.1])
    bl = gram_from_features(gb, ga, dt)
    assert len(bl.unique_intervals) == 4
    np.testing.assert_allclose(assemble_C(bl, 0.4, -2.0), brute_force_C(gb, ga, dt, 0.4, -2.0), atol=1e-13)


def test_C_is_exactly_hermitian(exp1):
    C = assemble_C(exp1[0.5][2], -0.3, 0.7)
    np.testing.assert_allclose(C, 0.5 * (C + C.conj().T), rtol=0, atol=1e-15)


def test_overflow_raises(exp1):
    with pytest.raises(DivergedScale):
        assemble_C(exp1[0.5][2], 1e4, 0.0)


def test_smallest_eigenpair_diag():
    val, vec, gap = smallest_eigenpair(np.diag([3.0, 1.0, 2.0]))
    assert val == 1.0
    np.testing.assert_array_equal(vec, [0, 1, 0])
    assert gap == 1.0


def test_smallest_eigenpair_zero():
    val, vec, gap = smallest_eigenpair(np.zeros((3, 3)))
    assert val == 0.0 and gap == 0.0
    assert np.linalg.norm(vec) == pytest.approx(1.0)
    k = np.argmax(np.abs(vec))
    assert vec[k].imag == 0 and vec[k].real >= 0


def test_smallest_eigenpair_residual(rng):
    X = rng.normal(size=(14, 14)) + 1j * rng.normal(size=(14, 14))
    H = X + X.conj().T
    val, vec, gap = smallest_eigenpair(H)
    assert np.linalg.norm(H @ vec - val * vec) <= 1e-12 * np.linalg.norm(H)
    assert gap > 0
    assert abs(np.linalg.norm(vec) - 1) < 1e-12
    k = np.argmax(np.abs(vec))
    assert vec[k].imag == 0 and vec[k].real > 0


def test_smallest_eigenpair_rejects_non_hermitian():
    with pytest.raises(InputError):
        smallest_eigenpair(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_one_by_one_gap_is_infinite():
    assert smallest_eigenpair(np.array([[2.0]]))[2] == math.inf


@pytest.mark.parametrize("delta", [0.05, 0.25, 0.5])
def test_analytic_eigenpair_has_zero_loss(exp1, delta):
    cfg, _, bl = exp1[delta]
    f = cfg.field
    a = f.eigenfunction_coefficients(cfg.dictionary)
    a /= np.linalg.norm(a)
    assert fixed_coefficient_loss(bl, f.delta, 0.0, a) <= 1e-8
    assert loss_and_gradient(bl, f.delta, 0.0).loss <= 1e-8


def _fd_gradient(bl, alpha, beta, h=1e-6):
    ga = (loss_only(bl, alpha + h, beta) - loss_only(bl, alpha - h, beta)) / (2 * h)
    gb = (loss_only(bl, alpha, beta + h) - loss_only(bl, alpha, beta - h)) / (2 * h)
    return np.array([ga, gb])


def test_gradient_matches_finite_differences_klus(exp1, rng):
    bl = exp1[0.25][2]
    checked = 0
    for alpha, beta in rng.uniform([-2, -3], [0.5, 3], (100, 2)):
        ev = loss_and_gradient(bl, alpha, beta)
        if ev.gap <= 1e-8:
            continue
        fd = _fd_gradient(bl, alpha, beta)
        assert np.linalg.norm(ev.grad - fd) <= 1e-5 * np.linalg.norm(fd)
        checked += 1
    assert checked >= 90


def test_gradient_matches_matrix_form(exp2, exp1, rng):
    for bl in (exp2["irregular"][2], exp1[0.05][2]):
        for alpha, beta in rng.uniform([-1, -40], [1, 40], (20, 2)):
            ev = loss_and_gradient(bl, alpha, beta)
            u = ev.eigvec
            ga = np.real(u.conj() @ dC_dalpha(bl, alpha, beta) @ u)
            gb = np.real(u.conj() @ dC_dbeta(bl, alpha, beta) @ u)
            scale = max(abs(ga), abs(gb), 1e-300)
            assert abs(ga - ev.grad_alpha) <= 1e-9 * scale
            assert abs(gb - ev.grad_beta) <= 1e-9 * scale


def test_grad_beta_vanishes_at_zero_frequency(exp2):
    for _, _, bl in exp2.values():
        for alpha in (-1.0, 0.0, 1.5):
            assert loss_and_gradient(bl, alpha, 0.0).grad_beta == pytest.approx(0.0, abs=1e-12)


def test_regular_periodicity_of_C(exp2, exp1):
    for bl, delta in ((exp2["regular0.2"][2], 0.2), (exp1[0.5][2], 0.5)):
        for beta in (-7.0, 0.3, 12.5):
            C0 = assemble_C(bl, 0.1, beta)
            C1 = assemble_C(bl, 0.1, beta + 2 * math.pi / delta)
            assert np.max(np.abs(C1 - C0)) <= 1e-12 * np.max(np.abs(C0))


def test_irregular_C_not_periodic(exp2):
    bl = exp2["irregular"][2]
    C0 = assemble_C(bl, 0.0, 20.0)
    C1 = assemble_C(bl, 0.0, 20.0 + 10 * math.pi)
    assert np.max(np.abs(C1 - C0)) > 1e-3 * np.max(np.abs(C0))


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(-2, 2), beta=st.floats(-60, 60))
def test_symmetry_and_psd(exp2_blocks, alpha, beta):
    for bl in exp2_blocks:
        C = assemble_C(bl, alpha, beta)
        Cm = assemble_C(bl, alpha, -beta)
        scale = np.max(np.abs(C))
        assert np.max(np.abs(Cm - C.conj())) <= 1e-13 * scale
        w = np.linalg.eigvalsh(C)
        assert w[0] >= -1e-10 * max(1.0, w[-1])
        assert loss_only(bl, alpha, -beta) == pytest.approx(loss_only(bl, alpha, beta), rel=1e-10, abs=1e-14 * scale)


@pytest.fixture(scope="module")
def exp2_blocks(exp2):
    return [v[2] for v in exp2.values()]


def test_phase_alignment_slope_is_linear(exp2):
    bl = exp2["regular0.2"][2]
    beta_true = 50.0
    eps = np.array([1e-4, 2e-4, 4e-4, 8e-4])
    g = np.array([loss_and_gradient(bl, 0.0, beta_true + e).grad_beta for e in eps])
    assert np.all(g > 0)
    slopes = g / eps
    assert np.max(slopes) / np.min(slopes) < 1.05


def test_steeper_valley_for_larger_intervals(exp2):
    # the gradient term scales with interval**2 near the truth
    eps = 1e-3
    g_coarse = loss_and_gradient(exp2["regular0.2"][2], 0.0, 50.0 + eps).grad_beta
    g_fine = loss_and_gradient(exp2["regular0.01"][2], 0.0, 50.0 + eps).grad_beta
    assert g_coarse > 10 * g_fine


def test_loss_is_smooth_along_segment(exp1):
    bl = exp1[0.25][2]
    alphas = np.linspace(-2.0, -1.0, 201)
    ev = [loss_and_gradient(bl, a, 0.4) for a in alphas]
    assert min(e.gap for e in ev) > 1e-8
    vals = np.array([e.loss for e in ev])
    h = alphas[1] - alphas[0]
    second = np.diff(vals, 2) / h**2
    assert np.all(np.isfinite(second))
    assert np.max(np.abs(second)) < 1e3 * (np.max(np.abs(vals)) + 1e-12) / h


def test_degenerate_flag():
    gb = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex)
    bl = gram_from_features(gb, gb, np.array([1.0, 1.0]))
    ev = loss_and_gradient(bl, 0.0, 0.0)
    assert ev.degenerate
    assert ev.loss == pytest.approx(0.0, abs=1e-15)


def test_eigenvector_unit_and_phase_fixed(exp1):
    ev = loss_and_gradient(exp1[0.05][2], -1.1, 0.3)
    assert abs(np.linalg.norm(ev.eigvec) - 1) < 1e-12
    k = np.argmax(np.abs(ev.eigvec))
    assert ev.eigvec[k].imag == 0 and ev.eigvec[k].real >= 0


def test_dimension_mismatch(exp1):
    _, ds, _ = exp1[0.5]
    with pytest.raises(InputError):
        precompute_gram(ds, build_monomial_dictionary(3, 2))


def test_klus_fixture_uses_expected_dictionary(exp1):
    cfg, ds, bl = exp1[0.5]
    assert bl.size == 14
    np.testing.assert_array_equal(bl.g_before, evaluate(cfg.dictionary, ds.x_before))
    assert isinstance(cfg.field, KlusSystem)
