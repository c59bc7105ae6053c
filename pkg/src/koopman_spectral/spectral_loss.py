"""Smallest-eigenvalue loss of C(alpha, beta) and its gradient.

For pairs (x_n, x_{n+1}) with intervals D_n the matrix

    C(l) = 1/N sum_n v_n v_n^H,    v_n = G(x_{n+1}) - exp(l D_n) G(x_n)

is assembled from cached Gram blocks grouped by distinct interval value:

    C = A + sum_d exp(2 alpha d) B_d - sum_d (c_d D_d + (c_d D_d)^H),
    c_d = exp((alpha + i beta) d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import evaluate
from .errors import DivergedScale, InputError, NumericError

# Largest exponent accepted before exp() is treated as a divergence.
_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class GramBlocks:
    """Cached data for repeated evaluation of C(alpha, beta).

    Attributes
    ----------
    A : (M, M) complex
        1/N sum_n G(x_{n+1}) G(x_{n+1})^H.
    B : (K, M, M) complex
        Per distinct interval, 1/N sum G(x_n) G(x_n)^H.
    D : (K, M, M) complex
        Per distinct interval, 1/N sum G(x_n) G(x_{n+1})^H.
    unique_intervals, multiplicities : (K,)
    g_before, g_after : (N, M) complex
        Dictionary evaluated at every pair, used by the gradient.
    intervals : (N,)
    """

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    unique_intervals: np.ndarray
    multiplicities: np.ndarray
    g_before: np.ndarray
    g_after: np.ndarray
    intervals: np.ndarray

    @property
    def size(self):
        return self.A.shape[0]

    @property
    def pair_count(self):
        return len(self.intervals)

    @property
    def max_interval(self):
        return float(self.unique_intervals.max())


def precompute_gram(dataset, dictionary) -> GramBlocks:
    if dataset.state_dim != dictionary.state_dim:
        raise InputError(
            f"dataset state dimension {dataset.state_dim} does not match "
            f"dictionary state dimension {dictionary.state_dim}"
        )
    return gram_from_features(evaluate(dictionary, dataset.x_before), evaluate(dictionary, dataset.x_after), dataset.intervals)


def gram_from_features(g_before, g_after, intervals) -> GramBlocks:
    """Build :class:`GramBlocks` from already evaluated dictionary values."""
    g_before = np.asarray(g_before, dtype=complex)
    g_after = np.asarray(g_after, dtype=complex)
    intervals = np.asarray(intervals, dtype=float).reshape(-1)
    n = len(intervals)
    if n == 0:
        raise InputError("empty dataset")
    uniq, inverse, counts = np.unique(intervals, return_inverse=True, return_counts=True)
    A = g_after.T @ g_after.conj() / n
    A = 0.5 * (A + A.conj().T)
    M = g_before.shape[1]
    B = np.empty((len(uniq), M, M), dtype=complex)
    D = np.empty_like(B)
    for k in range(len(uniq)):
        sel = inverse == k
        gb, ga = g_before[sel], g_after[sel]
        Bk = gb.T @ gb.conj() / n
        B[k] = 0.5 * (Bk + Bk.conj().T)
        D[k] = gb.T @ ga.conj() / n
    return GramBlocks(A, B, D, uniq, counts, g_before, g_after, intervals)


def _check_scale(alpha, intervals):
    worst = 2.0 * alpha * intervals.max() if alpha > 0 else 2.0 * alpha * intervals.min()
    if not np.isfinite(alpha) or worst > _MAX_EXPONENT:
        raise DivergedScale(f"exp(2*alpha*interval) overflows at alpha={alpha!r}")


def assemble_C(blocks: GramBlocks, alpha: float, beta: float) -> np.ndarray:
    """C(alpha, beta) as an exactly Hermitian (M, M) matrix."""
    if not (np.isfinite(alpha) and np.isfinite(beta)):
        raise InputError("alpha and beta must be finite")
    d = blocks.unique_intervals
    _check_scale(alpha, d)
    decay = np.exp(2.0 * alpha * d)
    c = np.exp((alpha + 1j * beta) * d)
    cross = np.tensordot(c, blocks.D, axes=1)
    C = blocks.A + np.tensordot(decay, blocks.B, axes=1) - cross - cross.conj().T
    return 0.5 * (C + C.conj().T)


def dC_dalpha(blocks, alpha, beta):
    d = blocks.unique_intervals
    _check_scale(alpha, d)
    cross = np.tensordot(d * np.exp((alpha + 1j * beta) * d), blocks.D, axes=1)
    out = np.tensordot(2.0 * d * np.exp(2.0 * alpha * d), blocks.B, axes=1) - cross - cross.conj().T
    return 0.5 * (out + out.conj().T)


def dC_dbeta(blocks, alpha, beta):
    d = blocks.unique_intervals
    _check_scale(alpha, d)
    cross = np.tensordot(1j * d * np.exp((alpha + 1j * beta) * d), blocks.D, axes=1)
    out = -cross - cross.conj().T
    return 0.5 * (out + out.conj().T)


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its largest-magnitude entry is real and non-negative."""
    v = np.asarray(v, dtype=complex)
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) == 0:
        return v
    v = v * (abs(v[k]) / v[k])
    v[k] = abs(v[k])
    return v


def smallest_eigenpair(H) -> tuple[float, np.ndarray, float]:
    """Smallest eigenvalue, its phase-fixed unit eigenvector, and the spectral gap.

    The gap is ``inf`` for 1x1 input.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InputError("expected a square matrix")
    scale = np.linalg.norm(H)
    if np.linalg.norm(H - H.conj().T) > 1e-12 * max(scale, np.finfo(float).tiny):
        raise InputError("matrix is not Hermitian")
    try:
        w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Hermitian eigensolver failed: {exc}") from exc
    gap = float(w[1] - w[0]) if len(w) > 1 else float("inf")
    return float(w[0]), fix_phase(V[:, 0]), gap


def gap_threshold(C) -> float:
    return 1e-10 * max(1.0, float(np.trace(C).real))


@dataclass(frozen=True)
class LossEvaluation:
    alpha: float
    beta: float
    loss: float
    eigvec: np.ndarray
    gap: float
    grad_alpha: float
    grad_beta: float
    degenerate: bool

    @property
    def grad(self):
        return np.array([self.grad_alpha, self.grad_beta])

    @property
    def grad_norm(self):
        return float(np.hypot(self.grad_alpha, self.grad_beta))


def pair_gradient(blocks: GramBlocks, alpha, beta, a):
    """Closed-form partial derivatives of a^H C(alpha, beta) a for a fixed ``a``.

    Uses phi_n = a^H G(x_n) and psi_n = exp(alpha D_n) phi_n conj(phi_{n+1}).
    """
    d = blocks.intervals
    _check_scale(alpha, d)
    a_h = np.conj(a)
    phi = blocks.g_before @ a_h
    phi_next = blocks.g_after @ a_h
    growth = np.exp(alpha * d)
    rot = np.exp(1j * beta * d)
    cross = phi * np.conj(phi_next)
    n = len(d)
    g_alpha = 2.0 / n * np.sum(d * growth * (growth * np.abs(phi) ** 2 - np.real(rot * cross)))
    psi = growth * cross
    g_beta = 2.0 / n * np.sum(np.imag(d * psi * rot))
    return float(g_alpha), float(g_beta)


def fixed_coefficient_loss(blocks, alpha, beta, a) -> float:
    """a^H C(alpha, beta) a for a unit vector ``a``."""
    a = np.asarray(a, dtype=complex)
    return float(np.real(np.conj(a) @ assemble_C(blocks, alpha, beta) @ a))


def loss_only(blocks, alpha, beta) -> float:
    C = assemble_C(blocks, alpha, beta)
    return float(np.linalg.eigvalsh(C)[0])


def loss_and_gradient(blocks: GramBlocks, alpha: float, beta: float) -> LossEvaluation:
    """Loss lambda_min(C(alpha, beta)) with its eigenvector and gradient.

    When the spectral gap falls below ``1e-10 * max(1, trace C)`` the
    ``degenerate`` flag is set and the gradient should not be trusted.
    """
    alpha = float(alpha)
    beta = float(beta)
    C = assemble_C(blocks, alpha, beta)
    loss, u, gap = smallest_eigenpair(C)
    g_alpha, g_beta = pair_gradient(blocks, alpha, beta, u)
    degenerate = gap <= gap_threshold(C)
    return LossEvaluation(alpha, beta, loss, u, gap, g_alpha, g_beta, degenerate)
