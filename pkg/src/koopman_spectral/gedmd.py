"""Generator EDMD baseline.

Fits the generator matrix L with dG/dt ~= L G on the dictionary span by
Galerkin least squares, L = (dPsi Psi^T)(Psi Psi^T)^+, where the columns of
Psi are dictionary values at the samples and dPsi holds their Lie
derivatives, either from the exact vector field or from forward differences
of the transition pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dictionary import evaluate, evaluate_jacobian
from .errors import InputError, NumericError

EXACT = "exact-vector-field"
FINITE_DIFFERENCE = "finite-difference"
PINV_RCOND = 1e-12


@dataclass(frozen=True)
class GeneratorModel:
    L: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    derivative_mode: str
    rank: int
    warnings: tuple = field(default=())

    def sorted_eigenvalues(self):
        return sort_spectrum(self.eigenvalues)


def sort_spectrum(values):
    values = np.asarray(values, dtype=complex)
    # round away eigensolver noise so conjugate pairs sort stably
    key = np.lexsort((np.round(values.imag, 12), np.round(values.real, 12)))
    return values[key]


def _lie_derivatives(dictionary, states, velocities):
    J = evaluate_jacobian(dictionary, states)
    return np.einsum("nmd,nd->nm", J, velocities)


def fit_gedmd(data, dictionary, field=None, mode: str = EXACT) -> GeneratorModel:
    """Fit the gEDMD generator matrix.

    Parameters
    ----------
    data : TransitionDataset or array of shape (N, D)
        Finite-difference mode needs a dataset (pairs and intervals); exact
        mode accepts either and uses the pre-transition states.
    field : callable, optional
        Vector field, required in exact mode.
    mode : {"exact-vector-field", "finite-difference"}
    """
    if mode not in (EXACT, FINITE_DIFFERENCE):
        raise InputError(f"unknown derivative mode {mode!r}")
    if hasattr(data, "x_before"):
        states = data.x_before
    else:
        states = np.atleast_2d(np.asarray(data, dtype=float))
    if states.shape[1] != dictionary.state_dim:
        raise InputError("sample dimension does not match dictionary")
    if mode == EXACT:
        if field is None:
            raise InputError("exact-vector-field mode requires a vector field")
        velocities = field(states)
    else:
        if not hasattr(data, "x_after"):
            raise InputError("finite-difference mode requires transition pairs")
        velocities = (data.x_after - data.x_before) / data.intervals[:, None]

    n, m = len(states), dictionary.size
    if n < m:
        raise NumericError(f"ill-posed fit: {n} samples for {m} dictionary functions")
    psi = evaluate(dictionary, states).real.T
    dpsi = _lie_derivatives(dictionary, states, velocities).T
    gram = psi @ psi.T / n
    cross = dpsi @ psi.T / n
    gram_pinv = np.linalg.pinv(gram, rcond=PINV_RCOND, hermitian=True)
    sv = np.linalg.svd(gram, compute_uv=False)
    rank = int(np.sum(sv > PINV_RCOND * sv[0]))
    warnings = ()
    if rank < m:
        warnings = (f"Gram matrix rank {rank} < {m}; truncated pseudo-inverse used",)
    L = cross @ gram_pinv
    w, V = np.linalg.eig(L)
    return GeneratorModel(L, w, V, mode, rank, warnings)


@dataclass(frozen=True)
class SpectrumRow:
    eigenvalue: complex
    nearest: complex
    distance: float


def spectrum_report(eigenvalues, analytic) -> list[SpectrumRow]:
    """Match each eigenvalue, sorted by (Re, Im), to its nearest analytic value."""
    vals = sort_spectrum(getattr(eigenvalues, "eigenvalues", eigenvalues))
    analytic = np.asarray(analytic, dtype=complex).reshape(-1)
    if analytic.size == 0:
        raise InputError("analytic eigenvalue set is empty")
    rows = []
    for v in vals:
        k = int(np.argmin(np.abs(analytic - v)))
        rows.append(SpectrumRow(complex(v), complex(analytic[k]), float(abs(analytic[k] - v))))
    return rows
