"""Loss sweeps along the frequency axis and their aliasing diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .spectral_loss import assemble_C, fixed_coefficient_loss

EIGEN_LOSS = "eigen-loss"
FIXED_COEFFICIENT = "fixed-coefficient"


@dataclass(frozen=True)
class SweepSpec:
    alpha_fixed: float = 0.0
    beta_range: tuple = (-60.0, 60.0)
    resolution: int = 2001
    mode: str = EIGEN_LOSS

    def __post_init__(self):
        lo, hi = self.beta_range
        if not lo < hi:
            raise InputError("beta_range must satisfy lo < hi")
        if self.resolution < 2:
            raise InputError("resolution must be >= 2")
        if self.mode not in (EIGEN_LOSS, FIXED_COEFFICIENT):
            raise InputError(f"unknown sweep mode {self.mode!r}")

    @property
    def betas(self):
        return np.linspace(self.beta_range[0], self.beta_range[1], self.resolution)


@dataclass(frozen=True)
class Curve:
    beta: np.ndarray
    loss: np.ndarray
    mode: str = EIGEN_LOSS
    alpha_fixed: float = 0.0

    @property
    def spacing(self):
        return float(self.beta[1] - self.beta[0])


def sweep_beta(blocks, spec: SweepSpec, a_fixed=None) -> Curve:
    """Evaluate the loss at every grid frequency for fixed ``spec.alpha_fixed``."""
    betas = spec.betas
    if spec.mode == FIXED_COEFFICIENT:
        if a_fixed is None:
            raise InputError("fixed-coefficient mode needs a coefficient vector")
        a = np.asarray(a_fixed, dtype=complex)
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise InputError("a_fixed must have unit norm")
        loss = np.array([fixed_coefficient_loss(blocks, spec.alpha_fixed, b, a) for b in betas])
    else:
        mats = np.stack([assemble_C(blocks, spec.alpha_fixed, b) for b in betas])
        loss = np.linalg.eigvalsh(mats)[:, 0]
    return Curve(betas, loss, spec.mode, spec.alpha_fixed)


def sweep_2d(blocks, alphas, betas) -> np.ndarray:
    """Eigen-loss on an (alpha, beta) grid; shape (len(alphas), len(betas))."""
    out = np.empty((len(alphas), len(betas)))
    for i, a in enumerate(alphas):
        mats = np.stack([assemble_C(blocks, a, b) for b in betas])
        out[i] = np.linalg.eigvalsh(mats)[:, 0]
    return out


def periodicity_defect(curve: Curve, period: float) -> float:
    """max |L(beta + period) - L(beta)| / max |L| over the overlapping grid.

    ``L(beta + period)`` is linearly interpolated from the grid.
    """
    beta, loss = curve.beta, curve.loss
    if not period > 0 or beta[-1] - beta[0] < 2 * period:
        raise InputError("sweep range must cover at least two periods")
    mask = beta + period <= beta[-1]
    shifted = np.interp(beta[mask] + period, beta, loss)
    scale = np.max(np.abs(loss))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(shifted - loss[mask])) / scale)


def symmetry_defect(curve: Curve) -> float:
    """Relative deviation from evenness; the grid must be symmetric about 0."""
    if not np.allclose(curve.beta, -curve.beta[::-1], rtol=0, atol=1e-12 * np.max(np.abs(curve.beta))):
        raise InputError("grid is not symmetric about beta = 0")
    scale = np.max(np.abs(curve.loss))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(curve.loss - curve.loss[::-1])) / scale)


def minima_near_truth(curve: Curve, beta_true: float, window: float) -> tuple[float, float]:
    """Grid argmin of the curve within ``beta_true +/- window``."""
    if not window > abs(curve.spacing):
        raise InputError("window must exceed the grid spacing")
    lo, hi = beta_true - window, beta_true + window
    if lo < curve.beta[0] or hi > curve.beta[-1]:
        raise InputError(
            f"window [{lo:g}, {hi:g}] lies outside the sweep range [{curve.beta[0]:g}, {curve.beta[-1]:g}]"
        )
    mask = (curve.beta >= lo) & (curve.beta <= hi)
    idx = np.flatnonzero(mask)
    k = idx[np.argmin(curve.loss[idx])]
    return float(curve.beta[k]), float(curve.loss[k])


def curve_to_csv(curve: Curve, dataset_id: str, metadata=None) -> str:
    lines = [f"# {k}: {v}" for k, v in (metadata or {}).items()]
    lines.append("beta,loss,mode,alpha_fixed,dataset_id")
    for b, l in zip(curve.beta, curve.loss):
        lines.append(f"{b:.17g},{l:.17g},{curve.mode},{curve.alpha_fixed:.17g},{dataset_id}")
    return "\n".join(lines) + "\n"


def curve_to_svg(curve: Curve, markers=(), width=640, height=360, title="") -> str:
    """Minimal line plot of the curve with vertical markers."""
    pad = 40
    x0, x1 = float(curve.beta[0]), float(curve.beta[-1])
    y0, y1 = float(np.min(curve.loss)), float(np.max(curve.loss))
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    pts = " ".join(f"{sx(b):.2f},{sy(l):.2f}" for b, l in zip(curve.beta, curve.loss))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{pad}" y="{height - 10}" font-size="11">{x0:g}</text>',
        f'<text x="{width - pad}" y="{height - 10}" font-size="11" text-anchor="end">{x1:g}</text>',
        f'<text x="{pad - 4}" y="{pad}" font-size="11" text-anchor="end">{y1:.3g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" font-size="11" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{width / 2}" y="20" font-size="13" text-anchor="middle">{title}</text>',
    ]
    for m in markers:
        if x0 <= m <= x1:
            parts.append(
                f'<line x1="{sx(m):.2f}" y1="{pad}" x2="{sx(m):.2f}" y2="{height - pad}" '
                'stroke="red" stroke-dasharray="4,3"/>'
            )
    parts.append(f'<polyline fill="none" stroke="steelblue" stroke-width="1" points="{pts}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
