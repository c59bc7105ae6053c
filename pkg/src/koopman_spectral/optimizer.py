"""Hybrid gradient-descent / golden-section minimization of the eigen-loss.

Each iteration takes an Armijo-backtracked step along the normalized negative
gradient, with the frequency displacement capped so that an iterate cannot
hop to an alias under regular sampling.  When the step is rejected or the
spectral gap is too small for the gradient to be trusted, a derivative-free
golden-section search along each coordinate axis takes over.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError, DivergedScale
from .spectral_loss import assemble_C, loss_and_gradient, smallest_eigenpair

CONVERGED_LOSS = "converged-by-loss"
CONVERGED_GRADIENT = "converged-by-gradient"
MAX_ITERS = "max-iters"
STALLED = "stalled-degenerate"
DIVERGED = "diverged"

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimConfig:
    """Optimizer settings.

    ``max_step_beta=None`` means pi / max(interval), i.e. half an alias period.
    ``stall_loss`` separates a stationary point that counts as a minimum
    (converged-by-gradient) from a plateau (stalled-degenerate).
    """

    max_iters: int = 5000
    grad_tol: float = 1e-8
    loss_tol: float = 1e-10
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    init_step: float = 1.0
    max_step_beta: float | None = None
    line_search_tol: float = 1e-10
    line_search_max_evals: int = 200
    stall_loss: float = 1e-8
    min_step: float = 1e-14

    def __post_init__(self):
        for name in ("max_iters", "grad_tol", "loss_tol", "init_step", "line_search_tol", "line_search_max_evals", "min_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be positive")
        for name in ("armijo_c", "backtrack_factor"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(name, "must lie in (0, 1)")
        if self.max_step_beta is not None and not self.max_step_beta > 0:
            raise ConfigError("max_step_beta", "must be positive")
        if self.stall_loss < 0:
            raise ConfigError("stall_loss", "must be non-negative")

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj or {})
        known = set(cls.__dataclass_fields__)
        for key in obj:
            if key not in known:
                raise ConfigError(f"optim.{key}", "unknown field")
        if obj.get("max_step_beta") in ("inf", float("inf")):
            obj["max_step_beta"] = float("inf")
        return cls(**obj)


@dataclass(frozen=True)
class EigenCandidate:
    alpha: float
    beta: float
    a: np.ndarray

    @property
    def eigenvalue(self) -> complex:
        return complex(self.alpha, self.beta)


@dataclass
class OptimResult:
    init: tuple
    candidate: EigenCandidate
    loss: float
    status: str
    trace: list = field(default_factory=list)
    fallback_count: int = 0

    @property
    def eigenvalue(self) -> complex:
        return self.candidate.eigenvalue

    @property
    def converged(self) -> bool:
        return self.status in (CONVERGED_LOSS, CONVERGED_GRADIENT)


def beta_step_cap(blocks, config: OptimConfig) -> float:
    if config.max_step_beta is None:
        return math.pi / blocks.max_interval
    return config.max_step_beta


def _safe_eval(blocks, alpha, beta):
    try:
        return loss_and_gradient(blocks, alpha, beta)
    except DivergedScale:
        return None


def _loss_at(blocks, alpha, beta):
    try:
        C = assemble_C(blocks, alpha, beta)
    except DivergedScale:
        return math.inf
    return float(np.linalg.eigvalsh(C)[0])


def golden_section(f, lo, hi, tol, max_evals):
    """Minimize a scalar function on [lo, hi]; returns (x, f(x), evals)."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    while (b - a) > tol and evals < max_evals:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        evals += 1
    if fc <= fd:
        return c, fc, evals
    return d, fd, evals


def _axis_search(blocks, alpha, beta, loss, width, config):
    """Golden-section search along alpha then beta; returns improved (alpha, beta, loss)."""
    best = (alpha, beta, loss)
    improved = False
    for axis in (0, 1):
        a0, b0, l0 = best
        if axis == 0:
            f = lambda s: _loss_at(blocks, s, b0)  # noqa: E731
            x0 = a0
        else:
            f = lambda s: _loss_at(blocks, a0, s)  # noqa: E731
            x0 = b0
        x, fx, _ = golden_section(f, x0 - width, x0 + width, config.line_search_tol, config.line_search_max_evals)
        if fx < l0:
            best = (x, b0, fx) if axis == 0 else (a0, x, fx)
            improved = True
    return best, improved


def _finish(init, ev, status, trace, fallbacks):
    cand = EigenCandidate(ev.alpha, ev.beta, ev.eigvec)
    return OptimResult(tuple(init), cand, ev.loss, status, trace, fallbacks)


def optimize_from(blocks, init, config: OptimConfig | None = None) -> OptimResult:
    """Minimize lambda_min(C(alpha, beta)) starting at ``init = (alpha, beta)``.

    The trace holds one row ``(iter, alpha, beta, loss, grad_norm)`` for the
    starting point and one per accepted move.
    """
    config = config or OptimConfig()
    alpha, beta = (float(v) for v in init)
    if not (math.isfinite(alpha) and math.isfinite(beta)):
        raise ValueError("initial guess must be finite")
    cap = beta_step_cap(blocks, config)
    width = cap if math.isfinite(cap) else math.pi / blocks.max_interval

    ev = _safe_eval(blocks, alpha, beta)
    if ev is None:
        nan = np.full(blocks.size, np.nan, dtype=complex)
        cand = EigenCandidate(alpha, beta, nan)
        return OptimResult(tuple(init), cand, math.inf, DIVERGED, [(0, alpha, beta, math.inf, math.nan)])
    trace = [(0, ev.alpha, ev.beta, ev.loss, ev.grad_norm)]
    fallbacks = 0
    step = config.init_step

    for it in range(1, config.max_iters + 1):
        if ev.loss <= config.loss_tol:
            return _finish(init, ev, CONVERGED_LOSS, trace, fallbacks)
        gnorm = ev.grad_norm
        if not ev.degenerate and gnorm <= config.grad_tol:
            status = CONVERGED_GRADIENT if ev.loss <= config.stall_loss else STALLED
            return _finish(init, ev, status, trace, fallbacks)

        new = None
        if not ev.degenerate:
            direction = -ev.grad
            t = step
            if direction[1] != 0 and math.isfinite(cap):
                t = min(t, cap / abs(direction[1]))
            slope = -gnorm * gnorm
            while t * gnorm >= config.min_step * max(1.0, abs(alpha), abs(beta)):
                cand = _safe_eval(blocks, alpha + t * direction[0], beta + t * direction[1])
                if cand is not None and cand.loss <= ev.loss + config.armijo_c * t * slope and cand.loss < ev.loss:
                    new = cand
                    step = 2.0 * t
                    break
                t *= config.backtrack_factor

        if new is None:
            fallbacks += 1
            (a1, b1, l1), improved = _axis_search(blocks, alpha, beta, ev.loss, width, config)
            if improved:
                new = _safe_eval(blocks, a1, b1)
                step = config.init_step
            if new is None or not new.loss < ev.loss:
                status = CONVERGED_GRADIENT if ev.loss <= config.stall_loss else STALLED
                return _finish(init, ev, status, trace, fallbacks)

        ev = new
        alpha, beta = ev.alpha, ev.beta
        trace.append((it, alpha, beta, ev.loss, ev.grad_norm))

    status = CONVERGED_LOSS if ev.loss <= config.loss_tol else MAX_ITERS
    return _finish(init, ev, status, trace, fallbacks)


def multi_start(blocks, init_grid, config: OptimConfig | None = None, threads: int = 1) -> list[OptimResult]:
    """Run :func:`optimize_from` from every initial guess, preserving order."""
    config = config or OptimConfig()
    inits = [tuple(map(float, p)) for p in init_grid]
    if not inits:
        return []
    if threads == 1 or len(inits) == 1:
        return [optimize_from(blocks, p, config) for p in inits]
    with ThreadPoolExecutor(max_workers=threads or None) as pool:
        return list(pool.map(lambda p: optimize_from(blocks, p, config), inits))


def init_grid(alpha_range, beta_range, n_alpha, n_beta) -> list[tuple]:
    """Uniform grid of initial guesses including the box corners, alpha-major."""
    alphas = np.linspace(alpha_range[0], alpha_range[1], n_alpha)
    betas = np.linspace(beta_range[0], beta_range[1], n_beta)
    return [(float(a), float(b)) for a in alphas for b in betas]


@dataclass(frozen=True)
class SpectrumCluster:
    eigenvalue: complex
    count: int
    best_loss: float
    members: tuple = ()


def cluster_spectrum(results, radius: float, converged_only: bool = True) -> list[SpectrumCluster]:
    """Greedy clustering of learned eigenvalues within ``radius`` in C.

    Results are visited in order of increasing loss, so each cluster's
    representative is its lowest-loss member.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    pool = [(i, r) for i, r in enumerate(results) if r.converged or not converged_only]
    pool.sort(key=lambda ir: (ir[1].loss, ir[0]))
    clusters = []
    for i, r in pool:
        for c in clusters:
            if abs(r.eigenvalue - c["rep"]) <= radius:
                c["members"].append(i)
                break
        else:
            clusters.append({"rep": r.eigenvalue, "loss": r.loss, "members": [i]})
    return [SpectrumCluster(c["rep"], len(c["members"]), c["loss"], tuple(c["members"])) for c in clusters]


def with_overrides(config: OptimConfig, **kw) -> OptimConfig:
    return replace(config, **kw)
