"""Benchmark vector fields, RK4 flow integration and transition datasets."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError, IntegrationDiverged, ParseError

# Interval values are rounded to this many decimals so that grids built as
# k*delta collapse to a single interval value despite float differencing.
INTERVAL_DECIMALS = 12


@dataclass(frozen=True)
class KlusSystem:
    """x1' = gamma*x1,  x2' = delta*(x2 - x1**2)."""

    gamma: float = -0.8
    delta: float = -0.7
    state_dim: int = 2

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., 0] = self.gamma * x[..., 0]
        out[..., 1] = self.delta * (x[..., 1] - x[..., 0] ** 2)
        return out

    def eigenfunction_coefficients(self, dictionary):
        """Coefficients of ((2g - d)/d) x2 + x1^2 on ``dictionary`` (unnormalized)."""
        a = np.zeros(dictionary.size, dtype=complex)
        a[dictionary.index_of((0, 1))] = (2 * self.gamma - self.delta) / self.delta
        a[dictionary.index_of((2, 0))] = 1.0
        return a

    def lattice(self, max_order=6):
        """Eigenvalues n*gamma + m*delta, 0 <= n, m <= max_order, not both zero."""
        return np.array(
            sorted(
                {
                    n * self.gamma + m * self.delta
                    for n in range(max_order + 1)
                    for m in range(max_order + 1)
                    if n or m
                }
            ),
            dtype=complex,
        )

    def to_json(self):
        return {"kind": "klus", "gamma": self.gamma, "delta": self.delta}


@dataclass(frozen=True)
class HarmonicOscillator:
    """x1' = -omega*x2,  x2' = omega*x1."""

    omega: float = 50.0
    state_dim: int = 2

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., 0] = -self.omega * x[..., 1]
        out[..., 1] = self.omega * x[..., 0]
        return out

    def hamiltonian(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (x[..., 0] ** 2 + x[..., 1] ** 2)

    def lattice(self, max_order=1):
        """k*i*omega for |k| <= max_order, excluding 0."""
        ks = [k for k in range(-max_order, max_order + 1) if k]
        return np.array([1j * k * self.omega for k in ks])

    def to_json(self):
        return {"kind": "harmonic", "omega": self.omega}


@dataclass(frozen=True)
class CustomField:
    """Wraps a user callback mapping (..., D) states to (..., D) velocities."""

    state_dim: int
    func: Callable = field(compare=False)
    name: str = "custom"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.func(x), dtype=float)
        if out.shape != x.shape:
            raise InputError(
                f"vector field returned shape {out.shape}, expected {x.shape}"
            )
        return out

    def lattice(self, max_order=1):
        return np.array([], dtype=complex)

    def to_json(self):
        return {"kind": "custom", "name": self.name, "state_dim": self.state_dim}


def field_from_json(obj):
    kind = obj.get("kind")
    if kind == "klus":
        return KlusSystem(gamma=float(obj.get("gamma", -0.8)), delta=float(obj.get("delta", -0.7)))
    if kind == "harmonic":
        return HarmonicOscillator(omega=float(obj.get("omega", 50.0)))
    raise InputError(f"unknown vector field kind {kind!r}")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if len(times) < 2:
            raise InputError("a trajectory needs at least two time points")
        if len(states) != len(times):
            raise InputError("times and states have different lengths")
        if np.any(np.diff(times) <= 0):
            raise InputError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return len(self.times)

    @property
    def state_dim(self):
        return self.states.shape[1]


@dataclass(frozen=True)
class TransitionDataset:
    """N transition pairs (x_n, x_{n+1}, Delta_n) grouped by source trajectory.

    Arrays: ``x_before`` and ``x_after`` (N, D); ``t_before``, ``t_after``,
    ``intervals`` and ``traj_id`` (N,).
    """

    x_before: np.ndarray
    x_after: np.ndarray
    t_before: np.ndarray
    t_after: np.ndarray
    traj_id: np.ndarray
    intervals: np.ndarray = None

    def __post_init__(self):
        xb = np.atleast_2d(np.asarray(self.x_before, dtype=float))
        xa = np.atleast_2d(np.asarray(self.x_after, dtype=float))
        tb = np.asarray(self.t_before, dtype=float).reshape(-1)
        ta = np.asarray(self.t_after, dtype=float).reshape(-1)
        ids = np.asarray(self.traj_id, dtype=int).reshape(-1)
        n = len(tb)
        if n == 0:
            raise InputError("dataset has no transition pairs")
        if xb.shape != xa.shape or len(xb) != n or len(ta) != n or len(ids) != n:
            raise InputError("dataset arrays have inconsistent shapes")
        dt = np.round(ta - tb, INTERVAL_DECIMALS)
        if np.any(~(dt > 0)):
            bad = int(np.argmax(~(dt > 0)))
            raise InputError(f"pair {bad} has non-positive interval {dt[bad]!r}")
        for name, val in (("x_before", xb), ("x_after", xa), ("t_before", tb), ("t_after", ta), ("traj_id", ids), ("intervals", dt)):
            object.__setattr__(self, name, val)

    @property
    def pair_count(self):
        return len(self.intervals)

    @property
    def state_dim(self):
        return self.x_before.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TransitionDataset):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("x_before", "x_after", "t_before", "t_after", "traj_id")
        )


def _rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_batch(field, x0, t_grid, substeps_per_interval: int) -> np.ndarray:
    """RK4-integrate a batch of initial states.

    ``x0`` has shape (K, D); returns states of shape (len(t_grid), K, D).
    Each grid interval is split into ``substeps_per_interval`` equal steps.
    """
    t_grid = np.asarray(t_grid, dtype=float).reshape(-1)
    if len(t_grid) < 2:
        raise InputError("t_grid needs at least two points")
    if np.any(np.diff(t_grid) <= 0):
        raise InputError("t_grid must be strictly increasing")
    if substeps_per_interval < 1:
        raise InputError("substeps_per_interval must be >= 1")
    x = np.array(x0, dtype=float, ndmin=2)
    if x.shape[1] != field.state_dim:
        raise InputError(f"x0 has dimension {x.shape[1]}, field expects {field.state_dim}")
    out = np.empty((len(t_grid),) + x.shape)
    out[0] = x
    step = 0
    for k in range(len(t_grid) - 1):
        h = (t_grid[k + 1] - t_grid[k]) / substeps_per_interval
        for s in range(substeps_per_interval):
            with np.errstate(over="ignore", invalid="ignore"):
                x = _rk4_step(field, x, h)
            step += 1
            if not np.all(np.isfinite(x)):
                raise IntegrationDiverged(step, t_grid[k] + (s + 1) * h)
        out[k + 1] = x
    return out


def integrate(field, x0, t_grid, substeps_per_interval: int = 100) -> Trajectory:
    """Approximate the flow map on ``t_grid`` starting from ``x0`` with classical RK4."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    states = integrate_batch(field, x0[None, :], t_grid, substeps_per_interval)
    return Trajectory(np.asarray(t_grid, dtype=float), states[:, 0, :])


def regular_grid(delta: float, horizon: float) -> np.ndarray:
    if not (delta > 0 and horizon > 0):
        raise InputError("delta and horizon must be positive")
    if horizon < delta:
        raise InputError(f"horizon {horizon} is shorter than delta {delta}")
    count = int(math.floor(horizon / delta + 1e-9))
    return delta * np.arange(count + 1)


def sample_regular(field, x0, delta: float, horizon: float, substeps: int = 100) -> Trajectory:
    """Trajectory observed at 0, delta, 2*delta, ..., floor(horizon/delta)*delta."""
    return integrate(field, x0, regular_grid(delta, horizon), substeps)


def sample_regular_many(field, x0s, delta, horizon, substeps=100) -> list[Trajectory]:
    """Vectorized ``sample_regular`` over several initial states."""
    grid = regular_grid(delta, horizon)
    x0s = np.array(x0s, dtype=float, ndmin=2)
    if len(x0s) == 0:
        return []
    states = integrate_batch(field, x0s, grid, substeps)
    return [Trajectory(grid, states[:, i, :]) for i in range(len(x0s))]


def subsample_irregular(traj: Trajectory, keep_count: int, seed) -> Trajectory:
    """Keep ``keep_count`` observations chosen uniformly without replacement."""
    n = len(traj)
    if keep_count < 2:
        raise InputError("keep_count must be >= 2")
    if keep_count > n:
        raise InputError(f"cannot keep {keep_count} of {n} observations")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=keep_count, replace=False))
    return Trajectory(traj.times[idx], traj.states[idx])


def build_dataset(trajs) -> TransitionDataset:
    """Consecutive-observation pairs within each trajectory."""
    trajs = list(trajs)
    if not trajs:
        raise InputError("no trajectories supplied")
    dims = {t.state_dim for t in trajs}
    if len(dims) != 1:
        raise InputError(f"trajectories have mixed state dimensions {sorted(dims)}")
    return TransitionDataset(
        x_before=np.concatenate([t.states[:-1] for t in trajs]),
        x_after=np.concatenate([t.states[1:] for t in trajs]),
        t_before=np.concatenate([t.times[:-1] for t in trajs]),
        t_after=np.concatenate([t.times[1:] for t in trajs]),
        traj_id=np.concatenate([np.full(len(t) - 1, i) for i, t in enumerate(trajs)]),
    )


def sample_initial_states(count: int, box_lo, box_hi, seed) -> np.ndarray:
    """``count`` i.i.d. uniform points in the box [box_lo, box_hi]; shape (count, D)."""
    lo = np.asarray(box_lo, dtype=float).reshape(-1)
    hi = np.asarray(box_hi, dtype=float).reshape(-1)
    if lo.shape != hi.shape or np.any(~(lo < hi)):
        raise InputError("box_lo must be strictly below box_hi in every component")
    if count < 0:
        raise InputError("count must be non-negative")
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=(count, len(lo)))


def split_seed(seed: int, count: int) -> list[int]:
    """Derive ``count`` independent 64-bit child seeds from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _fmt(v):
    return format(float(v), ".17g")


def dataset_to_csv(dataset: TransitionDataset, metadata=None) -> str:
    buf = io.StringIO()
    for key, val in (metadata or {}).items():
        buf.write(f"# {key}: {val}\n")
    d = dataset.state_dim
    header = ["traj_id", "t_before", "t_after"]
    header += [f"x_before_{j + 1}" for j in range(d)]
    header += [f"x_after_{j + 1}" for j in range(d)]
    buf.write(",".join(header) + "\n")
    for n in range(dataset.pair_count):
        row = [str(int(dataset.traj_id[n])), _fmt(dataset.t_before[n]), _fmt(dataset.t_after[n])]
        row += [_fmt(v) for v in dataset.x_before[n]]
        row += [_fmt(v) for v in dataset.x_after[n]]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def write_dataset(path, dataset: TransitionDataset, metadata=None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dataset_to_csv(dataset, metadata))


def read_dataset(path) -> TransitionDataset:
    with open(path, encoding="utf-8") as fh:
        return dataset_from_csv(fh.read())


def dataset_from_csv(text: str) -> TransitionDataset:
    header = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cells = next(csv.reader([line]))
        if header is None:
            header = [c.strip() for c in cells]
            header_line = lineno
            continue
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} columns, found {len(cells)}", lineno)
        try:
            rows.append((lineno, [float(c) for c in cells]))
        except ValueError:
            raise ParseError("non-numeric value", lineno) from None
    if header is None:
        raise ParseError("missing header row")
    for col in ("traj_id", "t_before", "t_after"):
        if col not in header:
            raise ParseError(f"missing column '{col}'", header_line)
    d = sum(1 for h in header if h.startswith("x_before_"))
    xb_cols = [f"x_before_{j + 1}" for j in range(d)]
    xa_cols = [f"x_after_{j + 1}" for j in range(d)]
    for col in xb_cols + xa_cols:
        if col not in header:
            raise ParseError(f"missing column '{col}'", header_line)
    if d == 0:
        raise ParseError("no state columns", header_line)
    if not rows:
        raise ParseError("no data rows")
    pos = {h: i for i, h in enumerate(header)}
    for lineno, vals in rows:
        if not np.round(vals[pos["t_after"]] - vals[pos["t_before"]], INTERVAL_DECIMALS) > 0:
            raise ParseError("non-positive interval", lineno)
    data = np.array([v for _, v in rows])
    return TransitionDataset(
        x_before=data[:, [pos[c] for c in xb_cols]],
        x_after=data[:, [pos[c] for c in xa_cols]],
        t_before=data[:, pos["t_before"]],
        t_after=data[:, pos["t_after"]],
        traj_id=data[:, pos["traj_id"]].astype(int),
    )
