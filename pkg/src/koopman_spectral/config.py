"""Experiment configuration (a single versioned JSON document)."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass

from .dictionary import Dictionary, build_monomial_dictionary
from .errors import ConfigError, InputError
from .gedmd import EXACT, FINITE_DIFFERENCE
from .landscape import EIGEN_LOSS, SweepSpec
from .optimizer import OptimConfig, init_grid
from .simulation import field_from_json

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "name": "experiment",
    "seed": 0,
    "system": {"kind": "klus", "gamma": -0.8, "delta": -0.7},
    "dictionary": {"max_degree": 4, "include_constant": False, "terms": None, "state_dim": None},
    "sampling": {
        "mode": "regular",
        "delta": 0.05,
        "horizon": 4.0,
        "trajectory_count": 20,
        "keep_count": None,
        "box_lo": [-2.0, -2.0],
        "box_hi": [2.0, 2.0],
        "max_substep": 2.5e-4,
    },
    "init_grid": {"alpha_range": [-3.0, 1.0], "beta_range": [-1.0, 1.0], "n_alpha": 4, "n_beta": 4, "points": None},
    "optim": {},
    "sweep": {"alpha_fixed": 0.0, "beta_range": [-60.0, 60.0], "resolution": 2001, "mode": EIGEN_LOSS, "period": None},
    "gedmd": {"modes": [EXACT, FINITE_DIFFERENCE], "max_degree": None},
    "analysis": {"cluster_radius": 1e-3, "lattice_order": 6, "reference_eigenvalues": None},
}

SAMPLING_MODES = ("regular", "irregular-subset")


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(where, "unknown field")
        if isinstance(base[key], dict) and key not in ("optim", "system"):
            if not isinstance(val, dict):
                raise ConfigError(where, "expected an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _num(obj, key, where, positive=False, integer=False, allow_none=False):
    val = obj.get(key)
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(where + key, "expected a number")
    if integer and int(val) != val:
        raise ConfigError(where + key, "expected an integer")
    if not math.isfinite(val):
        raise ConfigError(where + key, "must be finite")
    if positive and not val > 0:
        raise ConfigError(where + key, "must be positive")
    return int(val) if integer else float(val)


def _range(obj, key, where):
    val = obj.get(key)
    if not isinstance(val, (list, tuple)) or len(val) != 2:
        raise ConfigError(where + key, "expected [lo, hi]")
    lo, hi = (float(v) for v in val)
    if not lo <= hi:
        raise ConfigError(where + key, "lo must not exceed hi")
    return lo, hi


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; ``raw`` is the canonical JSON form."""

    raw: dict

    @classmethod
    def from_json(cls, obj) -> "ExperimentConfig":
        if isinstance(obj, str):
            try:
                obj = json.loads(obj)
            except json.JSONDecodeError as exc:
                raise ConfigError("<document>", f"invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise ConfigError("<document>", "expected a JSON object")
        version = obj.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {version!r}")
        cfg = cls(_merge(DEFAULTS, obj))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
        return cls.from_json(text)

    def with_seed(self, seed) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        raw["seed"] = int(seed)
        return ExperimentConfig.from_json(raw)

    def validate(self):
        r = self.raw
        if not isinstance(r["seed"], int) or isinstance(r["seed"], bool) or not 0 <= r["seed"] < 2**64:
            raise ConfigError("seed", "expected an unsigned 64-bit integer")
        self.field
        self.dictionary
        s = r["sampling"]
        if s["mode"] not in SAMPLING_MODES:
            raise ConfigError("sampling.mode", f"expected one of {SAMPLING_MODES}")
        delta = _num(s, "delta", "sampling.", positive=True)
        horizon = _num(s, "horizon", "sampling.", positive=True)
        if horizon < delta:
            raise ConfigError("sampling.horizon", "must be at least sampling.delta")
        _num(s, "trajectory_count", "sampling.", positive=True, integer=True)
        _num(s, "max_substep", "sampling.", positive=True)
        if s["mode"] == "irregular-subset":
            keep = _num(s, "keep_count", "sampling.", integer=True)
            if keep < 2:
                raise ConfigError("sampling.keep_count", "must be >= 2")
            if keep > int(math.floor(horizon / delta + 1e-9)) + 1:
                raise ConfigError("sampling.keep_count", "exceeds the number of fine-grid observations")
        lo, hi = s["box_lo"], s["box_hi"]
        dim = self.state_dim
        if not (isinstance(lo, list) and isinstance(hi, list) and len(lo) == len(hi) == dim):
            raise ConfigError("sampling.box_lo", f"box corners must have length {dim}")
        if any(not a < b for a, b in zip(lo, hi)):
            raise ConfigError("sampling.box_hi", "must exceed box_lo componentwise")
        self.init_points
        self.optim
        self.sweep
        modes = r["gedmd"]["modes"]
        if not isinstance(modes, list) or any(m not in (EXACT, FINITE_DIFFERENCE) for m in modes):
            raise ConfigError("gedmd.modes", f"entries must be {EXACT!r} or {FINITE_DIFFERENCE!r}")
        _num(r["gedmd"], "max_degree", "gedmd.", positive=True, integer=True, allow_none=True)
        a = r["analysis"]
        _num(a, "cluster_radius", "analysis.", positive=True)
        _num(a, "lattice_order", "analysis.", integer=True)

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def name(self) -> str:
        return str(self.raw["name"])

    @property
    def sampling(self) -> dict:
        return self.raw["sampling"]

    @property
    def state_dim(self) -> int:
        f = self.field
        if f is not None:
            return f.state_dim
        return int(self.raw["dictionary"].get("state_dim") or 2)

    @property
    def field(self):
        if self.raw["system"] is None:
            return None
        try:
            return field_from_json(self.raw["system"])
        except (InputError, TypeError, ValueError) as exc:
            raise ConfigError("system", str(exc)) from None

    @property
    def dictionary(self) -> Dictionary:
        d = self.raw["dictionary"]
        try:
            if d.get("terms") is not None:
                terms = tuple(tuple(t) for t in d["terms"])
                include = any(sum(t) == 0 for t in terms)
                return Dictionary(self.state_dim, terms, max(sum(t) for t in terms), include)
            deg = _num(d, "max_degree", "dictionary.", positive=True, integer=True)
            return build_monomial_dictionary(self.state_dim, deg, bool(d.get("include_constant", False)))
        except InputError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("dictionary", str(exc)) from None

    @property
    def gedmd_dictionary(self) -> Dictionary:
        deg = self.raw["gedmd"].get("max_degree")
        if deg is None:
            return self.dictionary
        return build_monomial_dictionary(self.state_dim, int(deg), False)

    @property
    def reference_eigenvalues(self) -> list:
        ref = self.raw["analysis"].get("reference_eigenvalues")
        if ref is None:
            return []
        return [complex(float(re), float(im)) for re, im in ref]

    @property
    def init_points(self) -> list:
        g = self.raw["init_grid"]
        if g.get("points") is not None:
            pts = g["points"]
            if not isinstance(pts, list) or any(not isinstance(p, list) or len(p) != 2 for p in pts):
                raise ConfigError("init_grid.points", "expected a list of [alpha, beta] pairs")
            out = [(float(a), float(b)) for a, b in pts]
        else:
            n_a = _num(g, "n_alpha", "init_grid.", integer=True)
            n_b = _num(g, "n_beta", "init_grid.", integer=True)
            if n_a < 0 or n_b < 0:
                raise ConfigError("init_grid.n_alpha", "must be non-negative")
            out = init_grid(_range(g, "alpha_range", "init_grid."), _range(g, "beta_range", "init_grid."), n_a, n_b)
        return out

    @property
    def optim(self) -> OptimConfig:
        try:
            return OptimConfig.from_json(self.raw["optim"])
        except ConfigError as exc:
            if exc.field.startswith("optim."):
                raise
            raise ConfigError("optim." + exc.field, str(exc).split(": ", 1)[-1]) from None
        except TypeError as exc:
            raise ConfigError("optim", str(exc)) from None

    @property
    def sweep(self) -> SweepSpec:
        w = self.raw["sweep"]
        try:
            return SweepSpec(
                alpha_fixed=_num(w, "alpha_fixed", "sweep."),
                beta_range=_range(w, "beta_range", "sweep."),
                resolution=_num(w, "resolution", "sweep.", integer=True),
                mode=w["mode"],
            )
        except InputError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("sweep", str(exc)) from None

    @property
    def sweep_period(self):
        p = self.raw["sweep"].get("period")
        if p is not None:
            return _num(self.raw["sweep"], "period", "sweep.", positive=True)
        if self.sampling["mode"] == "regular":
            return 2 * math.pi / float(self.sampling["delta"])
        return None

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def metadata(self) -> dict:
        return {"config": self.name, "config_hash": self.config_hash, "seed": self.seed}


def exp1_configs(seed: int = 0) -> list[ExperimentConfig]:
    """Nonlinear Klus system under coarse regular sampling, one config per interval."""
    out = []
    for delta in (0.05, 0.25, 0.5):
        out.append(
            ExperimentConfig.from_json(
                {
                    "name": f"exp1-delta{delta}",
                    "seed": seed,
                    "system": {"kind": "klus", "gamma": -0.8, "delta": -0.7},
                    "dictionary": {"max_degree": 4, "include_constant": False},
                    "sampling": {"mode": "regular", "delta": delta, "horizon": 4.0, "trajectory_count": 20},
                    "init_grid": {"alpha_range": [-3.0, 1.0], "beta_range": [-1.0, 1.0], "n_alpha": 4, "n_beta": 4},
                    "optim": {"loss_tol": 1e-13, "grad_tol": 1e-10},
                    "sweep": {"alpha_fixed": -0.7, "beta_range": [-30.0, 30.0], "resolution": 2001},
                    "analysis": {"cluster_radius": 1e-2, "lattice_order": 6, "reference_eigenvalues": [[-0.8, 0.0], [-0.7, 0.0]]},
                }
            )
        )
    return out


def exp2_configs(seed: int = 0) -> list[ExperimentConfig]:
    """Harmonic oscillator, omega = 50: regular 0.01, regular 0.2, irregular 20 of 401."""
    period = 2 * math.pi / 0.2
    common = {
        "seed": seed,
        "system": {"kind": "harmonic", "omega": 50.0},
        "dictionary": {"max_degree": 1, "include_constant": False},
        "init_grid": {"alpha_range": [-2.0, 2.0], "beta_range": [-60.0, 60.0], "n_alpha": 5, "n_beta": 5},
        "sweep": {"alpha_fixed": 0.0, "beta_range": [-60.0, 60.0], "resolution": 20001, "period": period},
        "gedmd": {"modes": [EXACT, FINITE_DIFFERENCE], "max_degree": 2},
        "analysis": {"cluster_radius": 1e-1, "lattice_order": 1, "reference_eigenvalues": [[0.0, 50.0], [0.0, -50.0]]},
    }
    runs = [
        ("exp2-regular0.01", {"mode": "regular", "delta": 0.01, "horizon": 4.0, "trajectory_count": 1}),
        ("exp2-regular0.2", {"mode": "regular", "delta": 0.2, "horizon": 4.0, "trajectory_count": 1}),
        ("exp2-irregular20of401", {"mode": "irregular-subset", "delta": 0.01, "horizon": 4.0, "trajectory_count": 1, "keep_count": 20}),
    ]
    return [ExperimentConfig.from_json({"name": name, "sampling": sampling, **common}) for name, sampling in runs]
