"""Monomial observable dictionaries G: R^D -> C^M.

Terms are stored as exponent tuples in graded lexicographic order
(ascending total degree, then descending lexicographic on the exponents,
so ``x1`` precedes ``x2`` and ``x1**2`` precedes ``x1*x2``).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Dictionary:
    """Ordered family of real monomials.

    Attributes
    ----------
    state_dim : int
        Dimension D of the state space.
    terms : tuple of tuple of int
        One exponent tuple of length D per observable.
    max_degree : int
        Largest total degree present.
    include_constant : bool
        Whether the degree-0 term is part of the family.
    """

    state_dim: int
    terms: tuple
    max_degree: int
    include_constant: bool = False

    def __post_init__(self):
        if self.state_dim < 1:
            raise InputError("state_dim must be >= 1")
        terms = tuple(tuple(int(e) for e in t) for t in self.terms)
        if not terms:
            raise InputError("dictionary needs at least one term")
        for t in terms:
            if len(t) != self.state_dim:
                raise InputError(f"term {t} does not have length {self.state_dim}")
            if any(e < 0 for e in t):
                raise InputError(f"term {t} has a negative exponent")
            if sum(t) == 0 and not self.include_constant:
                raise InputError("constant term present but include_constant is False")
        if len(set(terms)) != len(terms):
            raise InputError("dictionary terms must be distinct")
        object.__setattr__(self, "terms", terms)

    @property
    def size(self) -> int:
        return len(self.terms)

    @property
    def exponents(self) -> np.ndarray:
        """Integer array of shape (M, D)."""
        return np.array(self.terms, dtype=int).reshape(self.size, self.state_dim)

    @property
    def degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1)

    def labels(self) -> list[str]:
        """Human readable term names such as ``x1^2*x2``."""
        out = []
        for t in self.terms:
            parts = []
            for j, e in enumerate(t):
                if e == 1:
                    parts.append(f"x{j + 1}")
                elif e > 1:
                    parts.append(f"x{j + 1}^{e}")
            out.append("*".join(parts) if parts else "1")
        return out

    def index_of(self, exponents) -> int:
        return self.terms.index(tuple(int(e) for e in exponents))

    def to_json(self) -> dict:
        return {
            "state_dim": self.state_dim,
            "include_constant": self.include_constant,
            "max_degree": self.max_degree,
            "terms": [list(t) for t in self.terms],
        }

    @classmethod
    def from_json(cls, obj) -> "Dictionary":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            return cls(
                state_dim=int(obj["state_dim"]),
                terms=tuple(tuple(t) for t in obj["terms"]),
                max_degree=int(obj["max_degree"]),
                include_constant=bool(obj.get("include_constant", False)),
            )
        except KeyError as exc:
            raise InputError(f"dictionary JSON missing key {exc}") from None


def _graded_lex(state_dim, degree):
    # compositions of `degree` into state_dim parts, x1-heavy first
    for combo in itertools.combinations_with_replacement(range(state_dim), degree):
        exps = [0] * state_dim
        for j in combo:
            exps[j] += 1
        yield tuple(exps)


def build_monomial_dictionary(state_dim: int, max_degree: int, include_constant: bool = False) -> Dictionary:
    """All monomials in ``state_dim`` variables of total degree 1..max_degree.

    The constant monomial is prepended when ``include_constant`` is set.
    """
    if state_dim < 1 or max_degree < 1:
        raise InputError("state_dim and max_degree must be >= 1")
    start = 0 if include_constant else 1
    terms = []
    for d in range(start, max_degree + 1):
        terms.extend(_graded_lex(state_dim, d))
    return Dictionary(state_dim, tuple(terms), max_degree, include_constant)


def _as_points(dictionary, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dictionary.state_dim:
        raise InputError(
            f"state has dimension {x.shape[-1]}, dictionary expects {dictionary.state_dim}"
        )
    return x


def evaluate(dictionary: Dictionary, x) -> np.ndarray:
    """Evaluate every term at ``x``.

    ``x`` may be a single state of shape (D,) or a batch of shape (..., D);
    the result has shape (..., M) and complex dtype with zero imaginary part.
    """
    x = _as_points(dictionary, x)
    powers = x[..., None, :] ** dictionary.exponents
    return np.prod(powers, axis=-1).astype(complex)


def evaluate_jacobian(dictionary: Dictionary, x) -> np.ndarray:
    """Analytic Jacobian dG/dx of shape (..., M, D)."""
    x = _as_points(dictionary, x)
    E = dictionary.exponents
    M, D = E.shape
    out = np.empty(x.shape[:-1] + (M, D))
    for j in range(D):
        lowered = E.copy()
        lowered[:, j] = np.maximum(E[:, j] - 1, 0)
        vals = np.prod(x[..., None, :] ** lowered, axis=-1)
        out[..., j] = E[:, j] * vals
    return out
