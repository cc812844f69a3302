"""Hinge-product basis functions shared by all MARS-style fitters.

A basis function is a product of hinge terms ``max(0, +/-(x_j - c))``; the
empty product is the constant function 1. Knots are always copied verbatim
from observed covariate values, so basis functions compare with exact knot
equality and can be deduplicated across bootstrap replicates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HingeTerm",
    "BasisFunction",
    "BasisCollection",
    "CONSTANT",
    "hinge_eval",
    "basis_eval",
    "basis_equal",
    "design_column",
    "design_matrix",
]


@dataclass(frozen=True, order=True)
class HingeTerm:
    """One hinge factor: ``max(0, x[j] - knot)`` for sign +1, mirrored for -1."""

    variable_index: int
    sign: int
    knot: float

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if self.variable_index < 0:
            raise ValueError(f"variable_index must be >= 0, got {self.variable_index}")
        if not np.isfinite(self.knot):
            raise ValueError(f"knot must be finite, got {self.knot}")


def hinge_eval(term: HingeTerm, x) -> float:
    """Evaluate a single hinge term at a length-p point ``x``."""
    x = np.asarray(x, dtype=float)
    if term.variable_index >= x.shape[-1]:
        raise ValueError(
            f"variable_index {term.variable_index} out of range for p={x.shape[-1]}"
        )
    v = x[..., term.variable_index]
    if term.sign == 1:
        return np.maximum(0.0, v - term.knot)
    return np.maximum(0.0, term.knot - v)


def _hinge_column(term: HingeTerm, X: np.ndarray) -> np.ndarray:
    col = X[:, term.variable_index]
    if term.sign == 1:
        return np.maximum(0.0, col - term.knot)
    return np.maximum(0.0, term.knot - col)


@dataclass(frozen=True)
class BasisFunction:
    """Product of hinge terms; ``terms == ()`` is the constant function 1.

    Terms are kept in canonical order (variable, sign, knot) so that equality
    is multiset equality and instances hash consistently.
    """

    terms: tuple[HingeTerm, ...] = ()

    def __post_init__(self):
        canonical = tuple(sorted(self.terms))
        object.__setattr__(self, "terms", canonical)
        seen = [t.variable_index for t in canonical]
        if len(set(seen)) != len(seen):
            raise ValueError(f"repeated variable in basis function: {seen}")

    @property
    def degree(self) -> int:
        return len(self.terms)

    @property
    def variables(self) -> frozenset[int]:
        return frozenset(t.variable_index for t in self.terms)

    @property
    def is_constant(self) -> bool:
        return not self.terms

    def with_term(self, term: HingeTerm) -> "BasisFunction":
        return BasisFunction(self.terms + (term,))

    def __call__(self, x) -> float:
        return basis_eval(self, x)


CONSTANT = BasisFunction()


def basis_eval(b: BasisFunction, x) -> float:
    """Evaluate ``b`` at a single length-p point; empty product gives 1."""
    out = 1.0
    for term in b.terms:
        out *= hinge_eval(term, x)
        if out == 0.0:
            break
    return float(out)


def basis_equal(a: BasisFunction, b: BasisFunction) -> bool:
    """Multiset equality of (variable, sign, knot) triples, knots compared exactly."""
    return a.terms == b.terms


def design_column(b: BasisFunction, X: np.ndarray) -> np.ndarray:
    """Evaluate ``b`` row-wise over an n x p matrix."""
    X = np.asarray(X, dtype=float)
    if b.terms and max(t.variable_index for t in b.terms) >= X.shape[1]:
        raise ValueError("basis function references a variable beyond p")
    col = np.ones(X.shape[0])
    for term in b.terms:
        col = col * _hinge_column(term, X)
    return col


def design_matrix(functions, X: np.ndarray) -> np.ndarray:
    """Stack design columns for a sequence of basis functions, n x len(functions)."""
    X = np.asarray(X, dtype=float)
    if len(functions) == 0:
        return np.empty((X.shape[0], 0))
    return np.column_stack([design_column(b, X) for b in functions])


@dataclass(frozen=True)
class BasisCollection:
    """Deduplicated union of basis functions, constant first.

    ``provenance[i]`` records the bootstrap replicate that first produced
    ``functions[i]`` (-1 for the constant, which every replicate contains).
    """

    functions: tuple[BasisFunction, ...]
    provenance: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.functions or not self.functions[0].is_constant:
            raise ValueError("collection must start with the constant function")
        if len(set(self.functions)) != len(self.functions):
            raise ValueError("collection contains duplicate basis functions")
        if self.provenance and len(self.provenance) != len(self.functions):
            raise ValueError("provenance length must match functions")

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def design_matrix(self, X: np.ndarray) -> np.ndarray:
        return design_matrix(self.functions, X)

    @classmethod
    def from_replicates(cls, replicates) -> "BasisCollection":
        """Union basis functions from (replicate_index, functions) pairs.

        Duplicates are dropped on first-come basis; the constant is pinned to
        position 0 regardless of where it appears.
        """
        functions: list[BasisFunction] = [CONSTANT]
        provenance: list[int] = [-1]
        seen = {CONSTANT}
        for rep_idx, funcs in replicates:
            for f in funcs:
                if f not in seen:
                    seen.add(f)
                    functions.append(f)
                    provenance.append(rep_idx)
        return cls(tuple(functions), tuple(provenance))
