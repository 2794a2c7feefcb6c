"""Real-weighted Pauli sums and their dense Hermitian realisation.

A ``PauliSum`` is the Hamiltonian representation used everywhere in the package.
Operator strings are written over ``{I, X, Y, Z}`` with site 1 as the leftmost
character, which is also the leftmost tensor factor of the dense matrix.

Dense matrices are built from bit masks: a Pauli string maps the basis state
``|b>`` to ``phase(b) |b XOR flip_mask>``, so every term fills exactly one
entry per column.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Mapping

import numpy as np

from app.errors import ConfigError, DimensionMismatchError, NumericalError, SizeLimitError
from app.utils.logger import setup_logging

logger = setup_logging(__name__, level="INFO")

PAULI_LABELS = "IXYZ"
CANONICAL_TOLERANCE = 1e-12
HERMITIAN_TOLERANCE = 1e-12
IMAGINARY_TOLERANCE = 1e-9
DEFAULT_MAX_DENSE_SITES = int(os.getenv("SCHWINGER_MAX_DENSE_SITES", "12"))

PAULI_MATRICES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, slots=True)
class PauliTerm:
    """One real coefficient times a tensor product of single-site Paulis."""

    coefficient: float
    operators: str

    def __post_init__(self) -> None:
        if isinstance(self.coefficient, (complex, np.complexfloating)):
            raise ConfigError(f"Pauli coefficients must be real, got {self.coefficient!r}")
        value = float(self.coefficient)
        if not math.isfinite(value):
            raise ConfigError(f"Pauli coefficient must be finite, got {value}")
        if not self.operators:
            raise ConfigError("Pauli operator string must not be empty")
        invalid = set(self.operators) - set(PAULI_LABELS)
        if invalid:
            raise ConfigError(f"Unknown Pauli labels {sorted(invalid)} in '{self.operators}'")
        object.__setattr__(self, "coefficient", value)

    @classmethod
    def on_sites(cls, coefficient: float, n_sites: int, operators: Mapping[int, str]) -> PauliTerm:
        """Build a term from a 1-based {site: label} mapping; unspecified sites carry I."""
        labels = ["I"] * n_sites
        for site, label in operators.items():
            if not 1 <= site <= n_sites:
                raise DimensionMismatchError(f"Site {site} outside 1..{n_sites}")
            labels[site - 1] = label
        return cls(coefficient, "".join(labels))

    @property
    def n_sites(self) -> int:
        return len(self.operators)

    @property
    def is_identity(self) -> bool:
        return set(self.operators) == {"I"}

    def masks(self) -> tuple[int, int, int]:
        """Return (flip_mask, sign_mask, y_count); site 1 is the most significant bit."""
        flip = sign = 0
        n_y = 0
        n = len(self.operators)
        for index, label in enumerate(self.operators):
            bit = 1 << (n - 1 - index)
            if label in "XY":
                flip |= bit
            if label in "YZ":
                sign |= bit
            if label == "Y":
                n_y += 1
        return flip, sign, n_y


@dataclass(frozen=True)
class PauliSum:
    """Immutable list of Pauli terms on ``n_sites`` sites."""

    terms: tuple[PauliTerm, ...]
    n_sites: int
    _index: dict[str, float] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        if not isinstance(self.n_sites, (int, np.integer)) or self.n_sites < 1:
            raise ConfigError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        terms = tuple(self.terms)
        for term in terms:
            if term.n_sites != self.n_sites:
                raise DimensionMismatchError(
                    f"Term '{term.operators}' has {term.n_sites} sites, expected {self.n_sites}"
                )
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "n_sites", int(self.n_sites))
        index: dict[str, float] = {}
        for term in terms:
            index[term.operators] = index.get(term.operators, 0.0) + term.coefficient
        object.__setattr__(self, "_index", index)

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------

    @classmethod
    def from_terms(cls, terms: Iterable[PauliTerm], n_sites: int) -> PauliSum:
        """Wrap terms as given (duplicates kept); call canonicalize to merge."""
        return cls(tuple(terms), n_sites)

    @classmethod
    def from_dict(cls, mapping: Mapping[str, float], n_sites: int) -> PauliSum:
        return canonicalize(cls(tuple(PauliTerm(c, s) for s, c in mapping.items()), n_sites))

    @classmethod
    def zero(cls, n_sites: int) -> PauliSum:
        return cls((), n_sites)

    @classmethod
    def identity(cls, n_sites: int, coefficient: float = 1.0) -> PauliSum:
        return canonicalize(cls((PauliTerm(coefficient, "I" * n_sites),), n_sites))

    @classmethod
    def single(cls, label: str, site: int, n_sites: int, coefficient: float = 1.0) -> PauliSum:
        """``coefficient`` times ``label`` acting on one 1-based site."""
        return cls((PauliTerm.on_sites(coefficient, n_sites, {site: label}),), n_sites)

    # ------------------------------------------------------------------
    # Linear combination
    # ------------------------------------------------------------------

    def _check_compatible(self, other: PauliSum) -> None:
        if other.n_sites != self.n_sites:
            raise DimensionMismatchError(
                f"Cannot combine sums on {self.n_sites} and {other.n_sites} sites"
            )

    def __add__(self, other: PauliSum) -> PauliSum:
        if not isinstance(other, PauliSum):
            return NotImplemented
        self._check_compatible(other)
        return canonicalize(PauliSum(self.terms + other.terms, self.n_sites))

    def __sub__(self, other: PauliSum) -> PauliSum:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> PauliSum:
        if isinstance(scalar, (complex, np.complexfloating)):
            raise ConfigError("PauliSum only supports real scalars")
        if not isinstance(scalar, (int, float, np.integer, np.floating)):
            return NotImplemented
        scaled = tuple(PauliTerm(term.coefficient * float(scalar), term.operators) for term in self.terms)
        return canonicalize(PauliSum(scaled, self.n_sites))

    __rmul__ = __mul__

    def __neg__(self) -> PauliSum:
        return (-1.0) * self

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        return iter(self.terms)

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------

    def coefficient(self, operators: str) -> float:
        """Summed coefficient of one operator string (0 when absent)."""
        return self._index.get(operators, 0.0)

    def as_dict(self) -> dict[str, float]:
        return dict(self._index)

    @property
    def dimension(self) -> int:
        return 2**self.n_sites


def canonicalize(pauli_sum: PauliSum) -> PauliSum:
    """Merge duplicate strings, drop |c| <= 1e-12 and sort lexicographically."""
    merged: dict[str, float] = {}
    for term in pauli_sum.terms:
        merged[term.operators] = merged.get(term.operators, 0.0) + term.coefficient
    kept = tuple(
        PauliTerm(coefficient, operators)
        for operators, coefficient in sorted(merged.items())
        if abs(coefficient) > CANONICAL_TOLERANCE
    )
    return PauliSum(kept, pauli_sum.n_sites)


def identity_coefficient(pauli_sum: PauliSum) -> float:
    return pauli_sum.coefficient("I" * pauli_sum.n_sites)


def _check_size(n_sites: int, max_sites: int | None) -> None:
    limit = DEFAULT_MAX_DENSE_SITES if max_sites is None else max_sites
    if n_sites > limit:
        raise SizeLimitError(
            f"Dense realisation of {n_sites} sites (dimension {2**n_sites}) exceeds the limit of {limit} sites"
        )


@lru_cache(maxsize=256)
def _dense_matrix(pauli_sum: PauliSum) -> np.ndarray:
    dim = pauli_sum.dimension
    logger.debug("Building dense %dx%d matrix from %d terms", dim, dim, len(pauli_sum))
    matrix = np.zeros((dim, dim), dtype=complex)
    columns = np.arange(dim, dtype=np.int64)
    for term in pauli_sum.terms:
        flip, sign, n_y = term.masks()
        parity = np.bitwise_count(columns & sign) & 1
        values = term.coefficient * (1j**n_y) * (1 - 2 * parity.astype(float))
        matrix[columns ^ flip, columns] += values
    if not np.allclose(matrix, matrix.conj().T, atol=HERMITIAN_TOLERANCE, rtol=0.0):
        raise NumericalError("Dense realisation is not Hermitian")
    matrix.setflags(write=False)
    return matrix


def to_dense(pauli_sum: PauliSum, *, max_sites: int | None = None) -> np.ndarray:
    """Return the 2^N x 2^N Hermitian matrix of ``pauli_sum`` (read-only, memoised)."""
    _check_size(pauli_sum.n_sites, max_sites)
    return _dense_matrix(canonicalize(pauli_sum))


def expectation(pauli_sum: PauliSum, rho) -> float:
    """Tr[rho H] for a DensityMatrix (or a raw square array) ``rho``."""
    matrix = np.asarray(getattr(rho, "matrix", rho))
    dim = pauli_sum.dimension
    if matrix.shape != (dim, dim):
        raise DimensionMismatchError(
            f"State of shape {matrix.shape} does not match a {pauli_sum.n_sites}-site operator"
        )
    value = np.einsum("ij,ji->", matrix, to_dense(pauli_sum))
    if abs(value.imag) > IMAGINARY_TOLERANCE:
        raise NumericalError(f"Expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def format_terms(pauli_sum: PauliSum) -> str:
    """Term-dump text: one ``<coefficient> <string>`` line per term."""
    return "\n".join(f"{term.coefficient!r} {term.operators}" for term in pauli_sum.terms)


def parse_terms(text: str) -> PauliSum:
    terms: list[PauliTerm] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"Line {line_no}: expected '<coefficient> <string>', got '{line}'")
        try:
            coefficient = float(parts[0])
        except ValueError as exc:
            raise ConfigError(f"Line {line_no}: invalid coefficient '{parts[0]}'") from exc
        terms.append(PauliTerm(coefficient, parts[1].upper()))
    if not terms:
        raise ConfigError("Term dump contains no terms")
    return canonicalize(PauliSum(tuple(terms), terms[0].n_sites))


__all__ = [
    "PAULI_MATRICES",
    "PauliSum",
    "PauliTerm",
    "canonicalize",
    "expectation",
    "format_terms",
    "identity_coefficient",
    "parse_terms",
    "to_dense",
]
