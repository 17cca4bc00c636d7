"""Permutations, their matrix representation, and doubly stochastic matrices.

Indices are 0-based in memory. Text I/O uses 1-based images, one
permutation per line (``2 3 1``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, DomainError, ParseError

DS_TOL = 1e-9


@dataclass(frozen=True)
class Permutation:
    """Bijection on ``{0, ..., m-1}`` stored as its image sequence."""

    map: tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(v) for v in self.map)
        if len(images) == 0:
            raise DomainError("permutation must have size >= 1")
        if sorted(images) != list(range(len(images))):
            raise DomainError(f"not a bijection on 0..{len(images) - 1}: {images}")
        object.__setattr__(self, "map", images)

    @property
    def size(self) -> int:
        return len(self.map)

    def __call__(self, l: int) -> int:
        return self.map[l]

    def __len__(self):
        return len(self.map)

    def __repr__(self):
        return f"Permutation({self.map})"

    @classmethod
    def identity(cls, m: int) -> "Permutation":
        return cls(tuple(range(m)))

    @classmethod
    def from_matrix(cls, M, tol: float = 1e-9) -> "Permutation":
        """Inverse of :func:`matrix_of`; ``M`` must be a 0/1 permutation matrix."""
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {M.shape}")
        if not is_permutation_matrix(M, tol):
            raise DomainError("matrix is not a permutation matrix")
        return cls(tuple(int(r) for r in np.argmax(M, axis=0)))

    def to_line(self) -> str:
        return " ".join(str(v + 1) for v in self.map)

    @classmethod
    def from_line(cls, line: str, lineno=None) -> "Permutation":
        try:
            images = [int(tok) - 1 for tok in line.split()]
        except ValueError:
            raise ParseError(f"non-integer token in permutation line {line.strip()!r}", lineno)
        try:
            return cls(tuple(images))
        except DomainError as exc:
            raise ParseError(str(exc), lineno) from None


def _check_same_size(p: Permutation, q: Permutation):
    if p.size != q.size:
        raise DimensionError(f"permutation sizes differ: {p.size} vs {q.size}")


def compose(p: Permutation, q: Permutation) -> Permutation:
    """``(p o q)(l) = p(q(l))``."""
    _check_same_size(p, q)
    return Permutation(tuple(p.map[x] for x in q.map))


def inverse(p: Permutation) -> Permutation:
    inv = [0] * p.size
    for l, image in enumerate(p.map):
        inv[image] = l
    return Permutation(tuple(inv))


def matrix_of(p: Permutation) -> np.ndarray:
    """Matrix with ``M[p(j), j] = 1``, i.e. ``M e_j = e_{p(j)}``."""
    M = np.zeros((p.size, p.size))
    M[list(p.map), np.arange(p.size)] = 1.0
    return M


def as_square(M, name: str = "matrix") -> np.ndarray:
    """Validate a dense square float matrix with finite entries."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError(f"{name} has non-finite entries")
    return M


def frobenius_inner(A, B) -> float:
    """``<A, B> = trace(A^T B)``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.trace(A.T @ B))


def perm_distance(p1: Permutation, p2: Permutation) -> int:
    """Number of labels assigned differently: ``m - <P1, P2>``."""
    _check_same_size(p1, p2)
    return int(round(p1.size - frobenius_inner(matrix_of(p1), matrix_of(p2))))


def is_doubly_stochastic(M, tol: float = DS_TOL) -> bool:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    if not np.all(np.isfinite(M)) or M.min() < -tol:
        return False
    return bool(
        np.all(np.abs(M.sum(axis=1) - 1.0) <= tol) and np.all(np.abs(M.sum(axis=0) - 1.0) <= tol)
    )


def is_stochastic(M, tol: float = DS_TOL) -> bool:
    """Row-stochastic check (nonnegative, unit row sums)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or not np.all(np.isfinite(M)) or M.min() < -tol:
        return False
    return bool(np.all(np.abs(M.sum(axis=1) - 1.0) <= tol))


def is_permutation_matrix(M, tol: float = 1e-9) -> bool:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    binary = np.abs(M - np.round(M)) <= tol
    return bool(binary.all() and set(np.round(M).ravel()) <= {0.0, 1.0} and is_doubly_stochastic(M, tol))


def random_permutation(rng: np.random.Generator, m: int) -> Permutation:
    """Uniform draw (Fisher-Yates via ``Generator.permutation``)."""
    if m < 1:
        raise DomainError("m must be >= 1")
    return Permutation(tuple(int(v) for v in rng.permutation(m)))
