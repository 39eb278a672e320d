"""Dense matrices over Z_N."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DomainError
from .numtheory import mod_inv


@dataclass(frozen=True)
class ModMatrix:
    rows: int
    cols: int
    entries: tuple  # row-major tuple of row tuples
    modulus: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DomainError("matrix dimensions must be positive")
        if self.modulus < 2:
            raise DomainError("modulus must be >= 2")
        if len(self.entries) != self.rows or any(len(r) != self.cols for r in self.entries):
            raise DomainError("entry shape does not match dimensions")
        if any(not 0 <= x < self.modulus for r in self.entries for x in r):
            raise DomainError("matrix entries must lie in [0, N)")

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[int]], modulus: int) -> "ModMatrix":
        entries = tuple(tuple(x % modulus for x in row) for row in rows)
        if not entries:
            raise DomainError("empty matrix")
        return cls(len(entries), len(entries[0]), entries, modulus)

    @classmethod
    def identity(cls, size: int, modulus: int) -> "ModMatrix":
        return cls.from_rows(([int(i == j) for j in range(size)] for i in range(size)), modulus)

    def __getitem__(self, idx):
        i, j = idx
        return self.entries[i][j]

    def row(self, i: int) -> tuple:
        return self.entries[i]

    def column(self, j: int) -> tuple:
        return tuple(r[j] for r in self.entries)

    def matmul(self, other: "ModMatrix") -> "ModMatrix":
        if self.modulus != other.modulus:
            raise DomainError("matrices over different moduli")
        if self.cols != other.rows:
            raise DomainError(f"shape mismatch {self.rows}x{self.cols} @ {other.rows}x{other.cols}")
        n = self.modulus
        ocols = list(zip(*other.entries))
        return ModMatrix(self.rows, other.cols, tuple(
            tuple(sum(a * b for a, b in zip(row, col)) % n for col in ocols)
            for row in self.entries
        ), n)

    def apply(self, vec: Sequence[int]) -> tuple:
        """Matrix-vector product A*v mod N."""
        if len(vec) != self.cols:
            raise DomainError(f"vector of length {len(vec)} for {self.cols} columns")
        n = self.modulus
        return tuple(sum(a * b for a, b in zip(row, vec)) % n for row in self.entries)

    def __matmul__(self, other):
        if isinstance(other, ModMatrix):
            return self.matmul(other)
        return self.apply(other)

    def is_lower_triangular(self) -> bool:
        return all(self.entries[i][j] == 0
                   for i in range(self.rows) for j in range(i + 1, self.cols))

    def inverse_lower_triangular(self) -> "ModMatrix":
        """Inverse of a square lower-triangular matrix by forward substitution.

        Needs every diagonal entry to be a unit mod N; raises NotInvertible otherwise.
        """
        if self.rows != self.cols:
            raise DomainError("only square matrices can be inverted")
        if not self.is_lower_triangular():
            raise DomainError("matrix is not lower-triangular")
        size, n, L = self.rows, self.modulus, self.entries
        diag_inv = [mod_inv(L[i][i], n) for i in range(size)]
        # column j of the inverse solves L x = e_j
        inv = [[0] * size for _ in range(size)]
        for j in range(size):
            inv[j][j] = diag_inv[j]
            for i in range(j + 1, size):
                acc = sum(L[i][k] * inv[k][j] for k in range(j, i))
                inv[i][j] = -acc * diag_inv[i] % n
        return ModMatrix(size, size, tuple(tuple(r) for r in inv), n)
