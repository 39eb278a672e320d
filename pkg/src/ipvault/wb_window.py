"""Permuted-window white-box RSA and the two attacks that extract its key.

Decryption runs a fixed-window exponentiation (window width 5, table of 32
powers).  The exponent chunks are stored permuted by a secret pi, and the
power table is produced already permuted and masked by an affine map
``A*s + t`` of the powers of ``alpha*c + beta``.  A*M, with M the binomial
matrix of (alpha, beta), exposes pi and the masks directly.

``width`` is a test hook: the production scheme always uses 5.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import AttackInconsistent, DomainError, NotInvertible
from .modmatrix import ModMatrix
from .numtheory import RecoveredKey, RsaPrivateKey, miller_factor, mod_inv, powmod

WIDTH = 5
TABLE = 1 << WIDTH


@dataclass(frozen=True)
class WindowWhiteBox:
    keyname: str
    n: int
    a: ModMatrix
    tprime: tuple
    alpha: int
    beta: int
    dhat: tuple
    r_const: int

    scheme = "window"

    def __post_init__(self):
        size = len(self.tprime)
        if size < 2 or size & (size - 1):
            raise DomainError("table size must be a power of two")
        if (self.a.rows, self.a.cols) != (size, size + 1) or self.a.modulus != self.n:
            raise DomainError("A must be (table) x (table + 1) over Z_N")
        if any(not 0 <= x < size for x in self.dhat):
            raise DomainError("obfuscated chunk out of range")

    @property
    def table_size(self) -> int:
        return len(self.tprime)

    @property
    def width(self) -> int:
        return self.table_size.bit_length() - 1

    def decrypt(self, c: int) -> int:
        return window_decrypt(self, c)


@dataclass(frozen=True)
class WindowSecrets:
    """What the generator hid; only tests and --emit-secrets ever see this."""

    pi: tuple
    rvec: tuple
    d: int


def chunk_count(n: int, width: int = WIDTH) -> int:
    return -(-n.bit_length() // width)


def chunk_key(d: int, count: int, width: int = WIDTH) -> tuple:
    """Little-endian base-2**width digits of ``d``, padded to ``count``."""
    if d < 0 or d >> (width * count):
        raise DomainError(f"{d} does not fit in {count} chunks of {width} bits")
    mask = (1 << width) - 1
    return tuple((d >> (width * i)) & mask for i in range(count))


def reassemble(chunks: Sequence[int], width: int = WIDTH) -> int:
    value = 0
    for ch in reversed(chunks):
        value = (value << width) | ch
    return value


def window_exp(ctable: Sequence[int], dchunks: Sequence[int], n: int) -> int:
    """Left-to-right fixed-window exponentiation from a power table."""
    size = len(ctable)
    if size < 2 or size & (size - 1):
        raise DomainError("table length must be a power of two")
    if not dchunks:
        raise DomainError("empty exponent")
    if any(not 0 <= x < size for x in dchunks):
        raise DomainError("chunk value out of table range")
    m = ctable[dchunks[-1]] % n
    for idx in reversed(dchunks[:-1]):
        m = powmod(m, size, n) * ctable[idx] % n
    return m


def build_M(alpha: int, beta: int, n: int, size: int = TABLE + 1) -> ModMatrix:
    """Lower-triangular M with M[i][j] = C(i, j) alpha^j beta^(i-j)."""
    if n < 2:
        raise DomainError("modulus must be >= 2")
    apow = [powmod(alpha, j, n) for j in range(size)]
    bpow = [powmod(beta, j, n) for j in range(size)]
    rows = [[math.comb(i, j) * apow[j] * bpow[i - j] % n if j <= i else 0
             for j in range(size)] for i in range(size)]
    return ModMatrix(size, size, tuple(tuple(r) for r in rows), n)


def _random_unit(n: int, rng: random.Random) -> int:
    while True:
        x = rng.randrange(1, n)
        if math.gcd(x, n) == 1:
            return x


def gen_window(key: RsaPrivateKey, rng: random.Random, *, width: int = WIDTH,
               pi: Optional[Sequence[int]] = None,
               rvec: Optional[Sequence[int]] = None) -> tuple[WindowWhiteBox, WindowSecrets]:
    """Build a white-box for ``key``.

    ``pi`` and ``rvec`` force the permutation and masks (test hooks); when
    omitted they are drawn from ``rng``.
    """
    n = key.n
    size = 1 << width
    if n <= 1 << (size - 1):
        raise DomainError(f"modulus must exceed 2^{size - 1}")
    if pi is None:
        pi = list(range(size))
        rng.shuffle(pi)
    pi = tuple(pi)
    if sorted(pi) != list(range(size)):
        raise DomainError("pi is not a permutation of the table indices")
    if rvec is None:
        rvec = [_random_unit(n, rng) for _ in range(size)]
    rvec = tuple(x % n for x in rvec)
    if len(rvec) != size or any(math.gcd(x, n) != 1 for x in rvec):
        raise DomainError("randomizers must be units of Z_N")
    tprime = tuple(rng.randrange(n) for _ in range(size))
    alpha = _random_unit(n, rng)
    beta = rng.randrange(n)

    target = ModMatrix.from_rows(
        ([rvec[pi[i]] if j == pi[i] else 0 for j in range(size)] + [tprime[i]]
         for i in range(size)), n)
    a = target @ build_M(alpha, beta, n, size + 1).inverse_lower_triangular()

    pi_inv = [0] * size
    for i, v in enumerate(pi):
        pi_inv[v] = i
    dchunks = chunk_key(key.d, chunk_count(n, width), width)
    dhat = tuple(pi_inv[x] for x in dchunks)
    # the masks multiply the output by prod r_{d_i}^(32^i); undo that once at the end
    r_const = mod_inv(window_exp(rvec, dchunks, n), n)
    wb = WindowWhiteBox(key.keyname, n, a, tprime, alpha, beta, dhat, r_const)
    return wb, WindowSecrets(pi, rvec, key.d)


def obfusc_precomp(wb: WindowWhiteBox, c: int) -> tuple:
    """The permuted, masked power table (r_pi(i) * c^pi(i))_i."""
    n = wb.n
    if not 0 <= c < n:
        raise DomainError("ciphertext out of range")
    size = wb.table_size
    base = (wb.alpha * c + wb.beta) % n
    s = [1]
    for _ in range(size):
        s.append(s[-1] * base % n)
    # t = -c^size * t', realized as multiplication by N - c^size
    neg = (n - powmod(c, size, n)) % n
    return tuple((x + neg * t) % n for x, t in zip(wb.a.apply(s), wb.tprime))


def window_decrypt(wb: WindowWhiteBox, c: int) -> int:
    return wb.r_const * window_exp(obfusc_precomp(wb, c), wb.dhat, wb.n) % wb.n


def am_structure(wb: WindowWhiteBox) -> tuple[tuple, tuple]:
    """Read (pi, rvec) off A*M, checking the unit-row structure on the way."""
    size = wb.table_size
    am = wb.a @ build_M(wb.alpha, wb.beta, wb.n, size + 1)
    pi = [0] * size
    rvec = [0] * size
    for i in range(size):
        row = am.row(i)
        hits = [j for j in range(size) if row[j]]
        if len(hits) != 1:
            raise AttackInconsistent("am_unit_rows",
                                     f"row {i} has {len(hits)} nonzero power coefficients")
        if row[size] != wb.tprime[i]:
            raise AttackInconsistent("am_last_column", f"row {i} does not end in t'[{i}]")
        pi[i] = hits[0]
        rvec[hits[0]] = row[hits[0]]
    if sorted(pi) != list(range(size)):
        raise AttackInconsistent("pi_bijective")
    return tuple(pi), tuple(rvec)


def _finish(wb: WindowWhiteBox, e: int, pi, rvec, rng) -> RecoveredKey:
    d = reassemble([pi[x] for x in wb.dhat], wb.width)
    if d == 0:
        raise AttackInconsistent("d_nonzero")
    factors = miller_factor(wb.n, e, d, rng)
    phi = (factors.p - 1) * (factors.q - 1)
    return RecoveredKey(wb.n, e, d, factors, phi, tuple(pi), tuple(rvec))


def attack_chosen_ciphertext(wb: WindowWhiteBox, e: int, rng: random.Random) -> RecoveredKey:
    """Query the precomputation at c = 1 and c = 2 and divide."""
    n, size = wb.n, wb.table_size
    if n <= 1 << (size - 1):
        raise DomainError(f"attack needs N > 2^{size - 1}")
    v1 = obfusc_precomp(wb, 1)
    v2 = obfusc_precomp(wb, 2)
    pi = [0] * size
    rvec = [0] * size
    for i in range(size):
        try:
            w = v2[i] * mod_inv(v1[i], n) % n
        except NotInvertible:
            raise AttackInconsistent("v1_invertible", f"entry {i} is not a unit") from None
        if w == 0 or w & (w - 1) or w.bit_length() > size:
            raise AttackInconsistent("power_of_two", f"entry {i} is not 2^j with j < {size}")
        pi[i] = w.bit_length() - 1
        rvec[pi[i]] = v1[i]
    if sorted(pi) != list(range(size)):
        raise AttackInconsistent("pi_bijective")
    return _finish(wb, e, pi, rvec, rng)


def attack_matrix(wb: WindowWhiteBox, e: int, rng: random.Random) -> RecoveredKey:
    """Static attack: needs only A, alpha and beta."""
    pi, rvec = am_structure(wb)
    return _finish(wb, e, pi, rvec, rng)
