"""Exact modular arithmetic, RSA key generation, CRT and Miller's factorization.

Every integer here is a plain Python ``int``.  All randomness comes from an
explicit ``random.Random``-compatible source so that results are reproducible
from a seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

import gmpy2

from .errors import DomainError, FactorFailure, NotInvertible

MR_ROUNDS = 64
MILLER_MAX_TRIALS = 128

_SMALL_PRIMES = [p for p in range(3, 2000) if all(p % f for f in range(2, math.isqrt(p) + 1))]


def to_hex(n: int) -> str:
    """Canonical text form: lowercase hex, no prefix, no leading zeros."""
    if n < 0:
        raise DomainError("negative value has no canonical hex form")
    return format(n, "x")


def from_hex(s: str) -> int:
    if not s or s != s.strip() or any(ch not in "0123456789abcdef" for ch in s):
        raise ValueError(f"not canonical hex: {s!r}")
    if len(s) > 1 and s[0] == "0":
        raise ValueError(f"leading zero in hex value: {s!r}")
    return int(s, 16)


def powmod(base: int, exp: int, modulus: int) -> int:
    """Unchecked base**exp % modulus for exp >= 0 (GMP-backed)."""
    return int(gmpy2.powmod(base, exp, modulus))


def mod_pow(base: int, exp: int, modulus: int) -> int:
    if modulus < 2:
        raise DomainError(f"modulus must be >= 2, got {modulus}")
    if exp < 0:
        raise DomainError("negative exponent")
    return powmod(base, exp, modulus)


def egcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with a*x + b*y = g = gcd(a, b)."""
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def mod_inv(a: int, m: int) -> int:
    if m < 2:
        raise DomainError(f"modulus must be >= 2, got {m}")
    g, x, _ = egcd(a % m, m)
    if g != 1:
        raise NotInvertible(a, m, g)
    return x % m


def is_probable_prime(n: int, rng: random.Random, rounds: int = MR_ROUNDS) -> bool:
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    s, t = 0, n - 1
    while t % 2 == 0:
        s += 1
        t //= 2
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = powmod(a, t, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def random_prime(bits: int, rng: random.Random, e: Optional[int] = None) -> int:
    """Random prime with exactly ``bits`` bits and its two top bits set.

    If ``e`` is given, the prime also satisfies gcd(e, p - 1) = 1.
    """
    if bits < 3:
        raise DomainError("prime size must be at least 3 bits")
    top = 0b11 << (bits - 2)
    while True:
        cand = rng.getrandbits(bits) | top | 1
        if e is not None and math.gcd(e, cand - 1) != 1:
            continue
        if is_probable_prime(cand, rng):
            return cand


@dataclass(frozen=True)
class RsaPublicKey:
    n: int
    e: int
    keyname: str = ""

    def __post_init__(self):
        if self.n <= 3 or self.n % 2 == 0:
            raise DomainError("RSA modulus must be odd and > 3")
        if not 1 < self.e < self.n:
            raise DomainError("public exponent must satisfy 1 < e < N")

    def encrypt(self, m: int) -> int:
        if not 0 <= m < self.n:
            raise DomainError("message out of range")
        return powmod(m, self.e, self.n)


@dataclass(frozen=True)
class RsaPrivateKey:
    n: int
    e: int
    d: int
    p: int
    q: int
    phi: int = field(default=0)
    keyname: str = ""

    def __post_init__(self):
        phi = (self.p - 1) * (self.q - 1)
        if not self.phi:
            object.__setattr__(self, "phi", phi)
        if self.p * self.q != self.n or self.phi != phi:
            raise DomainError("inconsistent RSA private key: N != pq or phi mismatch")
        if not 0 < self.d < self.phi or self.e * self.d % self.phi != 1:
            raise DomainError("inconsistent RSA private key: e*d != 1 mod phi")

    @property
    def public(self) -> RsaPublicKey:
        return RsaPublicKey(self.n, self.e, self.keyname)

    def decrypt(self, c: int) -> int:
        if not 0 <= c < self.n:
            raise DomainError("ciphertext out of range")
        return powmod(c, self.d, self.n)

    def renamed(self, keyname: str) -> "RsaPrivateKey":
        return RsaPrivateKey(self.n, self.e, self.d, self.p, self.q, self.phi, keyname)


@dataclass(frozen=True)
class FactorPair:
    """Two nontrivial factors, stored smaller first."""

    p: int
    q: int

    def __post_init__(self):
        if self.p <= 1 or self.q <= 1:
            raise DomainError("factors must be > 1")
        if self.p > self.q:
            p, q = self.q, self.p
            object.__setattr__(self, "p", p)
            object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.p * self.q

    def as_set(self) -> frozenset:
        return frozenset((self.p, self.q))


@dataclass(frozen=True)
class RecoveredKey:
    """Output of every key-extraction attack.

    ``pi`` and ``rvec`` are only filled in by the window-scheme attacks.
    """

    n: int
    e: int
    d: int
    factors: FactorPair
    phi: int
    pi: Optional[tuple] = None
    rvec: Optional[tuple] = None

    def __post_init__(self):
        if self.factors.n != self.n:
            raise DomainError("recovered factors do not multiply to N")
        if self.e * self.d % self.phi != 1:
            raise DomainError("recovered d is not an inverse of e mod phi")

    def private_key(self, keyname: str = "") -> RsaPrivateKey:
        return RsaPrivateKey(self.n, self.e, self.d % self.phi, self.factors.p,
                             self.factors.q, self.phi, keyname)


def gen_rsa_keypair(bits: int, e: int, rng: random.Random, keyname: str = "") -> RsaPrivateKey:
    """Generate an RSA key whose modulus has exactly ``bits`` bits."""
    if bits < 32:
        raise DomainError("key size below the 32-bit floor")
    if e < 3 or e % 2 == 0:
        raise DomainError("public exponent must be odd and >= 3")
    pbits = (bits + 1) // 2
    qbits = bits - pbits
    while True:
        p = random_prime(pbits, rng, e)
        q = random_prime(qbits, rng, e)
        if p == q:
            continue
        n = p * q
        phi = (p - 1) * (q - 1)
        if n.bit_length() != bits or e >= n or math.gcd(e, phi) != 1:
            continue
        d = mod_inv(e, phi)
        return RsaPrivateKey(n, e, d, p, q, phi, keyname)


def miller_factor(n: int, e: int, d_multiple: int, rng: random.Random,
                  max_trials: int = MILLER_MAX_TRIALS) -> FactorPair:
    """Factor ``n`` from any exponent with e*d_multiple = 1 mod phi(n).

    Each random base splits ``n`` with probability at least 1/2.
    """
    if n < 4:
        raise DomainError("modulus too small to factor")
    if n % 2 == 0:
        return FactorPair(2, n // 2)
    k_t = e * d_multiple - 1
    if k_t <= 0:
        raise FactorFailure("e*d - 1 must be positive")
    k = (k_t & -k_t).bit_length() - 1
    t = k_t >> k
    for _ in range(max_trials):
        g = rng.randrange(2, n - 1)
        f = math.gcd(g, n)
        if f > 1:
            return FactorPair(f, n // f)
        x = powmod(g, t, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(k):
            y = x * x % n
            if y == 1:
                # x is a square root of 1 other than 1 and, checked below, -1
                if x != n - 1:
                    f = math.gcd(x - 1, n)
                    return FactorPair(f, n // f)
                break
            if y == n - 1:
                break
            x = y
    raise FactorFailure(f"no split of N after {max_trials} random bases")


def crt_param(p: int, q: int) -> int:
    """gamma with gamma = 1 mod p and gamma = 0 mod q."""
    if math.gcd(p, q) != 1:
        raise DomainError("CRT moduli must be coprime")
    return q * mod_inv(q, p) % (p * q)


def crt_exp(c: int, d_p: int, d_q: int, p: int, q: int, gamma: int, n: int) -> int:
    if n < 2:
        raise DomainError("modulus must be >= 2")
    m_p = powmod(c, d_p, p)
    m_q = powmod(c, d_q, q)
    # m_p - m_q is taken in Z_N so the result does not depend on representatives
    return ((m_p - m_q) % n * gamma + m_q) % n

