"""Obfuscated CRT-RSA white-box and its GCD key recovery.

The CRT exponents are split additively, the prime moduli are replaced by small
multiples k*p and l*q that are themselves stored as differences p1 - p2 and
q1 - q2, and the CRT parameter is stored as g1*(g2 + g3) mod N.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional

from .errors import AttackInconsistent, DomainError
from .numtheory import (FactorPair, RecoveredKey, RsaPrivateKey, crt_param,
                        mod_inv, powmod)

# smallest prime factor we accept; below this the shares are too narrow to hide anything
MIN_FACTOR_BITS = 64
SHIFT_SHARE_BITS = 256


@dataclass(frozen=True)
class ObfCrtWhiteBox:
    keyname: str
    n: int
    dp1: int
    dp2: int
    dq1: int
    dq2: int
    p1: int
    p2: int
    q1: int
    q2: int
    g1: int
    g2: int
    g3: int

    scheme = "obfcrt"

    def __post_init__(self):
        if self.p1 <= self.p2 or self.q1 <= self.q2 or self.p2 < 0 or self.q2 < 0:
            raise DomainError("reduction shares must satisfy p1 > p2 >= 0")
        if min(self.dp1, self.dp2, self.dq1, self.dq2) < 0:
            raise DomainError("exponent shares must be nonnegative")

    def decrypt(self, c: int) -> int:
        return obf_crt_exp(self, c)


def gen_obfcrt(key: RsaPrivateKey, rng: random.Random) -> ObfCrtWhiteBox:
    p, q, n = key.p, key.q, key.n
    if min(p, q).bit_length() < MIN_FACTOR_BITS:
        raise DomainError(f"prime factors must have at least {MIN_FACTOR_BITS} bits")
    d_p = key.d % (p - 1)
    d_q = key.d % (q - 1)
    dp1 = rng.randint(0, d_p)
    dq1 = rng.randint(0, d_q)

    def hide_modulus(prime):
        mult = rng.randint(3, 255)
        shift = rng.getrandbits(min(SHIFT_SHARE_BITS, prime.bit_length() - 1))
        return mult * prime + shift, shift

    p1, p2 = hide_modulus(p)
    q1, q2 = hide_modulus(q)

    gamma = crt_param(p, q)
    while True:
        g1 = rng.randrange(1, n)
        if math.gcd(g1, n) == 1:
            break
    g2 = rng.randrange(n)
    g3 = (gamma * mod_inv(g1, n) - g2) % n
    return ObfCrtWhiteBox(key.keyname, n, dp1, d_p - dp1, dq1, d_q - dq1,
                          p1, p2, q1, q2, g1, g2, g3)


def obf_mod(a: int, p1: int, p2: int, n: int) -> int:
    """Reduce ``a`` by a multiple of p1 - p2 using only the two shares."""
    if p1 <= 0:
        raise DomainError("p1 must be positive")
    quo, rem = divmod(a, p1)
    return (quo * p2 + rem) % n


def obf_crt_exp(wb: ObfCrtWhiteBox, c: int) -> int:
    n = wb.n
    if not 0 <= c < n:
        raise DomainError("ciphertext out of range")
    m_p = obf_mod(powmod(c, wb.dp1, n) * powmod(c, wb.dp2, n) % n, wb.p1, wb.p2, n)
    m_q = obf_mod(powmod(c, wb.dq1, n) * powmod(c, wb.dq2, n) % n, wb.q1, wb.q2, n)
    gamma = wb.g1 * (wb.g2 + wb.g3) % n
    return ((m_p - m_q) * gamma + m_q) % n


def crt_exponent_gcd(n: int, e: int, d_half: int, rng: random.Random) -> int:
    """gcd(N, (x^e)^d_half - x) for a random x.

    (x^e)^(d mod p-1) = x mod p, so a genuine d_p yields p.  The exponent must act
    on a ciphertext: c^d_p - c itself is not divisible by p.
    """
    for _ in range(8):
        x = rng.randrange(2, n - 1)
        g = math.gcd(n, powmod(powmod(x, e, n), d_half, n) - x)
        # x^(e*d_half) = x mod both primes has negligible probability; redraw then
        if g != n:
            return g
    return g


def obfcrt_attack(wb: ObfCrtWhiteBox, e: int,
                  rng: Optional[random.Random] = None) -> RecoveredKey:
    """Recover p, q and d from the stored CRT parameter, then cross-check."""
    n = wb.n
    rng = rng if rng is not None else random.Random(n)
    gamma = wb.g1 * (wb.g2 + wb.g3) % n
    p = math.gcd(gamma - 1, n)
    q = math.gcd(gamma, n)
    if not (1 < p < n and 1 < q < n and p * q == n):
        raise AttackInconsistent("gamma_splits_n", "gcd(gamma-1, N) * gcd(gamma, N) != N")

    if math.gcd(n, wb.p1 - wb.p2) != p:
        raise AttackInconsistent("ptilde_reveals_p")
    if math.gcd(n, wb.q1 - wb.q2) != q:
        raise AttackInconsistent("qtilde_reveals_q")

    d_p = wb.dp1 + wb.dp2
    d_q = wb.dq1 + wb.dq2
    for verdict, exp, want in (("dp_reveals_p", d_p, p), ("dq_reveals_q", d_q, q)):
        if crt_exponent_gcd(n, e, exp, rng) != want:
            raise AttackInconsistent(verdict)

    phi = (p - 1) * (q - 1)
    try:
        d = mod_inv(e, phi)
    except DomainError:
        raise AttackInconsistent("e_invertible", "e shares a factor with phi(N)") from None
    return RecoveredKey(n, e, d, FactorPair(p, q), phi)
