"""Split-key white-box: the exponent is stored as d1*d2 + d3*2**32 + d4.

The assembled exponent is congruent to d modulo phi(N) but is not reduced,
so it is a valid input to Miller's reduction and factors N directly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import DomainError
from .numtheory import RecoveredKey, RsaPrivateKey, miller_factor, mod_inv, powmod

SHARE_BITS = 32


@dataclass(frozen=True)
class SplitKeyWhiteBox:
    keyname: str
    n: int
    d1: int
    d2: int
    d3: int
    d4: int

    scheme = "splitkey"

    def __post_init__(self):
        if not (0 <= self.d3 < 1 << SHARE_BITS and 0 <= self.d4 < 1 << SHARE_BITS):
            raise DomainError("d3 and d4 must fit in 32 bits")
        if self.d1 < 0 or self.d2 < 0:
            raise DomainError("shares must be nonnegative")

    @property
    def extended_exponent(self) -> int:
        return self.d1 * self.d2 + (self.d3 << SHARE_BITS) + self.d4

    def decrypt(self, c: int) -> int:
        return splitkey_decrypt(self, c)


def gen_splitkey(key: RsaPrivateKey, rng: random.Random) -> SplitKeyWhiteBox:
    phi = key.phi
    d3 = rng.getrandbits(SHARE_BITS)
    d4 = rng.getrandbits(SHARE_BITS)
    nbits = key.n.bit_length()
    while True:
        d1 = rng.getrandbits(nbits) | (1 << (nbits - 1))
        if math.gcd(d1, phi) == 1:
            break
    d2 = (key.d - (d3 << SHARE_BITS) - d4) * mod_inv(d1, phi) % phi
    return SplitKeyWhiteBox(key.keyname, key.n, d1, d2, d3, d4)


def splitkey_decrypt(wb: SplitKeyWhiteBox, c: int) -> int:
    if not 0 <= c < wb.n:
        raise DomainError("ciphertext out of range")
    return powmod(c, wb.extended_exponent, wb.n)


def splitkey_attack(wb: SplitKeyWhiteBox, e: int, rng: random.Random) -> RecoveredKey:
    d_ext = wb.extended_exponent
    factors = miller_factor(wb.n, e, d_ext, rng)
    phi = (factors.p - 1) * (factors.q - 1)
    return RecoveredKey(wb.n, e, d_ext % phi, factors, phi)
