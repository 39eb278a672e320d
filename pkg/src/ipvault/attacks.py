"""Attack dispatch and the ``name=value`` attack report."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from . import wb_obfcrt, wb_splitkey, wb_window
from .envelope import Recipient, decrypt_ip, encrypt_ip
from .errors import DomainError, IPVaultError
from .keyfile import WhiteBox, render
from .numtheory import RecoveredKey, RsaPublicKey, to_hex

METHODS = {
    "splitkey": ("miller",),
    "obfcrt": ("gcd",),
    "window": ("matrix", "chosen-ciphertext"),
}


def resolve_method(scheme: str, method: str) -> str:
    if scheme not in METHODS:
        raise DomainError(f"unknown scheme {scheme!r}")
    if method == "auto":
        return METHODS[scheme][0]
    if method not in METHODS[scheme]:
        raise DomainError(f"method {method!r} does not apply to the {scheme} scheme")
    return method


@dataclass
class AttackReport:
    scheme: str
    keyname: str
    method: str
    d: int = 0
    p: int = 0
    q: int = 0
    wall_ms: int = 0
    verdicts: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.verdicts) and all(v for _, v in self.verdicts)

    def failed(self) -> list:
        return [name for name, v in self.verdicts if not v]

    def dump(self) -> bytes:
        pairs = [("scheme", self.scheme), ("keyname", self.keyname), ("method", self.method),
                 ("d", to_hex(self.d)), ("p", to_hex(self.p)), ("q", to_hex(self.q)),
                 ("wall_ms", str(self.wall_ms))]
        pairs += [(f"verdict.{name}", "true" if v else "false") for name, v in self.verdicts]
        return render(pairs)


def recover(wb: WhiteBox, e: int, method: str, rng: random.Random) -> RecoveredKey:
    method = resolve_method(wb.scheme, method)
    if method == "miller":
        return wb_splitkey.splitkey_attack(wb, e, rng)
    if method == "gcd":
        return wb_obfcrt.obfcrt_attack(wb, e, rng)
    if method == "matrix":
        return wb_window.attack_matrix(wb, e, rng)
    return wb_window.attack_chosen_ciphertext(wb, e, rng)


def probe_decrypts(recovered: RecoveredKey, rng: random.Random) -> bool:
    """Encrypt a random probe IP to (N, e) and open it with the recovered key only."""
    probe = rng.randbytes(48)
    pub = RsaPublicKey(recovered.n, recovered.e, "probe")
    env = encrypt_ip(probe, (), [Recipient(pub, "probe")], "aes128-cbc", rng)
    try:
        return decrypt_ip(env, recovered.private_key("probe"), "probe").plaintext == probe
    except IPVaultError:
        return False


def run_attack(wb: WhiteBox, e: int, method: str, rng: random.Random):
    """Run one attack and verify it. Returns (RecoveredKey, AttackReport).

    Attack failures propagate; the report only describes successful recoveries.
    """
    method = resolve_method(wb.scheme, method)
    start = time.perf_counter()
    rec = recover(wb, e, method, rng)
    wall = int((time.perf_counter() - start) * 1000)
    verdicts = [("ed_inv_mod_phi", e * rec.d % rec.phi == 1),
                ("pq_eq_n", rec.factors.p * rec.factors.q == wb.n)]
    if rec.pi is not None:
        verdicts.append(("pi_bijective", sorted(rec.pi) == list(range(len(rec.pi)))))
    verdicts.append(("probe_decrypt", probe_decrypts(rec, rng)))
    report = AttackReport(wb.scheme, wb.keyname, method, rec.d, rec.factors.p, rec.factors.q,
                          wall, verdicts)
    return rec, report
