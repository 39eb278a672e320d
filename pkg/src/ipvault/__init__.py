"""IEEE 1735-style protected-IP envelopes, three white-box RSA decryption
schemes, and the key-extraction attacks that break them."""

from .envelope import (CommonBlock, DataBlock, DigitalEnvelope, Recipient, SessionKey,
                       ToolBlock, decrypt_ip, encrypt_ip, parse, serialize,
                       unwrap_session_key, verify_digest)
from .errors import (AttackInconsistent, DigestMismatch, DomainError, FactorFailure,
                     IPVaultError, KeyTooSmall, NoSuchToolBlock, NotInvertible, PaddingError,
                     ParseError, UnwrapError)
from .numtheory import (FactorPair, RecoveredKey, RsaPrivateKey, RsaPublicKey, crt_exp,
                        crt_param, gen_rsa_keypair, miller_factor, mod_inv, mod_pow)

__version__ = "0.1.0"
