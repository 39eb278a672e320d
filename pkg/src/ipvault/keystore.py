"""On-disk keystore: ``<keyname>.key`` (private) and ``<keyname>.pub`` per key."""

from __future__ import annotations

import os
import re
from pathlib import Path

from .errors import DomainError, IPVaultError
from .keyfile import dump_private, dump_public, load_private, load_public
from .numtheory import RsaPrivateKey, RsaPublicKey

ENV_VAR = "IPVAULT_STORE"
DEFAULT_ROOT = ".ipvault"
_KEYNAME_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9_.-]*\Z")


class KeyExists(IPVaultError):
    pass


class KeyNotFound(IPVaultError):
    pass


def default_root() -> Path:
    return Path(os.environ.get(ENV_VAR) or DEFAULT_ROOT)


def check_keyname(keyname: str) -> str:
    if not _KEYNAME_RE.match(keyname):
        raise DomainError(f"invalid keyname {keyname!r} (letters, digits, '_', '.', '-')")
    return keyname


class Keystore:
    def __init__(self, root=None):
        self.root = Path(root) if root is not None else default_root()

    def private_path(self, keyname: str) -> Path:
        return self.root / f"{check_keyname(keyname)}.key"

    def public_path(self, keyname: str) -> Path:
        return self.root / f"{check_keyname(keyname)}.pub"

    def __contains__(self, keyname: str) -> bool:
        return self.private_path(keyname).exists() or self.public_path(keyname).exists()

    def names(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted({p.stem for p in self.root.iterdir() if p.suffix in (".key", ".pub")})

    def add(self, key: RsaPrivateKey) -> None:
        if key.keyname in self:
            raise KeyExists(f"key {key.keyname!r} already exists in {self.root}")
        self.root.mkdir(parents=True, exist_ok=True)
        self.private_path(key.keyname).write_bytes(dump_private(key))
        self.public_path(key.keyname).write_bytes(dump_public(key))

    def private(self, keyname: str) -> RsaPrivateKey:
        path = self.private_path(keyname)
        if not path.exists():
            raise KeyNotFound(f"no private key {keyname!r} in {self.root}")
        return load_private(path.read_bytes())

    def public(self, keyname: str) -> RsaPublicKey:
        path = self.public_path(keyname)
        if path.exists():
            return load_public(path.read_bytes())
        return self.private(keyname).public
