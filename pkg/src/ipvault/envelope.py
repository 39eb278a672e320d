"""Pragma-protected digital envelope for hardware IP.

An envelope carries common rights, one tool block per recipient (RSA-wrapped
session key plus an HMAC-SHA256 digest over the common rights and that tool's
header), and the AES-CBC encrypted IP.  The text format is strict and
canonical, so ``serialize(parse(b)) == b`` for every accepted file.

Layout::

    `pragma protect begin_protected
    `pragma protect version=1
    `pragma protect encrypt_agent="ipvault"
    `pragma protect control name="value"          (common rights, any number)
    `pragma protect key_keyowner="..."            (one group per recipient)
    `pragma protect key_keyname="..."
    `pragma protect key_method="rsa"
    `pragma protect control name="value"          (tool rights, any number)
    `pragma protect digest_method="hmac-sha256"
    `pragma protect digest_block
    <base64, 64 columns>
    `pragma protect key_block
    <base64, 64 columns>
    `pragma protect data_method="aes128-cbc"
    `pragma protect data_block
    <base64, 64 columns>
    `pragma protect end_protected

The data block is IV || ciphertext.  Nothing authenticates it.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import random
import re
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Protocol, Sequence

from cryptography.hazmat.primitives import padding as sympad
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import (DigestMismatch, DomainError, KeyTooSmall, NoSuchToolBlock,
                     PaddingError, ParseError, UnwrapError)
from .numtheory import RsaPublicKey

PRAGMA = "`pragma protect "
B64_COLUMNS = 64
KEY_METHOD = "rsa"
DIGEST_METHOD = "hmac-sha256"
DATA_METHODS = {"aes128-cbc": 16, "aes256-cbc": 32}
DEFAULT_AGENT = "ipvault"
PKCS1_OVERHEAD = 11
STRICT_MIN_BITS = 2048

_NAME_RE = re.compile(r"[a-z_][a-z0-9_]*\Z")
_VALUE_RE = re.compile(r'[^"\\\x00-\x1f\x7f]*\Z')


class Decryptor(Protocol):
    """Anything that can undo textbook RSA for one modulus.

    Plain private keys and all three white-box evaluators qualify.
    """

    n: int

    def decrypt(self, c: int) -> int: ...


def _check_name(name: str) -> str:
    if not _NAME_RE.match(name):
        raise DomainError(f"invalid right name {name!r}")
    return name


def _check_value(value: str, what: str = "value") -> str:
    if not isinstance(value, str) or not _VALUE_RE.match(value):
        raise DomainError(f"{what} {value!r} contains a quote, backslash or control character")
    return value


def _rights(pairs: Iterable[Sequence[str]]) -> tuple:
    return tuple((_check_name(n), _check_value(v)) for n, v in pairs)


@dataclass(frozen=True)
class CommonBlock:
    rights: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rights", _rights(self.rights))


@dataclass(frozen=True)
class ToolBlock:
    keyowner: str
    keyname: str
    wrapped_session_key: bytes
    rights: tuple
    digest: bytes
    key_method: str = KEY_METHOD
    digest_method: str = DIGEST_METHOD

    def __post_init__(self):
        _check_value(self.keyowner, "keyowner")
        _check_value(self.keyname, "keyname")
        if not self.keyname:
            raise DomainError("empty keyname")
        object.__setattr__(self, "rights", _rights(self.rights))
        if self.key_method != KEY_METHOD or self.digest_method != DIGEST_METHOD:
            raise DomainError("unsupported key or digest method")
        if len(self.digest) != 32:
            raise DomainError("digest must be 32 bytes")
        if not self.wrapped_session_key:
            raise DomainError("empty key block")


@dataclass(frozen=True)
class DataBlock:
    data_method: str
    payload: bytes

    def __post_init__(self):
        if self.data_method not in DATA_METHODS:
            raise DomainError(f"unsupported data method {self.data_method!r}")
        ct_len = len(self.payload) - 16
        if ct_len <= 0 or ct_len % 16:
            raise DomainError("payload must be a 16-byte IV and a nonempty whole number of blocks")

    @property
    def iv(self) -> bytes:
        return self.payload[:16]

    @property
    def ciphertext(self) -> bytes:
        return self.payload[16:]


@dataclass(frozen=True)
class DigitalEnvelope:
    version: int
    encrypt_agent: str
    common: CommonBlock
    tools: tuple
    data: DataBlock

    def __post_init__(self):
        if self.version < 1:
            raise DomainError("version must be positive")
        _check_value(self.encrypt_agent, "encrypt_agent")
        object.__setattr__(self, "tools", tuple(self.tools))
        if not self.tools:
            raise DomainError("envelope needs at least one tool block")
        names = [t.keyname for t in self.tools]
        if len(set(names)) != len(names):
            raise DomainError("duplicate keyname among tool blocks")

    def tool(self, keyname: str) -> ToolBlock:
        for t in self.tools:
            if t.keyname == keyname:
                return t
        raise NoSuchToolBlock(keyname)


@dataclass(frozen=True)
class SessionKey:
    key: bytes

    def __post_init__(self):
        if len(self.key) not in (16, 32):
            raise DomainError("session key must be 16 or 32 bytes")


class Recipient(NamedTuple):
    key: RsaPublicKey
    keyname: str
    rights: tuple = ()
    keyowner: Optional[str] = None


class DecryptedIP(NamedTuple):
    plaintext: bytes
    common: CommonBlock
    tool_rights: tuple


# -- canonical text -----------------------------------------------------------

def _control_lines(rights) -> list[str]:
    return [f'{PRAGMA}control {n}="{v}"' for n, v in rights]


def _header_lines(keyowner: str, keyname: str, rights) -> list[str]:
    return [f'{PRAGMA}key_keyowner="{keyowner}"',
            f'{PRAGMA}key_keyname="{keyname}"',
            f'{PRAGMA}key_method="{KEY_METHOD}"',
            *_control_lines(rights)]


def canonical_digest_input(common: CommonBlock, keyowner: str, keyname: str, rights) -> bytes:
    """Bytes covered by a tool block's HMAC: common controls, then its header."""
    lines = _control_lines(common.rights) + _header_lines(keyowner, keyname, rights)
    return "".join(line + "\n" for line in lines).encode("utf-8")


def _b64_lines(data: bytes) -> list[str]:
    text = base64.b64encode(data).decode("ascii")
    return [text[i:i + B64_COLUMNS] for i in range(0, len(text), B64_COLUMNS)]


def serialize(env: DigitalEnvelope) -> bytes:
    out = [f"{PRAGMA}begin_protected",
           f"{PRAGMA}version={env.version}",
           f'{PRAGMA}encrypt_agent="{env.encrypt_agent}"',
           *_control_lines(env.common.rights)]
    for tool in env.tools:
        out += _header_lines(tool.keyowner, tool.keyname, tool.rights)
        out.append(f'{PRAGMA}digest_method="{tool.digest_method}"')
        out.append(f"{PRAGMA}digest_block")
        out += _b64_lines(tool.digest)
        out.append(f"{PRAGMA}key_block")
        out += _b64_lines(tool.wrapped_session_key)
    out.append(f'{PRAGMA}data_method="{env.data.data_method}"')
    out.append(f"{PRAGMA}data_block")
    out += _b64_lines(env.data.payload)
    out.append(f"{PRAGMA}end_protected")
    return "".join(line + "\n" for line in out).encode("utf-8")


_DIRECTIVES = {"begin_protected", "version", "encrypt_agent", "control", "key_keyowner",
               "key_keyname", "key_method", "digest_method", "digest_block", "key_block",
               "data_method", "data_block", "end_protected"}
_DIRECTIVE_RE = re.compile(r"([a-z_]+)(?:(=)(.*)|( )(.*))?\Z")
_QUOTED_RE = re.compile(r'"([^"\\\x00-\x1f\x7f]*)"\Z')
_CONTROL_RE = re.compile(r'([a-z_][a-z0-9_]*)="([^"\\\x00-\x1f\x7f]*)"\Z')
_B64_LINE_RE = re.compile(r"[A-Za-z0-9+/=]+\Z")


class _Parser:
    def __init__(self, data: bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8 ({exc.reason})", 1) from None
        if "\r" in text:
            lineno = text[:text.index("\r")].count("\n") + 1
            raise ParseError("CR found; only LF line endings are allowed", lineno)
        self.lines = text.split("\n")
        if self.lines[-1] != "":
            raise ParseError("missing final newline", len(self.lines))
        self.lines.pop()
        self.pos = 0

    def _peek(self):
        """(name, argument) of the next directive, or None at EOF."""
        if self.pos >= len(self.lines):
            return None
        line = self.lines[self.pos]
        if not line.startswith(PRAGMA):
            raise ParseError("expected a `pragma protect directive", self.pos + 1)
        m = _DIRECTIVE_RE.match(line[len(PRAGMA):])
        if not m or m.group(1) not in _DIRECTIVES:
            raise ParseError(f"unknown directive {line[len(PRAGMA):]!r}", self.pos + 1)
        name = m.group(1)
        if m.group(2):
            return name, ("=", m.group(3))
        if m.group(4):
            return name, (" ", m.group(5))
        return name, None

    def expect(self, name: str, form: Optional[str] = None) -> str:
        got = self._peek()
        if got is None:
            raise ParseError(f"truncated file: expected {name}")
        gname, arg = got
        if gname != name:
            raise ParseError(f"out-of-order directive {gname!r}, expected {name!r}", self.pos + 1)
        if (arg is None) != (form is None) or (arg is not None and arg[0] != form):
            raise ParseError(f"malformed {name} directive", self.pos + 1)
        self.pos += 1
        return arg[1] if arg else ""

    def at(self, name: str) -> bool:
        got = self._peek()
        return got is not None and got[0] == name

    def quoted(self, name: str) -> str:
        lineno = self.pos + 1
        m = _QUOTED_RE.match(self.expect(name, "="))
        if not m:
            raise ParseError(f"{name} needs a quoted value", lineno)
        return m.group(1)

    def literal(self, name: str, allowed) -> str:
        lineno = self.pos + 1
        value = self.quoted(name)
        if value not in allowed:
            raise ParseError(f"unsupported {name} {value!r}", lineno)
        return value

    def controls(self) -> tuple:
        out = []
        while self.at("control"):
            lineno = self.pos + 1
            m = _CONTROL_RE.match(self.expect("control", " "))
            if not m:
                raise ParseError('control must read name="value"', lineno)
            out.append((m.group(1), m.group(2)))
        return tuple(out)

    def b64_block(self, name: str) -> bytes:
        self.expect(name)
        start = self.pos
        chunks = []
        while self.pos < len(self.lines) and not self.lines[self.pos].startswith("`"):
            line = self.lines[self.pos]
            if len(line) > B64_COLUMNS:
                raise ParseError(f"base64 line longer than {B64_COLUMNS} columns", self.pos + 1)
            if not _B64_LINE_RE.match(line):
                raise ParseError("bad base64 characters", self.pos + 1)
            if chunks and len(chunks[-1]) != B64_COLUMNS:
                raise ParseError(f"base64 line before the last must be {B64_COLUMNS} columns",
                                 self.pos)
            chunks.append(line)
            self.pos += 1
        if not chunks:
            raise ParseError(f"empty {name}", start + 1 if start < len(self.lines) else None)
        text = "".join(chunks)
        try:
            data = base64.b64decode(text, validate=True)
        except ValueError:
            raise ParseError("bad base64", self.pos) from None
        if base64.b64encode(data).decode("ascii") != text:
            raise ParseError("non-canonical base64", self.pos)
        return data

    def parse(self) -> DigitalEnvelope:
        self.expect("begin_protected")
        lineno = self.pos + 1
        vtext = self.expect("version", "=")
        if not re.fullmatch(r"[1-9][0-9]*", vtext):
            raise ParseError("version must be a positive decimal integer", lineno)
        agent = self.quoted("encrypt_agent")
        common = self.controls()
        tools = []
        seen = set()
        while self.at("key_keyowner"):
            start = self.pos + 1
            owner = self.quoted("key_keyowner")
            keyname = self.quoted("key_keyname")
            if not keyname:
                raise ParseError("empty keyname", start + 1)
            if keyname in seen:
                raise ParseError(f"duplicate keyname {keyname!r}", start + 1)
            seen.add(keyname)
            self.literal("key_method", {KEY_METHOD})
            rights = self.controls()
            self.literal("digest_method", {DIGEST_METHOD})
            digest_line = self.pos + 1
            digest = self.b64_block("digest_block")
            if len(digest) != 32:
                raise ParseError("digest must decode to 32 bytes", digest_line)
            wrapped = self.b64_block("key_block")
            tools.append(ToolBlock(owner, keyname, wrapped, rights, digest))
        if not tools:
            if self._peek() is None:
                raise ParseError("truncated file: expected key_keyowner")
            raise ParseError("envelope needs at least one tool block", self.pos + 1)
        method = self.literal("data_method", DATA_METHODS)
        data_line = self.pos + 1
        payload = self.b64_block("data_block")
        try:
            data = DataBlock(method, payload)
        except DomainError as exc:
            raise ParseError(str(exc), data_line) from None
        self.expect("end_protected")
        if self.pos != len(self.lines):
            raise ParseError("content after end_protected", self.pos + 1)
        return DigitalEnvelope(int(vtext), agent, CommonBlock(common), tuple(tools), data)


def parse(data: bytes) -> DigitalEnvelope:
    return _Parser(data).parse()


# -- cryptography -------------------------------------------------------------

def _modulus_bytes(n: int) -> int:
    return (n.bit_length() + 7) // 8


def _nonzero_bytes(count: int, rng: random.Random) -> bytes:
    return bytes(rng.randrange(1, 256) for _ in range(count))


def wrap_session_key(session: SessionKey, key: RsaPublicKey, rng: random.Random) -> bytes:
    """RSA with PKCS#1 v1.5 type-2 padding."""
    k = _modulus_bytes(key.n)
    if k < len(session.key) + PKCS1_OVERHEAD:
        raise KeyTooSmall(f"{k}-byte modulus cannot wrap a {len(session.key)}-byte key")
    ps = _nonzero_bytes(k - 3 - len(session.key), rng)
    em = b"\x00\x02" + ps + b"\x00" + session.key
    return key.encrypt(int.from_bytes(em, "big")).to_bytes(k, "big")


def unwrap_session_key(tool: ToolBlock, key: Decryptor) -> SessionKey:
    k = _modulus_bytes(key.n)
    if len(tool.wrapped_session_key) != k:
        raise UnwrapError("key block length does not match the modulus")
    c = int.from_bytes(tool.wrapped_session_key, "big")
    if c >= key.n:
        raise UnwrapError("key block is not a residue of the modulus")
    em = key.decrypt(c).to_bytes(k, "big")
    if em[:2] != b"\x00\x02":
        raise UnwrapError("bad PKCS#1 v1.5 header")
    sep = em.find(b"\x00", 2)
    if sep < 10:
        raise UnwrapError("bad PKCS#1 v1.5 padding string")
    body = em[sep + 1:]
    if len(body) not in (16, 32):
        raise UnwrapError(f"unwrapped key has {len(body)} bytes")
    return SessionKey(body)


def compute_digest(session: SessionKey, common: CommonBlock, keyowner: str, keyname: str,
                   rights) -> bytes:
    msg = canonical_digest_input(common, keyowner, keyname, rights)
    return hmac.new(session.key, msg, hashlib.sha256).digest()


def verify_digest(session: SessionKey, common: CommonBlock, tool: ToolBlock) -> bool:
    want = compute_digest(session, common, tool.keyowner, tool.keyname, tool.rights)
    return hmac.compare_digest(want, tool.digest)


def aes_cbc_encrypt(key: bytes, iv: bytes, plaintext: bytes) -> bytes:
    padder = sympad.PKCS7(128).padder()
    padded = padder.update(plaintext) + padder.finalize()
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return enc.update(padded) + enc.finalize()


def aes_cbc_decrypt(key: bytes, iv: bytes, ciphertext: bytes) -> bytes:
    dec = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    padded = dec.update(ciphertext) + dec.finalize()
    unpadder = sympad.PKCS7(128).unpadder()
    try:
        return unpadder.update(padded) + unpadder.finalize()
    except ValueError:
        raise PaddingError("invalid PKCS#7 padding") from None


def encrypt_ip(plaintext: bytes, common, recipients: Sequence, data_method: str,
               rng: random.Random, *, encrypt_agent: str = DEFAULT_AGENT, version: int = 1,
               strict: bool = False) -> DigitalEnvelope:
    """Encrypt ``plaintext`` once and wrap its session key for every recipient.

    ``recipients`` holds ``Recipient`` tuples (or plain (key, keyname, rights)).
    With ``strict`` every recipient modulus must have at least 2048 bits.
    """
    if not plaintext:
        raise DomainError("refusing to protect empty IP")
    if not recipients:
        raise DomainError("need at least one recipient")
    if data_method not in DATA_METHODS:
        raise DomainError(f"unsupported data method {data_method!r}")
    if not isinstance(common, CommonBlock):
        common = CommonBlock(tuple(common))
    recips = [r if isinstance(r, Recipient) else Recipient(*r) for r in recipients]
    for r in recips:
        if strict and r.key.n.bit_length() < STRICT_MIN_BITS:
            raise KeyTooSmall(f"strict mode needs >= {STRICT_MIN_BITS}-bit keys ({r.keyname})")
    session = SessionKey(rng.randbytes(DATA_METHODS[data_method]))
    iv = rng.randbytes(16)
    tools = []
    for r in recips:
        owner = r.keyowner if r.keyowner is not None else r.keyname
        rights = _rights(r.rights)
        wrapped = wrap_session_key(session, r.key, rng)
        digest = compute_digest(session, common, owner, r.keyname, rights)
        tools.append(ToolBlock(owner, r.keyname, wrapped, rights, digest))
    data = DataBlock(data_method, iv + aes_cbc_encrypt(session.key, iv, plaintext))
    return DigitalEnvelope(version, encrypt_agent, common, tuple(tools), data)


def decrypt_ip(env: DigitalEnvelope, key: Decryptor, keyname: Optional[str] = None) -> DecryptedIP:
    """Unwrap, check the digest, then decrypt; rights are returned, not enforced."""
    if keyname is None:
        keyname = getattr(key, "keyname", "")
    tool = env.tool(keyname)
    session = unwrap_session_key(tool, key)
    if len(session.key) != DATA_METHODS[env.data.data_method]:
        raise UnwrapError("session key size does not match the data method")
    if not verify_digest(session, env.common, tool):
        raise DigestMismatch(keyname)
    plaintext = aes_cbc_decrypt(session.key, env.data.iv, env.data.ciphertext)
    return DecryptedIP(plaintext, env.common, tool.rights)
