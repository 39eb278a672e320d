"""Line-oriented ``name=value`` files for keys, white-boxes and attack reports.

Every file is UTF-8 with LF endings, fields in a fixed order, integers in
canonical lowercase hex.
"""

from __future__ import annotations

from typing import Iterable, Sequence, Union

from .errors import DomainError, ParseError
from .modmatrix import ModMatrix
from .numtheory import RsaPrivateKey, RsaPublicKey, from_hex, to_hex
from .wb_obfcrt import ObfCrtWhiteBox
from .wb_splitkey import SplitKeyWhiteBox
from .wb_window import WindowSecrets, WindowWhiteBox

WhiteBox = Union[SplitKeyWhiteBox, ObfCrtWhiteBox, WindowWhiteBox]

SPLITKEY_FIELDS = ("d1", "d2", "d3", "d4")
OBFCRT_FIELDS = ("dp1", "dp2", "dq1", "dq2", "p1", "p2", "q1", "q2", "g1", "g2", "g3")


def render(pairs: Iterable[tuple[str, str]]) -> bytes:
    out = []
    for name, value in pairs:
        if "\n" in value or "\r" in value:
            raise DomainError(f"field {name} contains a line break")
        out.append(f"{name}={value}\n")
    return "".join(out).encode("utf-8")


def read_fields(data: bytes, names: Sequence[str], start_line: int = 1) -> dict:
    """Parse exactly ``names``, in order, one per line."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("file is not UTF-8", 1) from None
    if "\r" in text:
        raise ParseError("CR found; only LF line endings are allowed",
                         text[:text.index("\r")].count("\n") + 1)
    if text and not text.endswith("\n"):
        raise ParseError("missing final newline", text.count("\n") + 1)
    lines = text.split("\n")[:-1] if text else []
    out = {}
    for i, name in enumerate(names):
        lineno = start_line + i
        if i >= len(lines):
            raise ParseError(f"truncated file: expected {name}=")
        key, sep, value = lines[i].partition("=")
        if not sep:
            raise ParseError("expected name=value", lineno)
        if key != name:
            raise ParseError(f"expected field {name!r}, found {key!r}", lineno)
        out[name] = value
    if len(lines) > len(names):
        raise ParseError("unexpected trailing field", start_line + len(names))
    return out


def _hex(fields: dict, name: str, names: Sequence[str]) -> int:
    try:
        return from_hex(fields[name])
    except ValueError as exc:
        raise ParseError(str(exc), list(names).index(name) + 1) from None


def _hexes(fields, names):
    return {n: _hex(fields, n, names) for n in names if n not in ("keyname", "scheme")}


def dump_private(key: RsaPrivateKey) -> bytes:
    return render([("keyname", key.keyname), ("n", to_hex(key.n)), ("e", to_hex(key.e)),
                   ("d", to_hex(key.d)), ("p", to_hex(key.p)), ("q", to_hex(key.q))])


def load_private(data: bytes) -> RsaPrivateKey:
    names = ("keyname", "n", "e", "d", "p", "q")
    f = read_fields(data, names)
    v = _hexes(f, names)
    try:
        return RsaPrivateKey(v["n"], v["e"], v["d"], v["p"], v["q"], keyname=f["keyname"])
    except DomainError as exc:
        raise ParseError(f"inconsistent private key: {exc}", 2) from None


def dump_public(key: Union[RsaPublicKey, RsaPrivateKey]) -> bytes:
    return render([("keyname", key.keyname), ("n", to_hex(key.n)), ("e", to_hex(key.e))])


def load_public(data: bytes) -> RsaPublicKey:
    names = ("keyname", "n", "e")
    f = read_fields(data, names)
    v = _hexes(f, names)
    try:
        return RsaPublicKey(v["n"], v["e"], f["keyname"])
    except DomainError as exc:
        raise ParseError(f"invalid public key: {exc}", 2) from None


def _hex_list(text: str, lineno: int, count=None) -> tuple:
    try:
        vals = tuple(from_hex(x) for x in text.split(","))
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None
    if count is not None and len(vals) != count:
        raise ParseError(f"expected {count} values, found {len(vals)}", lineno)
    return vals


def _dec_list(text: str, lineno: int) -> tuple:
    parts = text.split(",")
    if not all(p == "0" or (p.isdigit() and p.isascii() and p[0] != "0") for p in parts):
        raise ParseError("expected comma-separated decimal integers", lineno)
    return tuple(int(p) for p in parts)


def _window_names(size: int) -> tuple:
    return ("scheme", "keyname", "n", "alpha", "beta", "rconst", "dhat", "tprime",
            *(f"a{i}" for i in range(size)))


def dump_whitebox(wb: WhiteBox) -> bytes:
    head = [("scheme", wb.scheme), ("keyname", wb.keyname), ("n", to_hex(wb.n))]
    if isinstance(wb, SplitKeyWhiteBox):
        return render(head + [(f, to_hex(getattr(wb, f))) for f in SPLITKEY_FIELDS])
    if isinstance(wb, ObfCrtWhiteBox):
        return render(head + [(f, to_hex(getattr(wb, f))) for f in OBFCRT_FIELDS])
    if isinstance(wb, WindowWhiteBox):
        rows = [(f"a{i}", ",".join(map(to_hex, wb.a.row(i)))) for i in range(wb.a.rows)]
        return render(head + [("alpha", to_hex(wb.alpha)), ("beta", to_hex(wb.beta)),
                              ("rconst", to_hex(wb.r_const)),
                              ("dhat", ",".join(map(str, wb.dhat))),
                              ("tprime", ",".join(map(to_hex, wb.tprime)))] + rows)
    raise DomainError(f"unknown white-box type {type(wb).__name__}")


def load_whitebox(data: bytes) -> WhiteBox:
    first = data.split(b"\n", 1)[0]
    if not first.startswith(b"scheme="):
        raise ParseError("white-box file must start with scheme=", 1)
    scheme = first[len(b"scheme="):].decode("utf-8", "replace")
    try:
        if scheme == "splitkey":
            names = ("scheme", "keyname", "n", *SPLITKEY_FIELDS)
            f = read_fields(data, names)
            return SplitKeyWhiteBox(f["keyname"], **_hexes(f, names))
        if scheme == "obfcrt":
            names = ("scheme", "keyname", "n", *OBFCRT_FIELDS)
            f = read_fields(data, names)
            return ObfCrtWhiteBox(f["keyname"], **_hexes(f, names))
        if scheme == "window":
            return _load_window(data)
    except DomainError as exc:
        raise ParseError(f"malformed {scheme} white-box: {exc}", 1) from None
    raise ParseError(f"unknown scheme {scheme!r}", 1)


def _load_window(data: bytes) -> WindowWhiteBox:
    # the table size is implied by the number of tprime entries
    head = read_fields(b"".join(data.splitlines(keepends=True)[:8]), _window_names(0))
    size = len(head["tprime"].split(","))
    names = _window_names(size)
    f = read_fields(data, names)
    n = _hex(f, "n", names)
    rows = [_hex_list(f[f"a{i}"], 9 + i, size + 1) for i in range(size)]
    if any(x >= n for r in rows for x in r):
        raise ParseError("matrix entry not reduced modulo n", 9)
    return WindowWhiteBox(
        f["keyname"], n, ModMatrix(size, size + 1, tuple(rows), n),
        _hex_list(f["tprime"], 8, size), _hex(f, "alpha", names), _hex(f, "beta", names),
        _dec_list(f["dhat"], 7), _hex(f, "rconst", names))


def dump_secrets(keyname: str, secrets: WindowSecrets) -> bytes:
    return render([("scheme", "window"), ("keyname", keyname),
                   ("pi", ",".join(map(str, secrets.pi))),
                   ("rvec", ",".join(map(to_hex, secrets.rvec))),
                   ("d", to_hex(secrets.d))])


def load_secrets(data: bytes) -> tuple[str, WindowSecrets]:
    names = ("scheme", "keyname", "pi", "rvec", "d")
    f = read_fields(data, names)
    if f["scheme"] != "window":
        raise ParseError("secrets files exist only for the window scheme", 1)
    return f["keyname"], WindowSecrets(_dec_list(f["pi"], 3), _hex_list(f["rvec"], 4),
                                       _hex(f, "d", names))
