"""ipvault command line.

Exit codes: 0 ok, 2 keyname already in store, 3 digest mismatch, 4 no tool
block for the key, 5 attack found the white-box inconsistent, 6 session-key
unwrap or CBC padding failure, 64 usage error, 65 malformed input data,
66 missing input file or key.
"""

from __future__ import annotations

import argparse
import hashlib
import random
import sys
from pathlib import Path

from . import wb_obfcrt, wb_splitkey, wb_window
from .attacks import METHODS, resolve_method, run_attack
from .envelope import (DATA_METHODS, DEFAULT_AGENT, STRICT_MIN_BITS, Recipient, decrypt_ip,
                       encrypt_ip, parse, serialize, unwrap_session_key, verify_digest)
from .errors import (AttackInconsistent, DigestMismatch, DomainError, FactorFailure,
                     NoSuchToolBlock, PaddingError, ParseError, UnwrapError)
from .keyfile import (dump_private, dump_secrets, dump_whitebox, load_private, load_public,
                      load_whitebox)
from .keystore import KeyExists, KeyNotFound, Keystore, check_keyname
from .numtheory import gen_rsa_keypair, to_hex

EXIT_OK = 0
EXIT_DUPLICATE = 2
EXIT_DIGEST = 3
EXIT_NO_TOOL = 4
EXIT_ATTACK = 5
EXIT_UNWRAP = 6
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_NOINPUT = 66


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rng(seed):
    return random.Random(seed) if seed is not None else random.SystemRandom()


def _int(text: str) -> int:
    return int(text, 0)


def fingerprint(n: int) -> str:
    return hashlib.sha256(to_hex(n).encode("ascii")).hexdigest()[:16]


def _pair(text: str):
    name, sep, value = text.partition("=")
    if not sep:
        raise UsageError(f"expected name=value, got {text!r}")
    return name, value


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise KeyNotFound(f"no such file: {path}") from None


def cmd_keygen(args, store: Keystore) -> int:
    if args.bits < 32:
        raise UsageError("--bits must be at least 32")
    if args.strict and args.bits < STRICT_MIN_BITS:
        raise UsageError(f"--strict requires --bits >= {STRICT_MIN_BITS}")
    if args.e < 3 or args.e % 2 == 0:
        raise UsageError("--e must be odd and at least 3")
    try:
        check_keyname(args.keyname)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    if args.keyname in store:
        raise KeyExists(f"key {args.keyname!r} already exists in {store.root}")
    key = gen_rsa_keypair(args.bits, args.e, _rng(args.seed), args.keyname)
    store.add(key)
    print(f"{key.keyname} {fingerprint(key.n)}")
    return EXIT_OK


def cmd_wbgen(args, store: Keystore) -> int:
    key = store.private(args.keyname)
    rng = _rng(args.seed)
    out = Path(args.out)
    if args.scheme == "splitkey":
        wb = wb_splitkey.gen_splitkey(key, rng)
    elif args.scheme == "obfcrt":
        wb = wb_obfcrt.gen_obfcrt(key, rng)
    else:
        wb, secrets = wb_window.gen_window(key, rng)
        if args.emit_secrets:
            out.with_suffix(".secrets").write_bytes(dump_secrets(key.keyname, secrets))
    out.write_bytes(dump_whitebox(wb))
    if args.emit_decoy:
        # looks like the real key file but belongs to an unrelated modulus
        decoy = gen_rsa_keypair(key.n.bit_length(), key.e, rng, key.keyname)
        out.with_suffix(".decoy").write_bytes(dump_private(decoy))
    print(f"{args.scheme} {key.keyname} -> {out}")
    return EXIT_OK


def _tool_rights(specs):
    rights = {}
    for spec in specs or ():
        keyname, sep, rest = spec.partition(":")
        if not sep:
            raise UsageError(f"expected KEYNAME:name=value, got {spec!r}")
        rights.setdefault(keyname, []).append(_pair(rest))
    return rights


def cmd_encrypt(args, store: Keystore) -> int:
    pubs = [store.public(name) for name in args.recipient or ()]
    pubs += [load_public(_read(path)) for path in args.recipient_pub or ()]
    if not pubs:
        raise UsageError("at least one --recipient or --recipient-pub is required")
    if args.strict:
        small = [k.keyname for k in pubs if k.n.bit_length() < STRICT_MIN_BITS]
        if small:
            raise UsageError(f"--strict: keys below {STRICT_MIN_BITS} bits: {', '.join(small)}")
    rights = _tool_rights(args.tool_control)
    unknown = set(rights) - {k.keyname for k in pubs}
    if unknown:
        raise UsageError(f"--tool-control for non-recipient key(s): {', '.join(sorted(unknown))}")
    recips = [Recipient(k, k.keyname, tuple(rights.get(k.keyname, ()))) for k in pubs]
    common = tuple(_pair(c) for c in args.control or ())
    env = encrypt_ip(_read(args.input), common, recips, args.data_method, _rng(args.seed),
                     encrypt_agent=args.agent)
    Path(args.output).write_bytes(serialize(env))
    print(f"protected for {', '.join(k.keyname for k in pubs)} -> {args.output}")
    return EXIT_OK


def _decryptor(args, store: Keystore):
    if args.wb:
        return load_whitebox(_read(args.wb))
    if args.key:
        return load_private(_read(args.key))
    return store.private(args.keyname)


def _print_rights(label, rights):
    for name, value in rights:
        print(f'{label} {name}="{value}"')


def cmd_decrypt(args, store: Keystore) -> int:
    env = parse(_read(args.input))
    key = _decryptor(args, store)
    result = decrypt_ip(env, key, key.keyname)
    Path(args.output).write_bytes(result.plaintext)
    _print_rights("common", result.common.rights)
    _print_rights("tool", result.tool_rights)
    return EXIT_OK


def cmd_verify(args, store: Keystore) -> int:
    env = parse(_read(args.input))
    keys = [store.private(name) for name in args.keyname or ()]
    keys += [load_whitebox(_read(path)) for path in args.wb or ()]
    if not keys:
        have = {name for name in store.names() if store.private_path(name).exists()}
        keys = [store.private(t.keyname) for t in env.tools if t.keyname in have]
    for key in keys:
        env.tool(key.keyname)
    bad = []
    checked = {k.keyname: k for k in keys}
    for tool in env.tools:
        key = checked.get(tool.keyname)
        if key is None:
            print(f"{tool.keyname}: skipped (no key)")
            continue
        ok = verify_digest(unwrap_session_key(tool, key), env.common, tool)
        print(f"{tool.keyname}: {'ok' if ok else 'MISMATCH'}")
        if not ok:
            bad.append(tool.keyname)
    if not checked:
        raise UsageError("no key available for any tool block; pass --keyname or --wb")
    if bad:
        raise DigestMismatch(", ".join(bad))
    return EXIT_OK


def cmd_attack(args, store: Keystore) -> int:
    wb = load_whitebox(_read(args.wb))
    if args.scheme and args.scheme != wb.scheme:
        raise UsageError(f"--scheme {args.scheme} but {args.wb} holds a {wb.scheme} white-box")
    try:
        method = resolve_method(wb.scheme, args.method)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    if args.verify_only:
        if method != "matrix":
            raise UsageError("--verify-only is only defined for --method matrix")
        wb_window.am_structure(wb)
        print(f"{wb.keyname}: A*M has the unit-row structure")
        return EXIT_OK
    if args.pub:
        e = load_public(_read(args.pub)).e
    elif args.e is not None:
        e = args.e
    else:
        raise UsageError("one of --e or --pub is required")
    rec, report = run_attack(wb, e, method, _rng(args.seed))
    if args.report:
        Path(args.report).write_bytes(report.dump())
    if args.key_out and report.ok:
        Path(args.key_out).write_bytes(dump_private(rec.private_key(wb.keyname)))
    for name, ok in report.verdicts:
        print(f"{name}: {'true' if ok else 'false'}")
    if not report.ok:
        raise AttackInconsistent(",".join(report.failed()))
    print(f"d={to_hex(rec.d)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ipvault", description="Protected-IP envelopes and white-box RSA attacks")
    parser.add_argument("--store", help="keystore directory (default: $IPVAULT_STORE or ./.ipvault)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate an RSA keypair into the keystore")
    p.add_argument("--bits", type=int, default=2048)
    p.add_argument("--e", type=_int, default=65537)
    p.add_argument("--keyname", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--strict", action="store_true", help=f"enforce >= {STRICT_MIN_BITS}-bit keys")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("wbgen", help="generate a white-box for a stored key")
    p.add_argument("--scheme", required=True, choices=sorted(METHODS))
    p.add_argument("--keyname", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--emit-secrets", action="store_true",
                   help="window scheme: also write pi, r and d to <out>.secrets")
    p.add_argument("--emit-decoy", action="store_true",
                   help="also write an unrelated plaintext key to <out>.decoy")
    p.set_defaults(func=cmd_wbgen)

    p = sub.add_parser("encrypt", help="protect a file for one or more recipients")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--recipient", action="append", metavar="KEYNAME")
    p.add_argument("--recipient-pub", action="append", metavar="FILE")
    p.add_argument("--control", action="append", metavar="NAME=VALUE", help="common right")
    p.add_argument("--tool-control", action="append", metavar="KEYNAME:NAME=VALUE")
    p.add_argument("--data-method", choices=sorted(DATA_METHODS), default="aes128-cbc")
    p.add_argument("--agent", default=DEFAULT_AGENT)
    p.add_argument("--seed", type=int)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="open an envelope with a key or a white-box")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--keyname")
    g.add_argument("--wb", metavar="FILE")
    g.add_argument("--key", metavar="FILE", help="private key file, e.g. from attack --key-out")
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("verify", help="check tool-block digests without touching the data")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--keyname", action="append")
    p.add_argument("--wb", action="append", metavar="FILE")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("attack", help="extract the RSA key from a white-box file")
    p.add_argument("--scheme", choices=sorted(METHODS))
    p.add_argument("--wb", required=True, metavar="FILE")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--e", type=_int)
    g.add_argument("--pub", metavar="FILE")
    p.add_argument("--method", default="auto",
                   choices=["auto", "chosen-ciphertext", "matrix", "miller", "gcd"])
    p.add_argument("--report", metavar="PATH")
    p.add_argument("--key-out", metavar="PATH", help="write the recovered private key here")
    p.add_argument("--seed", type=int)
    p.add_argument("--verify-only", action="store_true",
                   help="matrix method: only check the A*M structure")
    p.set_defaults(func=cmd_attack)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    store = Keystore(args.store)
    try:
        return args.func(args, store)
    except UsageError as exc:
        print(f"ipvault: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyExists as exc:
        print(f"ipvault: {exc}", file=sys.stderr)
        return EXIT_DUPLICATE
    except DigestMismatch as exc:
        print(f"ipvault: {exc}", file=sys.stderr)
        return EXIT_DIGEST
    except NoSuchToolBlock as exc:
        print(f"ipvault: {exc}", file=sys.stderr)
        return EXIT_NO_TOOL
    except (AttackInconsistent, FactorFailure) as exc:
        print(f"ipvault: attack failed: {exc}", file=sys.stderr)
        return EXIT_ATTACK
    except (UnwrapError, PaddingError) as exc:
        print(f"ipvault: {exc}", file=sys.stderr)
        return EXIT_UNWRAP
    except KeyNotFound as exc:
        print(f"ipvault: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except (ParseError, DomainError) as exc:
        print(f"ipvault: {exc}", file=sys.stderr)
        return EXIT_DATAERR


if __name__ == "__main__":
    sys.exit(main())
