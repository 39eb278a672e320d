import random

import pytest

from ipvault.errors import ParseError
from ipvault.keyfile import (dump_private, dump_public, dump_secrets, dump_whitebox, load_private,
                             load_public, load_secrets, load_whitebox, read_fields, render)
from ipvault.keystore import KeyExists, KeyNotFound, Keystore
from ipvault.numtheory import gen_rsa_keypair
from ipvault.wb_obfcrt import gen_obfcrt
from ipvault.wb_splitkey import gen_splitkey
from ipvault.wb_window import gen_window


def test_private_round_trip(key512):
    data = dump_private(key512)
    assert data.startswith(b"keyname=acme\nn=") and data.endswith(b"\n")
    assert load_private(data) == key512
    assert dump_private(load_private(data)) == data


def test_public_round_trip(key512):
    pub = load_public(dump_public(key512))
    assert pub == key512.public


def test_private_layout(key77):
    assert dump_private(key77) == b"keyname=k77\nn=4d\ne=7\nd=2b\np=7\nq=b\n"


@pytest.mark.parametrize("data,line", [
    (b"keyname=k77\nn=4d\ne=7\nd=2b\np=7\n", None),
    (b"keyname=k77\nn=4D\ne=7\nd=2b\np=7\nq=b\n", 2),
    (b"keyname=k77\nn=4d\ne=7\nd=02b\np=7\nq=b\n", 4),
    (b"keyname=k77\ne=7\nn=4d\nd=2b\np=7\nq=b\n", 2),
    (b"keyname=k77\nn=4d\ne=7\nd=2b\np=7\nq=b\nx=1\n", 7),
    (b"keyname=k77\nn=4d\ne=7\nd=2b\np=7\nq=b", 6),
    (b"keyname=k77\r\nn=4d\ne=7\nd=2b\np=7\nq=b\n", 1),
    (b"keyname=k77\nn=4d\ne=7\nd=2c\np=7\nq=b\n", 2),
    (b"keyname=k77\nn4d\ne=7\nd=2b\np=7\nq=b\n", 2),
])
def test_private_parse_errors(data, line):
    with pytest.raises(ParseError) as info:
        load_private(data)
    assert info.value.line == line


def test_render_rejects_newlines():
    from ipvault.errors import DomainError
    with pytest.raises(DomainError):
        render([("a", "x\ny")])


def test_read_fields_order():
    assert read_fields(b"a=1\nb==2\n", ["a", "b"]) == {"a": "1", "b": "=2"}


@pytest.mark.parametrize("make", [
    lambda k: gen_splitkey(k, random.Random(1)),
    lambda k: gen_obfcrt(k, random.Random(1)),
    lambda k: gen_window(k, random.Random(1))[0],
])
def test_whitebox_round_trip(key512, make):
    wb = make(key512)
    data = dump_whitebox(wb)
    back = load_whitebox(data)
    assert back == wb and dump_whitebox(back) == data
    c = 424242
    assert back.decrypt(c) == pow(c, key512.d, key512.n)


def test_window_file_layout(key512):
    wb, _ = gen_window(key512, random.Random(1))
    lines = dump_whitebox(wb).decode().splitlines()
    assert [x.split("=")[0] for x in lines[:8]] == \
        ["scheme", "keyname", "n", "alpha", "beta", "rconst", "dhat", "tprime"]
    assert lines[0] == "scheme=window" and len(lines) == 8 + 32
    assert len(lines[7].split(",")) == 32
    assert all(len(x.split("=")[1].split(",")) == 33 for x in lines[8:])
    assert lines[6] == "dhat=" + ",".join(map(str, wb.dhat))


def test_window_unreduced_entry(key512):
    wb, _ = gen_window(key512, random.Random(1))
    lines = dump_whitebox(wb).decode().split("\n")
    lines[8] = "a0=" + format(wb.n, "x") + lines[8][lines[8].index(","):]
    with pytest.raises(ParseError) as info:
        load_whitebox("\n".join(lines).encode())
    assert info.value.line == 9


def test_unknown_scheme():
    with pytest.raises(ParseError):
        load_whitebox(b"scheme=rot13\n")
    with pytest.raises(ParseError):
        load_whitebox(b"keyname=x\n")


def test_malformed_share_becomes_parse_error(key77):
    data = b"scheme=splitkey\nkeyname=k\nn=4d\nd1=1\nd2=1\nd3=100000000\nd4=0\n"
    with pytest.raises(ParseError):
        load_whitebox(data)


def test_secrets_round_trip(key512):
    wb, secrets = gen_window(key512, random.Random(1))
    name, back = load_secrets(dump_secrets("acme", secrets))
    assert name == "acme" and back == secrets


def test_keystore(tmp_path, key512):
    store = Keystore(tmp_path / "ks")
    assert store.names() == [] and "acme" not in store
    store.add(key512)
    assert store.names() == ["acme"] and "acme" in store
    assert store.private("acme") == key512
    assert store.public("acme") == key512.public
    with pytest.raises(KeyExists):
        store.add(key512)
    with pytest.raises(KeyNotFound):
        store.private("nobody")


def test_keystore_env(tmp_path, monkeypatch):
    monkeypatch.setenv("IPVAULT_STORE", str(tmp_path / "env"))
    assert Keystore().root == tmp_path / "env"


def test_keystore_public_only(tmp_path, key512):
    store = Keystore(tmp_path)
    (tmp_path / "acme.pub").write_bytes(dump_public(key512))
    assert store.public("acme") == key512.public
    with pytest.raises(KeyNotFound):
        store.private("acme")


def test_keystore_rejects_path_names(tmp_path):
    from ipvault.errors import DomainError
    store = Keystore(tmp_path)
    for bad in ("../x", "a/b", "", ".hidden"):
        with pytest.raises(DomainError):
            store.private_path(bad)


def test_same_seed_same_file(key512):
    again = gen_rsa_keypair(512, 65537, random.Random(1), "acme")
    assert dump_private(again) == dump_private(key512)
