import random
import re
from collections import defaultdict
from pathlib import Path

import pytest

from ipvault.numtheory import RsaPrivateKey, gen_rsa_keypair

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance = []


@pytest.fixture
def key77():
    return RsaPrivateKey(77, 7, 43, 7, 11, keyname="k77")


@pytest.fixture(scope="session")
def key512():
    return gen_rsa_keypair(512, 65537, random.Random(1), "acme")


@pytest.fixture(scope="session")
def keys512():
    """100 seeded 512-bit keys, shared by the heavier property tests."""
    return [gen_rsa_keypair(512, 65537, random.Random(seed), f"k{seed}") for seed in range(100)]


@pytest.fixture(scope="session")
def key1024():
    return gen_rsa_keypair(1024, 65537, random.Random(1024), "big")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    groups = defaultdict(list)
    for name, outcome in _acceptance:
        m = re.match(r"test_c(\d+)_(.*)", name)
        if m:
            groups[int(m.group(1))].append((m.group(2), outcome == "passed"))
    terminalreporter.section("acceptance criteria")
    for number in sorted(groups):
        parts = groups[number]
        verdict = "PASS" if all(ok for _, ok in parts) else "FAIL"
        detail = "; ".join(f"{label} {'ok' if ok else 'FAILED'}" for label, ok in parts)
        terminalreporter.write_line(f"criterion {number}: {verdict}  ({detail})")
