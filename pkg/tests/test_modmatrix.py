import random

import pytest
from hypothesis import given, settings, strategies as st

from ipvault.errors import DomainError, NotInvertible
from ipvault.modmatrix import ModMatrix
from ipvault.wb_window import build_M


def test_identity_inverse():
    eye = ModMatrix.identity(5, 101)
    assert eye.inverse_lower_triangular() == eye


def test_small_inverse_by_hand():
    m = ModMatrix.from_rows([[2, 0], [3, 5]], 7)
    inv = m.inverse_lower_triangular()
    # 2^-1 = 4, 5^-1 = 3, lower-left = -3 * 4 * 3 = -36 = 6 (mod 7)
    assert inv.entries == ((4, 0), (6, 3))
    assert m @ inv == ModMatrix.identity(2, 7)


def test_binomial_inverse_closed_form():
    # M(alpha, beta) maps powers of c to powers of alpha*c + beta; its inverse is
    # the map back, i.e. M(alpha^-1, -beta/alpha)
    n = 1000003
    rng = random.Random(0)
    for _ in range(5):
        alpha, beta = rng.randrange(1, n), rng.randrange(n)
        ainv = pow(alpha, -1, n)
        assert build_M(alpha, beta, n, 9).inverse_lower_triangular() == \
            build_M(ainv, -beta * ainv % n, n, 9)


def test_not_lower_triangular():
    with pytest.raises(DomainError):
        ModMatrix.from_rows([[1, 1], [0, 1]], 7).inverse_lower_triangular()


def test_singular_diagonal():
    with pytest.raises(NotInvertible):
        ModMatrix.from_rows([[3, 0], [1, 1]], 9).inverse_lower_triangular()


def test_non_square():
    with pytest.raises(DomainError):
        ModMatrix.from_rows([[1, 0, 0], [0, 1, 0]], 7).inverse_lower_triangular()


def test_shape_validation():
    with pytest.raises(DomainError):
        ModMatrix.from_rows([[1, 2], [3]], 7)
    with pytest.raises(DomainError):
        ModMatrix.from_rows([[1]], 1)


def test_matmul_shapes():
    a = ModMatrix.from_rows([[1, 2, 3]], 11)
    with pytest.raises(DomainError):
        a @ a
    with pytest.raises(DomainError):
        a.apply([1, 2])


def test_entries_reduced():
    assert ModMatrix.from_rows([[12, -1]], 11).entries == ((1, 10),)


def test_row_column_index():
    m = ModMatrix.from_rows([[1, 2], [3, 4]], 11)
    assert m.row(1) == (3, 4) and m.column(1) == (2, 4) and m[1, 0] == 3


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(3, 10**12), st.data())
def test_inverse_property(size, n, data):
    rows = []
    for i in range(size):
        row = [data.draw(st.integers(0, n - 1)) for _ in range(i)]
        row.append(1 + data.draw(st.integers(0, n - 2)))
        rows.append(row + [0] * (size - i - 1))
    m = ModMatrix.from_rows(rows, n)
    try:
        inv = m.inverse_lower_triangular()
    except NotInvertible:
        return
    eye = ModMatrix.identity(size, n)
    assert m @ inv == eye and inv @ m == eye


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10**15), st.integers(0, 10**15), st.data())
def test_matmul_associates_with_apply(n, seed, data):
    rng = random.Random(seed)
    a = ModMatrix.from_rows([[rng.randrange(n) for _ in range(3)] for _ in range(4)], n)
    b = ModMatrix.from_rows([[rng.randrange(n) for _ in range(5)] for _ in range(3)], n)
    v = [rng.randrange(n) for _ in range(5)]
    assert (a @ b).apply(v) == a.apply(b.apply(v))
