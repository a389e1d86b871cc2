import itertools
import random
from fractions import Fraction

import pytest

from quadsum.algebra import GF, QQ, Scalar, target_from_roots
from quadsum.certificate import check_three_sum
from quadsum.errors import ConditionViolated
from quadsum.operators import ScalarIdentity
from quadsum.scalar_sums import (
    scalar_identity_decomposition,
    scalar_is_sum,
    trace_condition,
    two_by_two_identity_triple,
)

from helpers import brute, root_pairs

F2, F3, F5 = GF(2), GF(3), GF(5)


def sc(f, x):
    return Scalar(f.coerce(x), f)


def mat_mul(f, X, Y):
    return [[f.add(f.mul(X[i][0], Y[0][j]), f.mul(X[i][1], Y[1][j])) for j in range(2)] for i in range(2)]


def annihilated(f, M, t):
    """p(M) = M^2 - tr M + const I with 2x2 arithmetic written out."""
    x, y = t.x.value, t.y.value
    s, p = f.add(x, y), f.mul(x, y)
    M2 = mat_mul(f, M, M)
    for i in range(2):
        for j in range(2):
            v = f.sub(M2[i][j], f.mul(s, M[i][j]))
            if i == j:
                v = f.add(v, p)
            if v != 0:
                return False
    return True


def test_scalar_is_sum_examples():
    w = scalar_is_sum(sc(QQ, 0), (target_from_roots(QQ, 0, 0),) * 3)
    assert [x.value for x in w.parts] == [0, 0, 0]
    w = scalar_is_sum(sc(QQ, 2), (target_from_roots(QQ, 0, 1),) * 3)
    assert sorted(x.value for x in w.parts) == [0, 1, 1]
    assert scalar_is_sum(sc(F3, 1), (target_from_roots(F3, 0, 0),) * 3) is None


def test_trace_condition_examples():
    sz2 = (target_from_roots(F2, 0, 0),) * 3
    assert trace_condition(sc(F2, 0), sz2) and trace_condition(sc(F2, 1), sz2)
    szq = (target_from_roots(QQ, 0, 0),) * 3
    assert trace_condition(sc(QQ, 0), szq)
    assert not trace_condition(sc(QQ, 1), szq)


def test_two_by_two_f2_example():
    tr = two_by_two_identity_triple(sc(F2, 1), (target_from_roots(F2, 0, 0),) * 3)
    assert tr.A.rows == [[0, 1], [0, 0]] or [list(r) for r in tr.A.rows] == [[0, 1], [0, 0]]
    assert [list(r) for r in tr.B.rows] == [[0, 0], [1, 0]]
    assert [list(r) for r in tr.C.rows] == [[1, 1], [1, 1]]


def test_two_by_two_rational_idempotents():
    ts = (target_from_roots(QQ, 0, 1),) * 3
    tr = two_by_two_identity_triple(sc(QQ, Fraction(3, 2)), ts)
    rows = [[list(r) for r in M.rows] for M in (tr.A, tr.B, tr.C)]
    for M in rows:
        assert annihilated(QQ, M, ts[0])
    total = [[sum(M[i][j] for M in rows) for j in range(2)] for i in range(2)]
    assert total == [[Fraction(3, 2), 0], [0, Fraction(3, 2)]]


@pytest.mark.parametrize("f", [F2, F3, F5], ids=str)
def test_scalar_is_sum_exhaustive(f):
    pairs = root_pairs(f)
    for roots in itertools.product(pairs, repeat=3):
        ts = tuple(target_from_roots(f, x, y) for x, y in roots)
        for lam in f.elements():
            assert (scalar_is_sum(sc(f, lam), ts) is not None) == brute(f, lam, roots)


def test_scalar_is_sum_random_rationals():
    rng = random.Random(0)
    for _ in range(500):
        roots = [(Fraction(rng.randint(-4, 4), rng.randint(1, 3)), Fraction(rng.randint(-4, 4), rng.randint(1, 3)))
                 for _ in range(3)]
        ts = tuple(target_from_roots(QQ, x, y) for x, y in roots)
        if rng.random() < 0.5:
            lam = sum(r[rng.randint(0, 1)] for r in roots)
        else:
            lam = Fraction(rng.randint(-9, 9), rng.randint(1, 4))
        assert (scalar_is_sum(sc(QQ, lam), ts) is not None) == brute(QQ, lam, roots)


def test_two_by_two_random():
    rng = random.Random(1)
    done = 0
    while done < 200:
        f = rng.choice([F2, F3, F5, QQ])
        roots = [(rng.randint(-3, 3), rng.randint(-3, 3)) for _ in range(3)]
        ts = tuple(target_from_roots(f, x, y) for x, y in roots)
        total = f.zero
        for t in ts:
            total = f.add(total, t.trace.value)
        two = f.add(f.one, f.one)
        if two == 0:
            if total != 0:
                continue
            lam = f.coerce(rng.randint(0, 1))
        else:
            lam = f.div(total, two)
        tr = two_by_two_identity_triple(sc(f, lam), ts)
        rows = [[list(r) for r in M.rows] for M in (tr.A, tr.B, tr.C)]
        for M, t in zip(rows, ts):
            assert annihilated(f, M, t)
        for i in range(2):
            for j in range(2):
                s = f.add(f.add(rows[0][i][j], rows[1][i][j]), rows[2][i][j])
                assert s == (lam if i == j else f.zero)
        done += 1


def test_decomposition_examples():
    cert = scalar_identity_decomposition(sc(QQ, 0), (target_from_roots(QQ, 0, 0),) * 3, 64)
    assert all(isinstance(s, ScalarIdentity) and s.value == 0 for s in cert.summands)
    ts = (target_from_roots(F2, 0, 0),) * 3
    cert = scalar_identity_decomposition(sc(F2, 1), ts, 512)
    assert check_three_sum(ScalarIdentity(F2, 1), cert.summands, ts, 512).ok
    assert "two_by_two" in cert.sub
    with pytest.raises(ConditionViolated):
        scalar_identity_decomposition(sc(QQ, 1), (target_from_roots(QQ, 0, 0),) * 3, 64)


@pytest.mark.parametrize("f", [F2, F3, QQ], ids=str)
def test_refusal_completeness(f):
    els = list(f.elements()) if f.characteristic else [0, 1, 2, Fraction(1, 2), -1]
    for roots in itertools.product([(0, 0), (0, 1), (1, 2)], repeat=3):
        ts = tuple(target_from_roots(f, x, y) for x, y in roots)
        for lam in els:
            s = sc(f, lam)
            ok = scalar_is_sum(s, ts) is not None or trace_condition(s, ts)
            try:
                cert = scalar_identity_decomposition(s, ts, 16)
            except ConditionViolated:
                assert not ok
            else:
                assert ok and check_three_sum(ScalarIdentity(f, lam), cert.summands, ts, 16).ok
