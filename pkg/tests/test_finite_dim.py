import itertools
import json
import os
import random

import pytest
from hypothesis import given, strategies as st

from quadsum.algebra import GF, QQ, Polynomial
from quadsum.certificate import check_three_sum
from quadsum.corpus import dominant_case, idempotent, lam_plus, square_zero
from quadsum.elementary_split import split_shift_squarezero
from quadsum.errors import ConditionViolated, NotQuadratic, PreconditionUnverifiable, SearchFailed
from quadsum.finite_dim import (
    annihilated_matrices,
    finite_rank_class,
    finite_rank_decompose,
    invariant_closure,
    is_stable,
    lambda_stable_search,
)
from quadsum.linalg import MatrixFin, Vec
from quadsum.operators import ScalarIdentity, Shift

from helpers import GOLDEN, golden_expected, golden_rows, plain_annihilated, random_closure_case

F2, F3, F5 = GF(2), GF(3), GF(5)


def e(f, n):
    return Vec.e(f, n)


# ---------------------------------------------------------------------------
# invariant closure


def test_closure_of_zero_operators():
    z = ScalarIdentity(QQ, 0)
    assert invariant_closure([e(QQ, 0)], z, z, z) == [e(QQ, 0)]


def test_closure_with_shift_splitters():
    A, B = split_shift_squarezero(QQ)
    z = ScalarIdentity(QQ, 0)
    W = invariant_closure([e(QQ, 0)], A, B, z)
    assert sorted(n for v in W for n in v.data) == [0, 1, 2]
    # A + B is the shift, not lam id + finite rank, so stability is not promised here
    assert not is_stable(W, (A, B, z))


def test_closure_rejects_non_quadratic():
    z = ScalarIdentity(QQ, 0)
    with pytest.raises(NotQuadratic):
        invariant_closure([e(QQ, 0)], z, z, z, polys=[Polynomial(QQ, [0, 1])] * 3)
    with pytest.raises(NotQuadratic):
        # the shift is not killed by t^2
        invariant_closure([e(QQ, 0)], Shift(QQ), z, z, polys=[Polynomial(QQ, [0, 0, 1])] * 3)


CLOSURE_CASES = [(F2, 0, [[0, 1], [0, 0]]), (F2, 1, [[1, 1], [0, 0]]), (F3, 0, [[0, 1], [0, 0]]),
                 (F2, 0, [[1, 1], [1, 1]])]


@pytest.mark.parametrize("case", range(len(CLOSURE_CASES)))
@given(st.lists(st.integers(0, 12), max_size=3, unique=True))
def test_closure_bound_and_stability(case, idx):
    # a, b, c from a verified three-sum of lam id + w; W contains im w
    f, lam, matrix = CLOSURE_CASES[case]
    u = lam_plus(f, lam, matrix)
    cert = finite_rank_decompose(u, square_zero(f), prefix=64)
    a, b, c = cert.summands
    _, cls = finite_rank_class(u)
    W = list(cls.basis) + [e(f, i) for i in idx]
    out = invariant_closure(W, a, b, c, polys=[t.monic for t in cert.targets])
    assert len(out) <= 13 * len(W)
    assert is_stable(out, (a, b, c))


# ---------------------------------------------------------------------------
# the class [w]


def test_class_of_scalar():
    lam, cls = finite_rank_class(ScalarIdentity(QQ, 3))
    assert lam.value == 3 and cls.n_of_w == 0


def test_class_nilpotent_block():
    lam, cls = finite_rank_class(lam_plus(QQ, 0, [[0, 0], [1, 0]]))
    assert lam.value == 0 and cls.n_of_w == 2
    assert [list(r) for r in cls.representative.rows] == [[0, 0], [1, 0]]


def test_class_rank_one():
    lam, cls = finite_rank_class(lam_plus(QQ, 0, [[1]]))
    assert cls.n_of_w == 1 and [list(r) for r in cls.representative.rows] == [[1]]


def test_class_needs_finite_rank():
    with pytest.raises(PreconditionUnverifiable):
        finite_rank_class(Shift(QQ))


def _f2_span(vecs):
    out = {0}
    for v in vecs:
        out |= {x ^ v for x in out}
    return out


def _minimal_dim_f2(cols, d):
    """Smallest dim of W <= F_2^d with im w <= W and W + ker w = F_2^d, by exhaustion."""
    def w(x):
        y = 0
        for j in range(d):
            if x >> j & 1:
                y ^= cols[j]
        return y

    img = _f2_span(cols)
    ker = {x for x in range(1 << d) if w(x) == 0}
    full = (1 << d) - 1
    for k in range(d + 1):
        for gens in itertools.combinations(range(1, 1 << d), k):
            W = _f2_span(gens)
            if len(W) != 1 << k or not img <= W:
                continue
            if len({a ^ b for a in W for b in ker}) == full + 1:
                return k
    return d


@given(st.integers(1, 3).flatmap(lambda d: st.lists(st.integers(0, (1 << d) - 1), min_size=d, max_size=d)))
def test_class_minimality_f2(cols):
    d = len(cols)
    matrix = [[cols[j] >> i & 1 for j in range(d)] for i in range(d)]
    _, cls = finite_rank_class(lam_plus(F2, 0, matrix))
    assert cls.n_of_w == _minimal_dim_f2(cols, d)


# ---------------------------------------------------------------------------
# enumeration and necessity


@pytest.mark.parametrize("p,n", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2)])
@pytest.mark.parametrize("c0,c1", [(0, 0), (0, 1)])
def test_enumeration_matches_plain_loops(p, n, c0, c1):
    got = [tuple(int(x) for x in X.flatten()) for X in annihilated_matrices(p, n, c0, c1)]
    assert got == plain_annihilated(p, n, c0, c1)


@pytest.mark.parametrize("p,n", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)])
def test_sums_of_three_square_zero_have_trace_zero(p, n):
    S = plain_annihilated(p, n, 0, 0) if n < 3 else [tuple(int(x) for x in X.flatten())
                                                     for X in annihilated_matrices(p, n, 0, 0)]
    tr = {sum(X[i * n + i] for i in range(n)) % p for X in S}
    assert tr == {0}
    if n <= 2:
        sums = {tuple((a + b + c) % p for a, b, c in zip(X, Y, Z)) for X in S for Y in S for Z in S}
        assert all(sum(M[i * n + i] for i in range(n)) % p == 0 for M in sums)


# ---------------------------------------------------------------------------
# lambda-stable search


def test_stable_search_zero():
    w = lambda_stable_search(MatrixFin.raw(F2, [[0]]), 0, square_zero(F2))
    assert w.q == 0 and all(X.is_zero() for X in w.matrices)


def test_stable_search_refuses_trace_one():
    with pytest.raises(ConditionViolated):
        lambda_stable_search(MatrixFin.raw(F2, [[1]]), 0, square_zero(F2))


def test_stable_search_identity_2():
    # I_2 = E_21 + E_12 + J over F_2, found by enumeration at q = 0
    A = MatrixFin.raw(F2, [[1, 0], [0, 1]])
    w = lambda_stable_search(A, 0, square_zero(F2), q_max=4)
    assert w.q == 0
    assert w.matrices[0] + w.matrices[1] + w.matrices[2] == A
    assert all(X.poly_eval(Polynomial(F2, [0, 0, 1])).is_zero() for X in w.matrices)


def test_stable_search_reports_range():
    # over F_5 only structured witnesses are tried; the identity is not one of them
    with pytest.raises(SearchFailed, match="structured"):
        lambda_stable_search(MatrixFin.raw(F5, [[1, 0], [0, 4]]), 0, square_zero(F5), q_max=1)


def test_golden_lambda_stable():
    rows = golden_rows()
    if os.environ.get("QUADSUM_REGEN_GOLDEN"):
        GOLDEN.parent.mkdir(exist_ok=True)
        GOLDEN.write_text(json.dumps(rows, indent=1) + "\n")
    assert rows == golden_expected()


# ---------------------------------------------------------------------------
# finite-rank decomposition


def test_decompose_nilpotent_f2():
    c = dominant_case("n", F2, 0, [[0, 1], [0, 0]])
    cert = finite_rank_decompose(c.op, square_zero(F2), prefix=128)
    assert check_three_sum(c.op, cert.summands, cert.targets, 128).ok


def test_decompose_scalar():
    u = ScalarIdentity(F3, 0)
    cert = finite_rank_decompose(u, square_zero(F3), prefix=64)
    assert check_three_sum(u, cert.summands, cert.targets, 64).ok


def test_decompose_refuses_trace_over_q():
    with pytest.raises(ConditionViolated) as exc:
        finite_rank_decompose(lam_plus(QQ, 0, [[1]]), square_zero(QQ))
    assert "finite rank and non-zero trace" in exc.value.conditions


@pytest.mark.parametrize("lam,matrix", [(0, [[0, 1], [0, 0]]), (1, [[1, 1], [0, 0]]), (0, [[1, 1], [1, 1]]),
                                        (1, [])])
def test_decompose_certificates_verify_f2(lam, matrix):
    u = lam_plus(F2, lam, matrix)
    for targets in (square_zero(F2), idempotent(F2)):
        try:
            cert = finite_rank_decompose(u, targets, prefix=128)
        except (ConditionViolated, SearchFailed):
            continue
        assert check_three_sum(u, cert.summands, targets, 128).ok


@pytest.mark.parametrize("seed", range(20))
def test_closure_random_quadratic_triples(seed):
    rng = random.Random(seed)
    f = (F2, F3)[seed % 2]
    W, ops, polys = random_closure_case(rng, f)
    out = invariant_closure(W, *ops, polys=polys)
    assert len(out) <= 13 * len(W)
    assert is_stable(out, ops)
