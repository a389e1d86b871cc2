import pytest
from hypothesis import given
from hypothesis import strategies as st

from quadsum.algebra import GF, QQ, Polynomial
from quadsum.corpus import dominant_cases, no_dominant_cases
from quadsum.errors import FieldMismatch
from quadsum.linalg import Vec
from quadsum.operators import (
    NO,
    YES,
    BandedPeriodic,
    CompanionBlockSum,
    DownShift,
    FiniteRankPatch,
    ScalarIdentity,
    Shift,
    apply,
    classify_structure,
    eval_poly,
    identity,
    op_compose,
    op_scale,
    op_sub,
    verify_annihilated,
)

F2 = GF(2)


def e(f, n):
    return Vec.e(f, n)


def staggered(f):
    return BandedPeriodic(f, [(1, [1, 0])])


def test_apply_examples():
    assert apply(Shift(QQ), e(QQ, 0)) == e(QQ, 1)
    assert apply(DownShift(QQ), e(QQ, 0)) == Vec.zero(QQ)
    p = FiniteRankPatch(Shift(QQ), {0: e(QQ, 0) + e(QQ, 2)})
    assert apply(p, e(QQ, 0)) == e(QQ, 0) + e(QQ, 2)
    assert apply(p, e(QQ, 3)) == e(QQ, 4)


def test_combinators():
    assert apply(op_sub(Shift(QQ), Shift(QQ)), e(QQ, 5)) == Vec.zero(QQ)
    assert apply(op_compose(Shift(QQ), Shift(QQ)), e(QQ, 0)) == e(QQ, 2)
    assert apply(op_scale(2, DownShift(QQ)), e(QQ, 1)) == 2 * e(QQ, 0)


def test_eval_poly_examples():
    t2 = Polynomial(QQ, [0, 0, 1])
    for n in range(20):
        assert not eval_poly(t2, staggered(QQ), e(QQ, n))
    assert not eval_poly(Polynomial(QQ, [0, -1, 1]), identity(QQ), e(QQ, 3))
    assert eval_poly(t2, Shift(QQ), e(QQ, 0)) == e(QQ, 2)


def test_verify_annihilated_examples():
    t2 = Polynomial(QQ, [0, 0, 1])
    assert verify_annihilated(staggered(QQ), t2, 512).ok
    rep = verify_annihilated(Shift(QQ), t2, 4)
    assert not rep.ok and rep.first_failure == 0
    assert verify_annihilated(identity(QQ), Polynomial(QQ, [0, -1, 1]), 100).ok


def test_field_mismatch():
    with pytest.raises(FieldMismatch):
        apply(Shift(QQ), e(F2, 0))


def test_classify_structure_examples():
    tags = classify_structure(Shift(QQ))
    assert tags.dominant_candidate is None and tags.is_torsion == NO
    assert list(tags.free_part_generators) == [0]
    u = FiniteRankPatch(ScalarIdentity(QQ, 3), {0: e(QQ, 1)})
    tags = classify_structure(u)
    assert tags.dominant_candidate.value == 3 and tags.deviation_rank_finite == YES
    tags = classify_structure(CompanionBlockSum(QQ, [Polynomial(QQ, [0, 0, 1])]))
    assert tags.is_torsion == YES and tags.dominant_candidate is None


ALL = [c.op for f in (QQ, F2, GF(3)) for c in no_dominant_cases(f) + dominant_cases(f)]


def vectors(f):
    return st.dictionaries(st.integers(0, 30), st.integers(-5, 5), max_size=6).map(lambda d: Vec(f, d))


@given(st.sampled_from(ALL), st.data(), st.integers(-3, 3), st.integers(-3, 3))
def test_linearity(u, data, a, b):
    f = u.field
    x, y = data.draw(vectors(f)), data.draw(vectors(f))
    lhs = apply(u, a * x + b * y)
    assert lhs == a * apply(u, x) + b * apply(u, y)


@pytest.mark.parametrize("u", ALL, ids=repr)
def test_dominant_is_finite_deviation(u):
    """A reported dominant lam leaves u - lam id zero outside finitely many columns."""
    tags = classify_structure(u)
    if tags.dominant_candidate is None:
        return
    lam = tags.dominant_candidate.value
    bad = [n for n in range(1000) if u.column(n) != e(u.field, n).scale(lam)]
    assert len(bad) < 10


def test_no_dominant_cases_have_infinite_deviation():
    # spot check: u - lam id is non-zero on many columns for every lam in a small field
    for c in no_dominant_cases(GF(3)):
        tags = classify_structure(c.op)
        if tags.dominant_candidate is not None:
            continue
        for lam in range(3):
            moved = sum(1 for n in range(200) if c.op.column(n) != e(c.field, n).scale(lam))
            assert moved > 50, c.name


def test_memo_is_invisible():
    u = Shift(QQ)
    first = [u.column(n) for n in range(10)]
    assert first == [u.column(n) for n in range(10)] == [Shift(QQ).column(n) for n in range(10)]
