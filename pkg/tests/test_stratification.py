import pytest

from quadsum.algebra import GF, QQ, Polynomial
from quadsum.corpus import companion
from quadsum.errors import NotFreeOnPrefix, PropertyViolated, PreconditionUnverifiable, SpanGapOnPrefix
from quadsum.linalg import Vec
from quadsum.operators import (
    CompanionBlockSum,
    DirectSum,
    Difference,
    DownShift,
    FiniteRankPatch,
    ScalarIdentity,
    Shift,
    apply,
)
from quadsum.stratification import (
    INF,
    MappedStrat,
    arithmetic_strat,
    check_properties,
    connector,
    finite_strat,
    tower_compose,
    verify_elementary,
)
from quadsum.torsion import good_strat_index2, split_dominant, torsion_good_strat

F2, F3 = GF(2), GF(3)


def e(f, n):
    return Vec.e(f, n)


def v_law_holds(v, a, prefix):
    return all(apply(v, v.column(n)) == v.column(n).scale(a) for n in range(prefix))


def test_property_flags():
    s = arithmetic_strat(DownShift(QQ), 1, 2, 2)
    fl = check_properties(s)
    assert fl.PA and fl.PAplus and fl.PM and fl.good
    fl = check_properties(finite_strat(Shift(QQ), [(e(QQ, 0), INF)]))
    assert not fl.PM
    s = arithmetic_strat(DownShift(QQ), 3, 2, 2, head=[(e(QQ, 0), 1)])
    fl = check_properties(s)
    assert fl.PA and not fl.PAplus


def test_connector_downshift_square_zero():
    s = arithmetic_strat(DownShift(QQ), 1, 2, 2)
    v = connector(s, 0)
    for k in range(20):
        assert v.column(2 * k) == -e(QQ, 2 * k + 3)
        assert not v.column(2 * k + 1)
    assert v_law_holds(v, 0, 256)
    cert = verify_elementary(Difference(DownShift(QQ), v), [e(QQ, 1)], 64)
    assert len(cert.generators) == 1


def test_connector_downshift_idempotent_f2():
    s = arithmetic_strat(DownShift(F2), 1, 2, 2)
    v = connector(s, 1)
    for k in range(20):
        assert v.column(2 * k) == e(F2, 2 * k) + e(F2, 2 * k + 3)
    assert v_law_holds(v, 1, 256)


def test_connector_needs_pm():
    # a single infinite stratum is the last one, so PM fails
    s = finite_strat(Shift(QQ), [(e(QQ, 0), INF)])
    with pytest.raises(PropertyViolated):
        connector(s, 1)


def test_verify_elementary_examples():
    assert verify_elementary(Shift(QQ), [e(QQ, 0)], 64).verified_prefix == 64
    with pytest.raises(NotFreeOnPrefix):
        verify_elementary(DownShift(QQ), [e(QQ, 0)], 2)
    with pytest.raises(SpanGapOnPrefix):
        verify_elementary(Shift(QQ), [e(QQ, 1)], 8)


def test_index2_companion_t2():
    s = good_strat_index2(companion(QQ, [0, 0, 1]), 0)
    assert s.flags().good
    assert all(n == 2 for _, _, n in s.prefix(12))


def test_index2_with_kernel_lines():
    u = companion(QQ, [0, 0, 1], [0, 1])
    s = good_strat_index2(u, 0)
    assert s.flags().good
    for a in (0, 1, 2):
        v = connector(s, a)
        assert v_law_holds(v, a, 256)
        verify_elementary(Difference(u, v), s.elementary_generators(), 256)


def test_index2_refuses_zero():
    with pytest.raises(PreconditionUnverifiable):
        good_strat_index2(ScalarIdentity(QQ, 0), 0)


def test_torsion_downshift():
    s = torsion_good_strat(DownShift(QQ))
    assert s.flags().good
    strata = s.prefix(6)
    assert [x for _, x, _ in strata] == [e(QQ, 2 * k + 1) for k in range(6)]
    assert all(n == 2 for _, _, n in strata)
    v = connector(s, 0)
    verify_elementary(Difference(DownShift(QQ), v), s.elementary_generators(), 128)


def test_torsion_companion_t3():
    s = torsion_good_strat(companion(QQ, [0, 0, 0, 1]))
    assert s.flags().good
    assert all(2 <= n <= 3 for _, _, n in s.prefix(12))


def test_torsion_repeated_root():
    u = companion(QQ, [1, -2, 1])
    s = torsion_good_strat(u)
    assert s.flags().good
    v = connector(s, 1)
    assert v_law_holds(v, 1, 128)
    verify_elementary(Difference(u, v), s.elementary_generators(), 128)


def test_tower_compose():
    u = DownShift(QQ)
    lower = finite_strat(u, [(e(QQ, 1), 2)])
    upper = arithmetic_strat(u, 3, 2, 2)
    s = tower_compose(lower, upper)
    assert s.flags().good
    v = connector(s, 0)
    assert v_law_holds(v, 0, 128)
    verify_elementary(Difference(u, v), s.elementary_generators(), 128)
    with pytest.raises(PreconditionUnverifiable):
        tower_compose(finite_strat(u, []), upper)
    with pytest.raises(PreconditionUnverifiable):
        tower_compose(lower, finite_strat(u, [(e(QQ, 3), 2)]))


def test_tower_over_mapped_torsion_piece():
    u = DirectSum(Shift(QQ), DownShift(QQ))
    lower = finite_strat(u, [(e(QQ, 0), INF)])
    inner = torsion_good_strat(DownShift(QQ))
    upper = MappedStrat(u, inner, lambda n: 2 * n + 1)
    s = tower_compose(lower, upper)
    for a in (0, 1):
        v = connector(s, a)
        assert v_law_holds(v, a, 128)
        # the free chain is an infinite stratum, so it has no chain end and v kills it
        assert all(not v.column(2 * n) for n in range(64))
        verify_elementary(Difference(u, v), s.elementary_generators(), 128)


def test_split_dominant_examples():
    u = FiniteRankPatch(ScalarIdentity(QQ, 0), {0: e(QQ, 1), 1: Vec.zero(QQ)})
    d = split_dominant(u)
    assert d.lam == 0 and len(d.summands) == 1 and d.summands[0][1] == 2
    d = split_dominant(ScalarIdentity(QQ, 5))
    assert d.summands == [] and d.lam == 5
    u = FiniteRankPatch(ScalarIdentity(QQ, 2), {0: 2 * e(QQ, 0) + e(QQ, 1)})
    d = split_dominant(u)
    assert [n for _, n in d.summands] == [2]


@pytest.mark.parametrize("f", [QQ, F2, F3], ids=str)
@pytest.mark.parametrize("build", [
    lambda f: DownShift(f),
    lambda f: CompanionBlockSum(f, [Polynomial(f, [0, 0, 1])]),
    lambda f: CompanionBlockSum(f, [Polynomial(f, [0, 0, 0, 1]), Polynomial(f, [1, 0, 1])]),
    lambda f: CompanionBlockSum(f, [Polynomial(f, [0, 0, 1]), Polynomial(f, [0, 1])]),
], ids=["downshift", "t2", "t3,t2+1", "t2,t"])
def test_connector_law_on_corpus(f, build):
    u = build(f)
    s = torsion_good_strat(u)
    assert s.flags().good
    for a in range(min(3, f.characteristic or 3)):
        v = connector(s, a)
        assert v_law_holds(v, f.coerce(a), 256)
        verify_elementary(Difference(u, v), s.elementary_generators(), 256)
