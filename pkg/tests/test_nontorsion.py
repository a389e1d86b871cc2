from itertools import count

import pytest

from quadsum.algebra import GF, QQ
from quadsum.corpus import companion, shift_plus_zero_line
from quadsum.errors import PreconditionUnverifiable
from quadsum.linalg import Echelon, Vec
from quadsum.nontorsion import (
    HBasis,
    SewingTable,
    assemble_a_elementary,
    nontorsion_decompose,
    quasi_maximal_free,
    sewing,
)
from quadsum.operators import Difference, DirectSum, Layout, ScalarIdentity, Shift, Sum, apply
from quadsum.stratification import verify_elementary

F2, F3 = GF(2), GF(3)


def e(f, n):
    return Vec.e(f, n)


def square_law(v, a, prefix):
    for n in range(prefix):
        c = v.column(n)
        if apply(v, c) != c.scale(a):
            return False
    return True


def lines_plus_shift(f, p):
    """p lines killed by u, then the shift; x = e_p generates the free part."""
    return DirectSum(ScalarIdentity(f, 0), Shift(f), Layout("prefix", p))


def test_quasi_maximal_free_examples():
    assert quasi_maximal_free(Shift(QQ)) == [e(QQ, 0)]
    assert quasi_maximal_free(shift_plus_zero_line(QQ)) == [e(QQ, 1)]
    with pytest.raises(PreconditionUnverifiable):
        quasi_maximal_free(companion(QQ, [0, 0, 1]))


def test_sewing_table_finite_a_zero():
    t = SewingTable(QQ.zero, 1, QQ)
    assert t.case == ("a_zero", "V2_finite(1)")
    assert t.rule(("e", 0)) == {("e", 1): 1, ("f", 0): -1}
    assert t.rule(("e", 1)) == {("e", 1): -1, ("f", 0): 1}
    assert t.rule(("e", 2)) == {}
    assert t.rule(("f", 0)) == {("e", 1): -1, ("f", 0): 1}
    assert all(t.rule(("e", k)) == {} for k in range(3, 30))


def test_sewing_table_a_nonzero():
    t = SewingTable(F2.one, None, F2)
    assert t.case == ("a_nonzero", "V2_infinite")
    assert t.rule(("f", 4)) == {("e", 13): 1, ("f", 4): 1}
    assert t.rule(("e", 12)) == {("e", 13): 1, ("f", 4): 1}
    assert t.rule(("e", 13)) == {}


def test_sewing_first_iterates():
    u = shift_plus_zero_line(QQ)
    v = sewing(u, e(QQ, 1), HBasis([e(QQ, 0)]), 0, 0)
    w = Difference(u, v)
    assert apply(w, e(QQ, 1)) == e(QQ, 0)
    its, x = [], e(QQ, 1)
    for _ in range(4):
        its.append(x)
        x = apply(w, x)
    ech = Echelon(QQ)
    for y in its:
        ech.add(y)
    assert all(ech.contains(e(QQ, n)) for n in (0, 1, 2))


def test_sewing_infinite_h_f2():
    u = DirectSum(Shift(F2), ScalarIdentity(F2, 0))
    H = HBasis([], lambda: (e(F2, 2 * n + 1) for n in count()))
    v = sewing(u, e(F2, 0), H, 0, 1)
    assert square_law(v, F2.one, 256)
    verify_elementary(Difference(u, v), [e(F2, 0)], 256)


@pytest.mark.parametrize("f", [QQ, F2, F3], ids=str)
@pytest.mark.parametrize("p", [1, 2, 3])
def test_sewing_span_identity(f, p):
    u = lines_plus_shift(f, p)
    x = e(f, p)
    for a in (f.zero, f.one):
        v = sewing(u, x, HBasis([e(f, i) for i in range(p)]), 0, a)
        w = Difference(u, v)
        ech, y = Echelon(f), x
        for q in range(41):
            ech.add(y)
            y = apply(w, y)
            if q >= 4 * p:
                want = [e(f, p + i) for i in range(q - p + 1)] + [e(f, i) for i in range(p)]
                assert ech.dim == q + 1
                assert all(ech.contains(z) for z in want)


def test_nontorsion_decompose_examples():
    s = nontorsion_decompose(shift_plus_zero_line(QQ))
    assert s.W_is_F and s.H.dim == 1 and s.lam == 0
    assert s.F_generators == [e(QQ, 1)]

    s = nontorsion_decompose(DirectSum(Shift(QQ), ScalarIdentity(QQ, 2)))
    assert s.W_is_F and s.H.dim is None and s.lam == 2
    h = iter(s.H)
    assert [next(h) for _ in range(3)] == [e(QQ, 1), e(QQ, 3), e(QQ, 5)]

    s = nontorsion_decompose(DirectSum(companion(QQ, [0, 0, 1]), Shift(QQ), Layout("prefix", 2)))
    assert not s.W_is_F and [d for _, d in s.G] == [2]


ASSEMBLY = {
    "shift+line": lambda f: shift_plus_zero_line(f),
    "shift+eigenspace": lambda f: DirectSum(Shift(f), ScalarIdentity(f, 1)),
    "shift+t2 block": lambda f: DirectSum(companion(f, [0, 0, 1]), Shift(f), Layout("prefix", 2)),
    "shift+2 lines": lambda f: lines_plus_shift(f, 2),
}


@pytest.mark.parametrize("f", [QQ, F2, F3], ids=str)
@pytest.mark.parametrize("name", sorted(ASSEMBLY))
def test_assemble_a_elementary(f, name):
    u = ASSEMBLY[name](f)
    split = nontorsion_decompose(u)
    for a in (f.zero, f.one):
        r = assemble_a_elementary(u, split, a)
        assert square_law(r.v, a, 128)
        verify_elementary(Difference(u, r.v), r.generators, 128)


def test_assemble_commutes_with_shift():
    # u - c id has the same split up to lam, and u - c id - v is elementary with the same law
    f = F3
    c = f.coerce(2)
    u = shift_plus_zero_line(f)
    uc = Sum(u, ScalarIdentity(f, f.neg(c)))
    r = assemble_a_elementary(uc, nontorsion_decompose(uc), 1)
    assert square_law(r.v, f.one, 128)
    verify_elementary(Difference(uc, r.v), r.generators, 128)
