"""Named operators and test corpora.

Every corpus entry records, by construction, whether it has a dominant
eigenvalue and if so lam and tr(u - lam id); refusal oracles use only that.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .algebra import QQ, GF, FieldSpec, Polynomial, target_from_roots
from .finite_dim import FINITE_RANK_NONZERO_TRACE, FINITE_RANK_TRACE_NOT_0_OR_LAM
from .linalg import Vec
from .operators import (
    CompanionBlockSum,
    DiagonalPeriodic,
    DirectSum,
    DownShift,
    FiniteRankPatch,
    Layout,
    Operator,
    ScalarIdentity,
    Shift,
    Sum,
)


@dataclass
class Case:
    name: str
    op: Operator
    lam: Optional[object] = None  # dominant eigenvalue, None if there is none
    trace_w: Optional[object] = None  # tr(u - lam id) when that has finite rank

    @property
    def field(self) -> FieldSpec:
        return self.op.field


def square_zero(f):
    return (target_from_roots(f, 0, 0),) * 3


def idempotent(f):
    return (target_from_roots(f, 0, 1),) * 3


def lam_plus(f, lam, matrix) -> Operator:
    """lam id + w, where w acts by ``matrix`` on e_0..e_{k-1} and kills the rest."""
    cols = {}
    for n in range(len(matrix)):
        d = {}
        for i, row in enumerate(matrix):
            c = f.coerce(row[n])
            if i == n:
                c = f.add(c, f.coerce(lam))
            if c != 0:
                d[i] = c
        cols[n] = Vec(f, d)
    return FiniteRankPatch(ScalarIdentity(f, lam), cols)


def dominant_case(name, f, lam, matrix) -> Case:
    tr = f.zero
    for i in range(len(matrix)):
        tr = f.add(tr, f.coerce(matrix[i][i]))
    return Case(name, lam_plus(f, lam, matrix), f.coerce(lam), tr)


def companion(f, *polys) -> Operator:
    return CompanionBlockSum(f, [Polynomial(f, p) for p in polys])


def shift_plus_zero_line(f) -> Operator:
    """The shift with one extra line killed by u; the obstruction module of the sewing route."""
    return DirectSum(ScalarIdentity(f, 0), Shift(f), Layout("prefix", 1))


def no_dominant_cases(f) -> list:
    one = f.one
    out = [
        Case("shift", Shift(f)),
        Case("downshift", DownShift(f)),
        Case("shift+1", Sum(Shift(f), ScalarIdentity(f, one))),
        Case("companion t^2", companion(f, [0, 0, 1])),
        Case("companion t^2+1", companion(f, [1, 0, 1])),
        Case("companion t^2, t^3", companion(f, [0, 0, 1], [0, 0, 0, 1])),
        Case("diagonal 0,1", DiagonalPeriodic(f, [0, 1])),
        Case("shift (+) zero line", shift_plus_zero_line(f)),
        Case("shift (+) downshift", DirectSum(Shift(f), DownShift(f))),
        Case("shift (+) companion t^2", DirectSum(Shift(f), companion(f, [0, 0, 1]))),
        # torsion status of a patched shift is not readable from the tree: Unresolved by design
        Case("shift with patch", FiniteRankPatch(Shift(f), {0: Vec(f, {0: one, 1: one})})),
        Case("companion t^2-t", companion(f, [0, -1, 1])),
    ]
    return out


def dominant_cases(f) -> list:
    """Scalar-plus-finite-rank operators with a spread of lam and tr w."""
    two = f.add(f.one, f.one)
    out = [
        dominant_case("zero", f, 0, []),
        dominant_case("identity", f, 1, []),
        dominant_case("0 + trace-1 rank-1", f, 0, [[1]]),
        dominant_case("0 + nilpotent", f, 0, [[0, 1], [0, 0]]),
        dominant_case("1 + nilpotent", f, 1, [[0, 1], [0, 0]]),
        dominant_case("1 + trace-1 rank-1", f, 1, [[1, 0], [0, 0]]),
        dominant_case("0 + trace-2", f, 0, [[1, 0], [0, 1]]),
        dominant_case("2 + trace-0", f, two, [[1, 1], [0, -1]]),
        dominant_case("1 + trace-(-1)", f, 1, [[-1]]),
    ]
    return out


def refusal_corpus_square_zero() -> list:
    """50 operators over Q, F_2, F_3, F_5 spanning every route."""
    out = []
    for f in (QQ, GF(2), GF(3)):
        out += no_dominant_cases(f)
        out += dominant_cases(f)
    f5 = GF(5)
    out += [dominant_case("3 + trace-3", f5, 3, [[3]]), dominant_case("0 + trace-0 rank-2", f5, 0, [[1, 2], [2, 4]])]
    return out[:50]


def refusal_corpus_idempotent_f2() -> list:
    f = GF(2)
    out = no_dominant_cases(f)
    out += dominant_cases(f)[:8]
    return out[:20]


def lc3_corpus() -> list:
    f5 = GF(5)
    return [
        Case("shift over Q", Shift(QQ)),
        Case("downshift over Q", DownShift(QQ)),
        Case("shift over F_5", Shift(f5)),
        Case("downshift over F_5", DownShift(f5)),
        Case("companion t^2, t^2+1 over Q", companion(QQ, [0, 0, 1], [1, 0, 1])),
        Case("companion t^2-2 over F_5", companion(f5, [3, 0, 1])),
        dominant_case("2 id over F_5", f5, 2, []),
        dominant_case("3 + nilpotent over F_5", f5, 3, [[0, 1], [0, 0]]),
        dominant_case("0 + nilpotent over Q", QQ, 0, [[0, 1], [0, 0]]),
        dominant_case("1 + rank-1 over Q", QQ, 1, [[2]]),
    ]


# ---------------------------------------------------------------------------
# oracles taken from the characterization theorems; they read only the recorded
# lam and trace, never the classifier


NONZERO_DOMINANT = "non-zero dominant eigenvalue"


def square_zero_refusal(case: Case) -> Optional[str]:
    """Which condition forbids u from being a sum of three square-zero operators, if any."""
    f = case.field
    if case.lam is None:
        return None
    if f.characteristic != 2:
        if case.lam != 0:
            return NONZERO_DOMINANT
        return FINITE_RANK_NONZERO_TRACE if case.trace_w != 0 else None
    if case.trace_w not in (f.zero, case.lam):
        return FINITE_RANK_TRACE_NOT_0_OR_LAM
    return None


def idempotent_f2_refusal(case: Case) -> Optional[str]:
    """Over F_2 every scalar lies in {0, 1}, so neither condition can hold."""
    return None


# ---------------------------------------------------------------------------
# demos


DEMOS = {
    "shift-3sz": ("three", QQ, lambda f: Shift(f), square_zero),
    "downshift-3sz": ("three", QQ, lambda f: DownShift(f), square_zero),
    "sewing-example": ("three", QQ, shift_plus_zero_line, square_zero),
    "char2-idem": ("three", GF(2), lambda f: Shift(f), idempotent),
    "lc3-shift": ("lc3", QQ, lambda f: Shift(f), None),
}


def demo_case(name: str):
    kind, f, build, targets = DEMOS[name]
    return kind, f, build(f), (targets(f) if targets else None)
