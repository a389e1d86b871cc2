"""Sums of three quadratic operators equal to a scalar multiple of the identity."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

from .algebra import FieldSpec, Scalar, same_field
from .certificate import ThreeSumCertificate, check_three_sum
from .errors import ConditionViolated, FieldMismatch, PropertyViolated
from .linalg import MatrixFin
from .operators import BandedPeriodic, ScalarIdentity

ROOT_SUM_FAILS = "λ is not a sum x1+x2+x3 with p_k(x_k)=0"
TRACE_FAILS = "2λ=tr p1+tr p2+tr p3 fails"


@dataclass(frozen=True)
class ScalarSumWitness:
    parts: tuple
    target: Scalar


@dataclass(frozen=True)
class TwoByTwoTriple:
    A: MatrixFin
    B: MatrixFin
    C: MatrixFin


def _field(lam: Scalar, targets) -> FieldSpec:
    f = same_field(targets)
    if lam.field != f:
        raise FieldMismatch(f"λ over {lam.field}, targets over {f}")
    return f


def scalar_is_sum(lam: Scalar, targets) -> Optional[ScalarSumWitness]:
    _field(lam, targets)
    for parts in product(*(t.roots for t in targets)):
        if parts[0] + parts[1] + parts[2] == lam:
            return ScalarSumWitness(tuple(parts), lam)
    return None


def trace_condition(lam: Scalar, targets) -> bool:
    _field(lam, targets)
    total = targets[0].trace + targets[1].trace + targets[2].trace
    return lam * 2 == total


def two_by_two_identity_triple(lam: Scalar, targets) -> TwoByTwoTriple:
    f = _field(lam, targets)
    if not trace_condition(lam, targets):
        raise ConditionViolated(TRACE_FAILS)
    p1, p2, p3 = targets
    x = p1.x
    beta, gamma = p2.trace, p3.trace
    mu = -p2.constant
    nu = p3.constant - (lam - x) * (gamma + x - lam)
    B = MatrixFin(f, [[0, mu], [1, beta]])
    C = MatrixFin(f, [[lam - x, nu], [-1, gamma + x - lam]])
    A = MatrixFin.identity(f, 2, lam) - B - C
    triple = TwoByTwoTriple(A, B, C)
    for M, t in ((A, p1), (B, p2), (C, p3)):
        if not M.annihilated_by(t.monic):
            raise PropertyViolated(f"2x2 block not annihilated by {t}")
    return triple


def tile_2x2(M: MatrixFin) -> BandedPeriodic:
    """The block-diagonal operator with ``M`` on every pair (e_2k, e_2k+1)."""
    f = M.field
    z = f.zero
    return BandedPeriodic(f, [(0, [M[0, 0], M[1, 1]]), (1, [M[1, 0], z]), (-1, [z, M[0, 1]])])


def scalar_identity_decomposition(lam: Scalar, targets, prefix_hint: int = 256) -> ThreeSumCertificate:
    f = _field(lam, targets)
    w = scalar_is_sum(lam, targets)
    if w is not None:
        summands = tuple(ScalarIdentity(f, x) for x in w.parts)
        sub = {"scalar_witness": [f.fmt(x.value) for x in w.parts]}
    elif trace_condition(lam, targets):
        tr = two_by_two_identity_triple(lam, targets)
        summands = (tile_2x2(tr.A), tile_2x2(tr.B), tile_2x2(tr.C))
        sub = {"two_by_two": [m.to_json() for m in (tr.A, tr.B, tr.C)]}
    else:
        raise ConditionViolated(f"{ROOT_SUM_FAILS}; {TRACE_FAILS}", (ROOT_SUM_FAILS, TRACE_FAILS))
    u = ScalarIdentity(f, lam)
    rep = check_three_sum(u, summands, targets, prefix_hint)
    if not rep:
        raise PropertyViolated(rep.detail)
    return ThreeSumCertificate(summands, tuple(targets), prefix_hint, "Scalar", sub)
