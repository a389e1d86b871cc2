"""Routing, three-summand decomposition, LC3 and certificate verification."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .algebra import Polynomial, Scalar, same_field, target_from_roots
from .certificate import ThreeSumCertificate, check_three_sum
from .elementary_split import split_elementary
from .errors import (
    CapExceeded,
    ConditionViolated,
    FormatError,
    NotFreeOnPrefix,
    PreconditionUnverifiable,
    SearchFailed,
    SpanGapOnPrefix,
    Unresolved,
)
from .finite_dim import finite_rank_class, finite_rank_decompose, trace_obstruction
from .nontorsion import assemble_a_elementary, free_torsion_split, nontorsion_decompose
from .operators import (
    NO,
    UNKNOWN,
    YES,
    Difference,
    Operator,
    Report,
    ScalarIdentity,
    Scale,
    Sum,
    classify_structure,
    deviation_columns,
    eval_poly,
)
from .scalar_sums import ROOT_SUM_FAILS, TRACE_FAILS, scalar_identity_decomposition, scalar_is_sum, trace_condition
from .stratification import (
    INF,
    MappedStrat,
    connector,
    finite_strat,
    tower_compose,
    verify_elementary,
)
from .torsion import torsion_good_strat

NONZERO_DOMINANT = "non-zero dominant eigenvalue"

ROUTES = ("NoDominant_Torsion", "NoDominant_NonTorsion", "FiniteRank", "Scalar", "Refused", "Unresolved")


@dataclass
class ClassificationReport:
    dominant: Optional[Scalar]
    deviation_rank: object  # int (finite) or "infinite" / "unknown"
    torsion: str
    route: str
    reason: str = ""

    def to_json(self):
        return {
            "dominant": None if self.dominant is None else str(self.dominant),
            "deviation_rank": self.deviation_rank,
            "torsion": self.torsion,
            "route": self.route,
            "reason": self.reason,
        }


def _all_equal(targets, coeffs):
    f = same_field(targets)
    return all(t.monic.coeffs == tuple(f.coerce(c) for c in coeffs) for t in targets)


def lambda_refusal(lam: Scalar, targets) -> Optional[str]:
    """The violated necessary condition on a dominant eigenvalue, or None."""
    if scalar_is_sum(lam, targets) is not None or trace_condition(lam, targets):
        return None
    if _all_equal(targets, (0, 0, 1)):
        return NONZERO_DOMINANT
    return f"{ROOT_SUM_FAILS}; {TRACE_FAILS}"


def classify(u: Operator, targets) -> ClassificationReport:
    tags = classify_structure(u)
    if tags.dominant_candidate is None:
        if tags.deviation_rank_finite == UNKNOWN:
            return ClassificationReport(None, "unknown", tags.is_torsion, "Unresolved",
                                        "the structure does not decide whether a dominant eigenvalue exists")
        if tags.is_torsion == YES:
            return ClassificationReport(None, "infinite", YES, "NoDominant_Torsion")
        if tags.is_torsion == NO:
            return ClassificationReport(None, "infinite", NO, "NoDominant_NonTorsion")
        return ClassificationReport(None, "infinite", UNKNOWN, "Unresolved",
                                    "torsion status is not readable from the structure")
    lam = tags.dominant_candidate
    _, cls = finite_rank_class(u)
    rank = cls.representative.rank() if cls.n_of_w else 0
    reason = lambda_refusal(lam, targets)
    if reason is not None:
        return ClassificationReport(lam, rank, tags.is_torsion, "Refused", reason)
    if cls.n_of_w == 0:
        return ClassificationReport(lam, 0, tags.is_torsion, "Scalar")
    reason = trace_obstruction(cls.representative.trace(), lam.value, targets)
    if reason is not None:
        return ClassificationReport(lam, rank, tags.is_torsion, "Refused", reason)
    return ClassificationReport(lam, rank, tags.is_torsion, "FiniteRank")


# ---------------------------------------------------------------------------
# v with v^2 = a v and u - v elementary


@dataclass
class AElementaryStep:
    v: Operator
    gens: object  # list, or zero-argument callable returning an iterator
    route: str
    info: dict

    def generators(self):
        return self.gens() if callable(self.gens) else iter(self.gens)


def _torsion_step(u, a) -> AElementaryStep:
    s = torsion_good_strat(u)
    fl = s.flags()
    if not fl.good:
        raise Unresolved(f"torsion stratification is not good: {fl}")
    v = connector(s, a)
    return AElementaryStep(v, s.elementary_generators, "connector",
                           {"stratification": _strat_json(s), "flags": fl.to_json()})


def _strat_json(s):
    try:
        return s.to_json()
    except Exception:  # recipes are descriptive only
        return {"kind": type(s).__name__}


def _nontorsion_step(u, a) -> AElementaryStep:
    gens, piece = free_torsion_split(u)
    f = u.field
    if piece is not None and piece.dim is None and deviation_columns(piece.op) is None:
        # V = F' (+) T with T torsion and infinite: tower of the free chains and a good stratification of T
        lower = finite_strat(u, [(_e(f, g), INF) for g in gens])
        upper = MappedStrat(u, torsion_good_strat(piece.op), piece.embed)
        s = tower_compose(lower, upper)
        v = connector(s, a)
        return AElementaryStep(v, s.elementary_generators, "tower",
                               {"stratification": _strat_json(s), "flags": s.flags().to_json()})
    split = nontorsion_decompose(u)
    res = assemble_a_elementary(u, split, a)
    return AElementaryStep(res.v, list(res.generators), "sewing",
                           {"W_is_F": split.W_is_F, "dim_H": split.H.dim, "lam": f.fmt(split.lam),
                            "d": res.d, "M": res.M})


def _e(f, n):
    from .linalg import Vec
    return Vec.e(f, n)


def a_elementary(u: Operator, a, torsion: str) -> AElementaryStep:
    if torsion == YES:
        return _torsion_step(u, a)
    return _nontorsion_step(u, a)


# ---------------------------------------------------------------------------
# decomposition


def _shifted(op: Operator, c) -> Operator:
    c = op.field.coerce(c)
    return op if c == 0 else Sum(op, ScalarIdentity(op.field, c))


def decompose_three(u: Operator, targets, prefix: int = 256, q_max: int = 4,
                    elementary_prefix: Optional[int] = None, budget: int = 200_000) -> ThreeSumCertificate:
    """A verified (p1,p2,p3)-sum certificate for u.

    Raises ConditionViolated when a cited necessary condition fails, and
    Unresolved when a backend limit is hit.
    """
    targets = tuple(targets)
    f = same_field(targets)
    if u.field != f:
        raise ConditionViolated("operator and targets live over different fields")
    rep = classify(u, targets)
    if rep.route == "Refused":
        raise ConditionViolated(rep.reason, (rep.reason,))
    if rep.route == "Unresolved":
        raise Unresolved(rep.reason)
    try:
        if rep.route == "Scalar":
            cert = scalar_identity_decomposition(rep.dominant, targets, prefix)
            cert = ThreeSumCertificate(cert.summands, targets, prefix, "Scalar", cert.sub)
        elif rep.route == "FiniteRank":
            cert = finite_rank_decompose(u, targets, q_max=q_max, prefix=prefix)
        else:
            cert = _no_dominant(u, targets, prefix, rep, elementary_prefix, budget)
    except (SearchFailed, CapExceeded, PreconditionUnverifiable, NotFreeOnPrefix, SpanGapOnPrefix) as exc:
        raise Unresolved(f"{type(exc).__name__}: {exc}") from exc
    check = check_three_sum(u, cert.summands, targets, prefix)
    if not check.ok:
        raise Unresolved(f"assembled summands failed verification: {check.detail}")
    return cert


def _closed_pair(f, a, b) -> bool:
    """Whether t(t-a), t(t-b) has a banded closed-form split of the shift."""
    if a == 0 and b == 0:
        return True
    if a != 0 and b == f.neg(a):
        return True
    return f.characteristic == 2 and a == f.one and b == f.one


def root_order(targets):
    """``(x, a)``: one root x_k per target and a_k = y_k - x_k.

    Any order is valid.  A zero total shift keeps u - c id as sparse as u, and
    a closed-form pair (a2, a3) avoids the denser parity split.
    """
    f = same_field(targets)
    best = None
    for mask in range(8):
        xs, a = [], []
        for k, t in enumerate(targets):
            x, y = (t.roots[1], t.roots[0]) if mask >> k & 1 else t.roots
            xs.append(x.value)
            a.append(f.sub(y.value, x.value))
        c = f.add(f.add(xs[0], xs[1]), xs[2])
        score = (c != 0, not _closed_pair(f, a[1], a[2]))
        if best is None or score < best[0]:
            best = (score, xs, a)
    return best[1], best[2]


def _no_dominant(u, targets, prefix, rep, elementary_prefix, budget=200_000):
    f = u.field
    x, (a1, a2, a3) = root_order(targets)
    c = f.add(f.add(x[0], x[1]), x[2])
    u0 = Difference(u, ScalarIdentity(f, c)) if c != 0 else u
    step = a_elementary(u0, a1, rep.torsion)
    v = step.v
    sq = Polynomial(f, [0, f.neg(a1), 1])
    for n in range(prefix):
        if eval_poly(sq, v, _e(f, n)):
            raise Unresolved(f"v^2 = a v fails on column {n}")
    w = Difference(u0, v)
    ep = elementary_prefix if elementary_prefix is not None else min(prefix, 256)
    ecert = verify_elementary(w, step.generators(), ep)
    q2 = target_from_roots(f, 0, a2)
    q3 = target_from_roots(f, 0, a3)
    es = split_elementary(w, step.generators, q2, q3, prefix=prefix, search_budget=budget)
    summands = (_shifted(v, x[0]), _shifted(es.A, x[1]), _shifted(es.B, x[2]))
    sub = {
        "shift": f.fmt(c),
        "a": [f.fmt(a) for a in (a1, a2, a3)],
        "v1": {"route": step.route, **step.info},
        "elementary": {"verified_prefix": ep, "generators_used": len(ecert.generators)},
        "split": {"route": es.route, "ansatz": es.ansatz.to_json(f) if es.ansatz else None},
        "_live": {"v": v, "u0": u0, "a1": a1, "gens": step.generators},
    }
    return ThreeSumCertificate(summands, targets, prefix, rep.route, sub)


def verify_certificate(u: Operator, cert: ThreeSumCertificate, prefix: Optional[int] = None) -> Report:
    """Independent re-check of the sum and annihilation identities (and live sub-certificates)."""
    n = cert.verified_prefix if prefix is None else prefix
    try:
        rep = check_three_sum(u, cert.summands, cert.targets, n)
    except FormatError as exc:
        return Report(False, n, None, str(exc))
    if not rep.ok:
        return rep
    live = cert.sub.get("_live")
    if live:
        f = u.field
        sq = Polynomial(f, [0, f.neg(live["a1"]), 1])
        m = min(n, 256)
        for k in range(m):
            if eval_poly(sq, live["v"], _e(f, k)):
                return Report(False, k, k, f"v^2 = a v fails on column {k}")
        try:
            verify_elementary(Difference(live["u0"], live["v"]), live["gens"](), m)
        except (SpanGapOnPrefix, NotFreeOnPrefix, CapExceeded) as exc:
            return Report(False, m, None, f"elementary part: {exc}")
    return Report(True, n)


# ---------------------------------------------------------------------------
# linear combinations of three idempotents


@dataclass
class LC3Certificate:
    coefficients: tuple
    idempotents: tuple
    base: ThreeSumCertificate
    verified_prefix: int


def _lc3_targets(f, a):
    return tuple(target_from_roots(f, 0, x if x != 0 else f.one) for x in a)


def _lc3_splits(f, lam):
    two = f.add(f.one, f.one)
    cands = [(f.one, f.one, f.sub(lam, two)), (lam, f.zero, f.zero), (f.one, f.sub(lam, f.one), f.zero),
             (f.neg(f.one), f.neg(f.one), f.add(lam, two))]
    seen = []
    for c in cands:
        if c not in seen:
            seen.append(c)
    return seen


def lc3(u: Operator, coefficients=None, prefix: int = 256, q_max: int = 4, budget: int = 200_000) -> LC3Certificate:
    """u = c1 q1 + c2 q2 + c3 q3 with idempotent q_i, verified on the prefix."""
    f = u.field
    tags = classify_structure(u)
    if coefficients is not None:
        splits = [tuple(f.coerce(c) for c in coefficients)]
    elif tags.dominant_candidate is None:
        # lam plays no role; (a, -a) has a banded closed form for the elementary split
        splits = [(f.one, f.one, f.neg(f.one))]
    else:
        splits = _lc3_splits(f, tags.dominant_candidate.value)
    last = None
    for a in splits:
        targets = _lc3_targets(f, a)
        try:
            base = decompose_three(u, targets, prefix=prefix, q_max=q_max, budget=budget)
        except (Unresolved, ConditionViolated) as exc:
            last = exc
            continue
        coeffs = tuple(x if x != 0 else f.one for x in a)
        idem = tuple(Scale(f.inv(c), s) for c, s in zip(coeffs, base.summands))
        rep = check_lc3(u, coeffs, idem, prefix)
        if not rep.ok:
            raise Unresolved(f"LC3 verification failed: {rep.detail}")
        return LC3Certificate(coeffs, idem, base, prefix)
    raise Unresolved(f"no coefficient split succeeded ({type(last).__name__}: {last})")


def check_lc3(u: Operator, coeffs, idem, prefix: int) -> Report:
    f = u.field
    idem_poly = Polynomial(f, [0, f.neg(f.one), 1])
    for n in range(prefix):
        e = _e(f, n)
        total = None
        for c, q in zip(coeffs, idem):
            term = q.column(n).scale(c)
            total = term if total is None else total + term
        if total != u.column(n):
            return Report(False, n, n, f"u = sum c_i q_i fails on column {n}")
        for k, q in enumerate(idem):
            if eval_poly(idem_poly, q, e):
                return Report(False, n, n, f"q{k + 1} is not idempotent on column {n}")
    return Report(True, prefix)
