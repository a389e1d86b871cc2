"""Writing an elementary endomorphism as a sum of two quadratic ones.

Everything happens in a module basis.  If ``w`` is elementary with chain
generators ``x_i`` then ``w^k x_i`` is a basis and ``w`` is the shift on each
chain; a pair (A, B) built chain by chain on that basis transports back to the
ambient basis through ``BasisOperator``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from .algebra import FieldSpec, Polynomial, QuadraticTarget
from .errors import SearchFailed, WrongCharacteristic
from .linalg import LazyBasis, Vec, axpy
from .operators import (
    BandedPeriodic,
    BasisOperator,
    Difference,
    Operator,
    ScalarIdentity,
    Shift,
    Sum,
    apply,
    verify_annihilated,
)
from .stratification import _END, chain_items


@dataclass(frozen=True)
class BandedAnsatz:
    """A on one chain: ``A e_k = sum_o bands[o][k mod period] e_{k+o}``; B is shift - A."""

    period: int
    bands: tuple  # ((offset, pattern), ...)

    @property
    def width(self) -> int:
        return max((abs(o) for o, _ in self.bands), default=0)

    def coeffs(self, k: int):
        for o, pat in self.bands:
            c = pat[k % self.period]
            if c != 0 and k + o >= 0:
                yield o, c

    def as_operator(self, field: FieldSpec) -> BandedPeriodic:
        return BandedPeriodic(field, [(o, pat) for o, pat in self.bands])

    def to_json(self, field: FieldSpec):
        return {"period": self.period,
                "bands": [[o, [field.fmt(c) for c in pat]] for o, pat in self.bands]}


STAGGERED = BandedAnsatz(2, ((1, (1, 0)),))
IDEMPOTENT_CHAR2 = BandedAnsatz(2, ((0, (0, 1)), (1, (1, 0))))


def opposite_pair(field: FieldSpec, a) -> BandedAnsatz:
    """A e_{2m} = 0, A e_{2m+1} = a e_{2m+1} + e_{2m+2}: then A^2 = aA and B^2 = -aB."""
    a = field.coerce(a)
    return BandedAnsatz(2, ((0, (field.zero, a)), (1, (field.zero, field.one))))


def _shift_pair(field: FieldSpec, ansatz: BandedAnsatz):
    A = ansatz.as_operator(field)
    return A, Difference(Shift(field), A)


def split_shift_squarezero(field: FieldSpec):
    """Staggered square-zero pair with A + B = shift."""
    return _shift_pair(field, STAGGERED)


def split_shift_idempotent_char2(field: FieldSpec):
    """Idempotent pair with A + B = shift; needs characteristic 2."""
    if field.characteristic != 2:
        raise WrongCharacteristic(f"idempotent shift pair needs characteristic 2, not {field}")
    return _shift_pair(field, IDEMPOTENT_CHAR2)


# ---------------------------------------------------------------------------
# checking an ansatz on the single shift chain


def ansatz_holds(field: FieldSpec, ansatz: BandedAnsatz, a, b) -> bool:
    """Exact test of A^2 = aA and B^2 = bB for B = shift - A on one chain.

    Both defects are banded and periodic away from the start of the chain, so
    a window covering the boundary plus two periods decides them.
    """
    A = ansatz.as_operator(field)
    B = Difference(Shift(field), A)
    window = 4 * ansatz.width + 2 * ansatz.period + 4
    pa = Polynomial(field, [0, field.neg(a), 1])
    pb = Polynomial(field, [0, field.neg(b), 1])
    return verify_annihilated(A, pa, window).ok and verify_annihilated(B, pb, window).ok


def _candidates(field: FieldSpec, a, b):
    if field.characteristic and field.characteristic <= 7:
        return list(field.elements())
    vals = [field.zero, field.one, field.neg(field.one), a, b, field.neg(a), field.neg(b),
            field.sub(a, b), field.sub(b, a)]
    out = []
    for v in vals:
        if v not in out:
            out.append(v)
    return out


def ansatz_search(field: FieldSpec, a, b, max_period: int = 6, max_width: int = 3,
                  budget: int = 200_000) -> Optional[BandedAnsatz]:
    """Backtracking search for a banded periodic A with A^2 = aA and (S-A)^2 = b(S-A).

    Diagonal entries range over the roots {0, a}; other band entries over a
    small candidate set (the whole field when it is tiny).  Partial patterns are
    pruned by checking every column whose dependencies are already assigned.
    Returns None when the family has no solution and raises SearchFailed when
    the budget runs out.
    """
    a, b = field.coerce(a), field.coerce(b)
    diag = [field.zero] if a == 0 else [field.zero, a]
    vals = _candidates(field, a, b)
    nodes = 0
    for width in range(1, max_width + 1):
        offsets = [o for o in range(-width, width + 1)]
        for period in range(1, max_period + 1):
            slots = [(r, o) for r in range(period) for o in offsets]
            coef: dict = {}

            def entry(n, o):
                return coef.get((n % period, o)) if n >= 0 else field.zero

            def column_ok(n):
                # (A^2 - aA) e_n and (B^2 - bB) e_n, B = S - A
                for op_is_a in (True, False):
                    root = a if op_is_a else b

                    def col(m):
                        d = {}
                        for o in offsets:
                            c = entry(m, o)
                            if c is None:
                                return None
                            if not op_is_a:
                                c = field.neg(c)
                                if o == 1:
                                    c = field.add(c, field.one)
                            if c != 0 and m + o >= 0:
                                d[m + o] = c
                        return d

                    first = col(n)
                    if first is None:
                        return None
                    acc: dict = {}
                    for m, c in first.items():
                        second = col(m)
                        if second is None:
                            return None
                        axpy(field, acc, c, second)
                    axpy(field, acc, field.neg(root), first)
                    if any(v != 0 for v in acc.values()):
                        return False
                return True

            window = range(4 * width + 2 * period + 4)

            def consistent():
                for n in window:
                    if column_ok(n) is False:
                        return False
                return True

            def rec(i):
                nonlocal nodes
                if i == len(slots):
                    return all(column_ok(n) for n in window)
                r, o = slots[i]
                for v in (diag if o == 0 else vals):
                    nodes += 1
                    if nodes > budget:
                        raise SearchFailed(f"ansatz search exhausted its budget of {budget} nodes")
                    coef[(r, o)] = v
                    if consistent() and rec(i + 1):
                        return True
                del coef[(r, o)]
                return False

            if rec(0):
                bands = tuple((o, tuple(coef[(r, o)] for r in range(period))) for o in offsets
                              if any(coef[(r, o)] != 0 for r in range(period)))
                found = BandedAnsatz(period, bands)
                if ansatz_holds(field, found, a, b):
                    return found
    return None


# ---------------------------------------------------------------------------
# transport to an elementary operator


def _ansatz_operator(w: Operator, gens, ansatz: BandedAnsatz) -> BasisOperator:
    f = w.field
    basis = LazyBasis(f, chain_items(w, gens), budget=2_000_000)

    def image(label):
        i, k = label
        acc: dict = {}
        for o, c in ansatz.coeffs(k):
            axpy(f, acc, c, basis.vector((i, k + o)).data)
        return Vec.raw(f, acc)

    return BasisOperator(f, basis, image)


def parity_items(w: Operator, generators, a, b) -> Iterator:
    """Labelled basis ``((i, 2m), s(w)^m x_i)``, ``((i, 2m+1), w s(w)^m x_i)``.

    Here ``s(t) = t(a + b - t)``.  Since deg s = 2, F[t] = F[s] + t F[s], so this
    is a basis of each free chain just like the powers of w.
    """
    f = w.field
    ab = f.add(a, b)
    gens = iter(generators)
    active: list = []
    i = 0
    exhausted = False
    while True:
        if not exhausted:
            g = next(gens, _END)
            if g is _END:
                exhausted = True
            elif g is not None:
                active.append([i, 0, g])
                i += 1
        if not active:
            if exhausted:
                return
            continue
        for item in active:
            idx, j, vec = item
            yield (idx, j), vec
            nxt = apply(w, vec)
            if j % 2:
                # f_{m+1} = (a+b) g_m - w g_m
                nxt = ab * vec - nxt
            item[1] = j + 1
            item[2] = nxt


def _parity_operator(w: Operator, gens, a, b) -> BasisOperator:
    """A f_m = 0, A g_m = a g_m - f_{m+1}; then A^2 = aA and (w - A)^2 = b(w - A).

    With B = w - A one gets B f_m = g_m and B g_m = b g_m, because
    w g_m = (a+b) g_m - f_{m+1}.
    """
    f = w.field
    basis = LazyBasis(f, parity_items(w, gens, a, b), budget=2_000_000)

    def image(label):
        i, j = label
        if j % 2 == 0:
            return Vec.zero(f)
        return a * basis.vector((i, j)) - basis.vector((i, j + 1))

    return BasisOperator(f, basis, image)


@dataclass
class ElementarySplit:
    A: Operator
    B: Operator
    route: str
    prefix: int
    ansatz: Optional[BandedAnsatz] = None


def _verified(u, A, B, p1, p2, prefix) -> bool:
    return verify_annihilated(A, p1.monic, prefix).ok and verify_annihilated(B, p2.monic, prefix).ok


def split_elementary(u: Operator, gens, p1: QuadraticTarget, p2: QuadraticTarget,
                     prefix: int = 256, search_budget: int = 200_000,
                     routes=("staggered", "idempotent_char2", "opposite", "parity", "search")) -> ElementarySplit:
    """Write the elementary ``u`` (chain generators ``gens``) as A + B with p1(A) = p2(B) = 0.

    ``gens`` must be re-iterable (a list, or a zero-argument callable returning
    an iterator) because each candidate route rebuilds its own basis.  Only a
    pair that verifies on e_0..e_{prefix-1} is returned.
    """
    f = u.field
    zero = f.zero

    def fresh():
        return gens() if callable(gens) else iter(gens)

    # either root of each target may play the role of x; closed forms depend on the order
    orders = []
    for r1 in (p1.roots, p1.roots[::-1]):
        for r2 in (p2.roots, p2.roots[::-1]):
            key = (r1[0].value, r1[1].value, r2[0].value, r2[1].value)
            if key not in orders:
                orders.append(key)

    def attempt(route, x1, y1, x2, y2):
        a, b = f.sub(y1, x1), f.sub(y2, x2)
        w = Difference(u, ScalarIdentity(f, f.add(x1, x2)))
        if route == "staggered" and a == zero and b == zero:
            ans = STAGGERED
        elif route == "idempotent_char2" and f.characteristic == 2 and a == f.one and b == f.one:
            ans = IDEMPOTENT_CHAR2
        elif route == "opposite" and a != zero and b == f.neg(a):
            ans = opposite_pair(f, a)
        elif route == "search":
            ans = ansatz_search(f, a, b, budget=search_budget)
            if ans is None:
                return None
        elif route == "parity":
            return finish(w, _parity_operator(w, fresh(), a, b), x1, x2, route)
        else:
            return None
        return finish(w, _ansatz_operator(w, fresh(), ans), x1, x2, route, ans)

    def finish(w, A0, x1, x2, route, ansatz=None):
        A = Sum(A0, ScalarIdentity(f, x1))
        B = Sum(Difference(w, A0), ScalarIdentity(f, x2))
        if _verified(u, A, B, p1, p2, prefix):
            return ElementarySplit(A, B, route, prefix, ansatz)
        return None

    # orders with x1 + x2 = 0 need no recentring of u, which keeps bases sparse
    flat = [o for o in orders if f.add(o[0], o[2]) == zero]
    shifted = [o for o in orders if f.add(o[0], o[2]) != zero]
    for group in (flat, shifted):
        for route in routes:
            for k, order in enumerate(group):
                if route == "parity" and k:
                    break  # parity works for any order
                res = attempt(route, *order)
                if res is not None:
                    return res
    raise SearchFailed(f"no verified split of the elementary operator for {p1}, {p2}")
