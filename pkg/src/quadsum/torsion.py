"""Good stratifications in the torsion case and the splitting of a dominant eigenvalue."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

from .errors import CapExceeded, PreconditionUnverifiable, PropertyViolated
from .linalg import Echelon, MatrixFin, Vec, cyclic_decomposition
from .operators import Operator, apply, classify_structure, deviation_columns
from .stratification import PropertyFlags, SequenceStrat, Stratification, TowerStrat


def _wmap(u: Operator, lam):
    f = u.field
    if lam == 0:
        return lambda x: apply(u, x)
    neg = f.neg(lam)
    return lambda x: apply(u, x) + x.scale(neg)


def eigen_mod(ech: Echelon, u: Operator, x: Vec):
    """``("zero", None)``, ``("eigen", mu)`` or ``("non", None)`` for x modulo the span."""
    f = u.field
    nx = ech.normal_form(x)
    if not nx:
        return "zero", None
    ux = ech.normal_form(apply(u, x))
    m = max(nx.data)
    mu = f.div(ux[m], nx[m])
    if ux == nx.scale(mu):
        return "eigen", mu
    return "non", None


def orbit_mod(ech: Echelon, u: Operator, x: Vec, cap: int):
    """Dimension of F[t]x modulo the span, and the enlarged echelon."""
    e = ech.copy()
    d = 0
    v = x
    while e.add(v):
        d += 1
        if d > cap:
            raise CapExceeded(f"orbit dimension exceeded {cap}")
        v = apply(u, v)
    return d, e


def min_poly_mod(ech: Echelon, x: Vec, w, cap: int):
    """Monic minimal polynomial (low-first raw coefficients) of x modulo the span under ``w``."""
    f = ech.field
    t = Echelon(f, track=True)
    t.rows = {m: (row, {}) for m, (row, _) in ech.rows.items()}
    v = x
    k = 0
    while True:
        combo = t.coordinates(v)
        if combo is not None:
            return [f.neg(combo.get(i, f.zero)) for i in range(k)] + [f.one]
        t.add(v, k)
        k += 1
        if k > cap:
            raise CapExceeded(f"minimal polynomial degree exceeded {cap}")
        v = w(v)


# ---------------------------------------------------------------------------
# index-2 stratification


class Index2Strat(Stratification):
    """Good stratification over N^2 (lex) of V/W when ``(u - lam)^2`` vanishes on V/W.

    The quotient splits into chain pairs ``span(f, u f)`` and eigenlines.  Each
    eigenline is placed at the start ``(k, 0)`` of a fresh row ``k >= 1``; chain
    pairs fill the open slot with the smallest key ``k + 2^l - 1`` (opening a new
    row when its first slot has the smallest key).  Every slot of N^2 is filled
    exactly once.
    """

    index_kind = "N2"

    def __init__(self, u: Operator, lam, anatomy, base: Optional[Echelon] = None, head_bound: int = -1,
                 budget: int = 100_000, recipe=None):
        super().__init__(u)
        self.lam = lam
        self.anatomy = anatomy
        self.base = base
        self.head_bound = head_bound
        self.budget = budget
        self.recipe = recipe
        self._w = _wmap(u, lam)
        self._stream = self._items()
        self._items_at: dict = {}
        self._order: list = []
        self._cols = [0]
        self._heap = [(0, 0)]
        self._pulled = 0

    # decomposition of the quotient into chains and eigenlines ----------------
    def _decompose(self, indices, base):
        f = self.field
        w = self._w
        r = base.copy() if base is not None else Echelon(f)
        chains = []
        for i in indices:
            x = Vec.e(f, i)
            wx = w(x)
            if r.add(wx):
                chains.append(x)
        t = Echelon(f, track=True)
        if base is not None:
            t.rows = {m: (row, {}) for m, (row, _) in base.rows.items()}
        e = base.copy() if base is not None else Echelon(f)
        for j, x in enumerate(chains):
            t.add(w(x), j)
            e.add(x)
            e.add(w(x))
        kernels = []
        for i in indices:
            x = Vec.e(f, i)
            if e.contains(x):
                continue
            combo = t.coordinates(w(x))
            if combo is None:
                raise PropertyViolated("(u - lam)^2 does not vanish on the quotient")
            for j, c in combo.items():
                x = x - chains[j].scale(c)
            e.add(x)
            kernels.append(x)
        for x in chains:
            yield "chain", x
        for x in kernels:
            yield "kernel", x

    def _items(self):
        an = self.anatomy
        hb = self.head_bound
        head = set()
        for b in an.exceptional:
            head.update(b)
        regular = an.regular()
        pending = None
        if hb >= 0:
            for b in regular:
                if b[0] > hb:
                    pending = b
                    break
                head.update(b)
        if head:
            yield from self._decompose(sorted(head), self.base)
        if pending is not None:
            yield from self._decompose(pending, None)
        for b in regular:
            yield from self._decompose(b, None)

    # placement ---------------------------------------------------------------
    @staticmethod
    def _key(k, l):
        # anti-diagonal order: finitely many slots per key, every row keeps growing
        return k + l

    def _place(self, kind, x):
        cols = self._cols
        if kind == "kernel":
            k = len(cols)
            cols.append(0)
            n = 1
        else:
            k = self._next_slot()
            n = 2
        pos = (k, cols[k])
        cols[k] += 1
        heapq.heappush(self._heap, (self._key(k, cols[k]), k))
        self._items_at[pos] = (x, n)
        self._order.append(pos)

    def _next_slot(self):
        """Row of the open slot with the smallest key (a new row if that is smallest)."""
        cols = self._cols
        while self._heap:
            key, k = self._heap[0]
            if key != self._key(k, cols[k]):
                heapq.heapreplace(self._heap, (self._key(k, cols[k]), k))
                continue
            if key <= self._key(len(cols), 0):
                heapq.heappop(self._heap)
                return k
            break
        cols.append(0)
        return len(cols) - 1

    def _pull(self):
        with self._lock:
            self._pulled += 1
            if self._pulled > self.budget:
                raise CapExceeded(f"index-2 stream exceeded {self.budget} items")
            try:
                kind, x = next(self._stream)
            except StopIteration:
                raise PreconditionUnverifiable("the quotient is finite-dimensional") from None
            self._place(kind, x)

    def iter_positions(self):
        i = 0
        while True:
            while i >= len(self._order):
                self._pull()
            yield self._order[i]
            i += 1

    def stratum(self, pos):
        while pos not in self._items_at:
            self._pull()
        return self._items_at[pos]

    def successor(self, pos):
        return (pos[0], pos[1] + 1)

    def has_predecessor(self, pos):
        return pos[1] > 0

    def minimum(self):
        return (0, 0)

    def flags(self):
        # kernels only ever occupy (k, 0) with k >= 1, which have no predecessor;
        # N^2 has no maximum
        for pos in list(self._order):
            if self._items_at[pos][1] < 2 and (pos[1] > 0 or pos[0] == 0):
                return PropertyFlags(False, False, True)
        return PropertyFlags(True, True, True)

    def to_json(self):
        if self.recipe is not None:
            return self.recipe
        raise PropertyViolated("index-2 stratification without a recipe")


def _index2_ready(u, anatomy, base: Optional[Echelon]) -> bool:
    if anatomy is None or anatomy.lam is None:
        return False
    w = _wmap(u, anatomy.lam)
    f = u.field
    for b in anatomy.exceptional:
        for i in b:
            y = w(w(Vec.e(f, i)))
            if base is None:
                if y:
                    return False
            elif not base.contains(y):
                return False
    return True


def good_strat_index2(u: Operator, lam, budget: int = 100_000) -> Index2Strat:
    f = u.field
    lam = f.coerce(lam)
    tags = classify_structure(u)
    if tags.dominant_candidate is not None or tags.deviation_rank_finite != "no":
        raise PreconditionUnverifiable("needs an operator known to have no dominant eigenvalue")
    an = u.anatomy()
    if an is None or an.lam != lam or not _index2_ready(u, an, None):
        raise PreconditionUnverifiable(f"(u - {f.fmt(lam)})^2 = 0 is not exposed by the structure")
    recipe = {"kind": "index2", "op": u.to_json(), "lam": f.fmt(lam), "budget": budget}
    return Index2Strat(u, lam, an, budget=budget, recipe=recipe)


# ---------------------------------------------------------------------------
# torsion builder


class _TorsionBuilder:
    def __init__(self, u: Operator, budget: int, stream_budget: int = 100_000):
        self.u = u
        self.f = u.field
        self.budget = budget
        # the index-2 stream is cheap per item but needs many items for long prefixes
        self.stream_budget = max(budget, stream_budget)
        self.W = Echelon(u.field)
        self.strata: list = []
        self.n = 0
        self.anatomy = u.anatomy()
        self.upper: Optional[Index2Strat] = None
        self.cases: list = []

    def switch_ready(self):
        return _index2_ready(self.u, self.anatomy, self.W)

    def advance(self) -> bool:
        """Add the next two strata; False once the index-2 switch has happened."""
        if self.upper is not None:
            return False
        skipped = 0
        while True:
            if self.switch_ready():
                hb = max([self.n - 1] + list(self.W.rows))
                self.upper = Index2Strat(self.u, self.anatomy.lam, self.anatomy, self.W.copy(), hb,
                                         budget=self.stream_budget)
                return False
            x0 = Vec.e(self.f, self.n)
            self.n += 1
            if not self.W.contains(x0):
                self._handle(x0)
                return True
            skipped += 1
            if skipped > self.budget:
                raise CapExceeded("no new basis vector outside the current submodule")

    def _scan(self, start):
        for m in range(start, start + self.budget):
            yield Vec.e(self.f, m)
        raise CapExceeded(f"scan from e_{start} exceeded the budget of {self.budget}")

    def _handle(self, x0):
        u, W, cap = self.u, self.W, self.budget
        st, lam = eigen_mod(W, u, x0)
        if st == "non":
            self._case1(x0, orbit_mod(W, u, x0, cap), "1")
            return
        w = _wmap(u, lam)
        for z in self._scan(self.n):
            zs, _ = eigen_mod(W, u, z)
            if zs == "zero":
                continue
            if zs == "non":
                d, ez = orbit_mod(W, u, z, cap)
                if ez.contains(x0):
                    self._case1(z, (d, ez), "1'")
                    return
            mp = min_poly_mod(W, z, w, cap)
            j = next(i for i, c in enumerate(mp) if c != 0)
            if len(mp) - 1 - j >= 1:
                y = z
                for _ in range(j):
                    y = w(y)
                g0 = x0 + y
                self._case1(g0, orbit_mod(W, u, g0, cap), "2.1")
                return
            if j >= 3:
                y = z
                for _ in range(j - 3):
                    y = w(y)
                y1 = w(y)
                y2 = w(y1)
                span = W.copy()
                for v in (y, y1, y2):
                    span.add(v)
                if span.contains(x0):
                    self._case1(y, orbit_mod(W, u, y, cap), "2.2.1")
                    return
                g0 = y1 + x0
                d0, e0 = orbit_mod(W, u, g0, cap)
                d1, e1 = orbit_mod(e0, u, y, cap)
                if d0 < 2 or d1 < 2:
                    raise PropertyViolated("two-submodules construction produced a stratum of dimension < 2")
                self._commit([(g0, d0), (y, d1)], e1, "2.2.2")
                return

    def _case1(self, g0, v0, case):
        d0, e0 = v0
        if d0 < 2:
            raise PropertyViolated("first stratum of dimension < 2")
        first = None
        z = None
        for cand in self._scan(self.n):
            st, mu = eigen_mod(e0, self.u, cand)
            if st == "zero":
                continue
            if st == "non":
                z = cand
                break
            if first is None:
                first = (cand, mu)
            elif mu != first[1]:
                z = first[0] + cand
                break
        d1, e1 = orbit_mod(e0, self.u, z, self.budget)
        self._commit([(g0, d0), (z, d1)], e1, case)

    def _commit(self, strata, ech, case):
        self.strata.extend(strata)
        self.W = ech
        self.cases.append(case)

    def ensure(self, count):
        while len(self.strata) < count:
            if not self.advance():
                raise IndexError("the builder switched to the index-2 tower")


def torsion_good_strat(u: Operator, budget: int = 2560) -> Stratification:
    """Good stratification of a torsion V^u without dominant eigenvalue.

    When the structure exposes an eventual ``(u - lam)^2 = 0``, the builder runs
    until the quotient qualifies and then finishes with the index-2 tower;
    otherwise strata are produced lazily, two per new basis vector.
    """
    tags = classify_structure(u)
    if tags.is_torsion != "yes":
        raise PreconditionUnverifiable("torsion is not established structurally")
    if tags.deviation_rank_finite != "no":
        raise PreconditionUnverifiable("needs an operator known to have no dominant eigenvalue")
    b = _TorsionBuilder(u, budget)
    recipe = {"kind": "torsion", "op": u.to_json(), "budget": budget}
    an = b.anatomy
    if an is not None and an.lam is not None:
        while b.advance():
            pass
        upper = b.upper
        if not b.strata:
            upper.recipe = recipe
            return upper
        lower = SequenceStrat(u, list(b.strata))
        s = TowerStrat(lower, upper, recipe=recipe)
        s.builder = b
        return s

    def tail(i):
        b.ensure(i + 1)
        return b.strata[i]

    s = SequenceStrat(u, [], tail, tail_min_dim=2, recipe=recipe)
    s.builder = b
    return s


# ---------------------------------------------------------------------------
# dominant eigenvalue splitting


@dataclass
class DominantSplit:
    """``V = W (+) H``: ``summands`` are (generator, dim) of cyclic submodules of
    dimension >= 2 spanning W; u acts as ``lam`` on H, which is spanned by
    ``h_extra`` and by every e_n with n outside ``excluded``.  ``mu`` is the
    eigenvalue of the scalar part E of the finite decomposition (None if E = 0).
    """

    summands: list
    lam: object
    mu: object
    h_extra: list
    excluded: frozenset
    support: tuple


def invariant_support(u: Operator):
    """``(lam, T)``: T is a finite set of indices whose span contains im(u - lam) and is u-invariant."""
    dev = deviation_columns(u)
    if dev is None:
        raise PreconditionUnverifiable("u is not structurally lam*id + finite rank")
    lam, s = dev
    t = set(s)
    for n in s:
        t.update(u.column(n).data)
    return lam, tuple(sorted(t))


def split_dominant(u: Operator) -> DominantSplit:
    f = u.field
    lam, t = invariant_support(u)
    pos = {i: k for k, i in enumerate(t)}
    cols = []
    for i in t:
        c = [f.zero] * len(t)
        for j, a in u.column(i).data.items():
            c[pos[j]] = a
        cols.append(c)
    summands = []
    scalar_gens = []
    mu = None
    if t:
        a = MatrixFin.from_columns(f, cols, len(t))
        for d, g in cyclic_decomposition(a):
            vec = Vec.raw(f, {t[k]: c for k, c in enumerate(g) if c != 0})
            if d.degree == 1:
                mu = f.neg(d.coeffs[0])
                scalar_gens.append(vec)
            else:
                summands.append((vec, d.degree))
    excluded = set(t)
    h_extra = []
    if scalar_gens and mu != lam:
        nxt = 0
        for e in scalar_gens:
            while nxt in excluded:
                nxt += 1
            excluded.add(nxt)
            summands.append((e + Vec.e(f, nxt), 2))
    else:
        h_extra = scalar_gens
    return DominantSplit(summands, lam, mu, h_extra, frozenset(excluded), t)
