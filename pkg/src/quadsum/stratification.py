"""Stratifications of V^u, their property flags, connectors and elementary checks.

A stratification is described by a finite recipe and evaluated lazily: the
strata ``(x_alpha, n_alpha)`` are produced on demand, and the basis
``(u^k x_alpha)_{k < n_alpha}`` of V is enumerated by ``basis_items``.

Index sets: ``N`` uses ints, ``N2`` uses pairs ``(k, l)`` ordered
lexicographically, and towers use ``(0, i)`` / ``(1, upper position)``.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterator, Optional

from .algebra import FieldSpec
from .errors import CapExceeded, PreconditionUnverifiable, PropertyViolated, SpanGapOnPrefix
from .linalg import LazyBasis, Vec
from .operators import BasisOperator, Operator, apply

INF = None  # dimension of an infinite stratum


@dataclass(frozen=True)
class PropertyFlags:
    PA: bool
    PAplus: bool
    PM: bool

    @property
    def good(self):
        return self.PAplus and self.PM

    def to_json(self):
        return {"PA": self.PA, "PAplus": self.PAplus, "PM": self.PM}


@dataclass
class ElementaryCertificate:
    generators: list
    verified_prefix: int
    basis_size: int = 0


def _ge2(n):
    return n is INF or n >= 2


class Stratification:
    """Base class.  Subclasses provide positions, strata and the order structure."""

    index_kind = "abstract"

    def __init__(self, op: Operator):
        self.op = op
        self.field: FieldSpec = op.field
        self._basis: Optional[LazyBasis] = None
        self._powers: dict = {}
        self._lock = threading.RLock()

    # order structure ---------------------------------------------------------
    def iter_positions(self) -> Iterator:
        """All positions, each exactly once, in generation order (not D-order)."""
        raise NotImplementedError

    def stratum(self, pos) -> tuple:
        """``(x_pos, n_pos)``; ``n`` is None for an infinite stratum."""
        raise NotImplementedError

    def successor(self, pos):
        raise NotImplementedError

    def has_predecessor(self, pos) -> bool:
        raise NotImplementedError

    def minimum(self):
        raise NotImplementedError

    def flags(self) -> PropertyFlags:
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError

    # derived -------------------------------------------------------------------
    def power(self, pos, k) -> Vec:
        """``u^k x_pos``, cached."""
        with self._lock:
            chain = self._powers.get(pos)
            if chain is None:
                chain = [self.stratum(pos)[0]]
                self._powers[pos] = chain
            while len(chain) <= k:
                chain.append(apply(self.op, chain[-1]))
            return chain[k]

    def basis_items(self) -> Iterator:
        """Labelled basis vectors ``((pos, k), u^k x_pos)``.

        Finite strata are emitted whole; infinite strata advance one power per
        new position so every basis vector is reached.
        """
        active: list = []

        def advance():
            for item in active:
                pos, k = item
                yield (pos, k), self.power(pos, k)
                item[1] = k + 1

        for pos in self.iter_positions():
            n = self.stratum(pos)[1]
            if n is INF:
                active.append([pos, 0])
            else:
                for k in range(n):
                    yield (pos, k), self.power(pos, k)
            yield from advance()
        while active:
            yield from advance()

    def basis(self) -> LazyBasis:
        with self._lock:
            if self._basis is None:
                self._basis = LazyBasis(self.field, self.basis_items(), budget=2_000_000)
            return self._basis

    def elementary_generators(self) -> Iterator[Vec]:
        """Generators of the free module V^{u-v} for a connector v (PA and PM assumed).

        These are the x_alpha with alpha the minimum, a limit, or the successor of
        an infinite stratum.  ``None`` is yielded for positions contributing no
        generator, so consumers never block on an exhausted search.
        """
        for pos in self.iter_positions_in_order():
            if not self.has_predecessor(pos):
                yield self.stratum(pos)[0]
            else:
                yield None
            if self.stratum(pos)[1] is INF:
                succ = self.successor(pos)
                if succ is not None:
                    yield self.stratum(succ)[0]

    def iter_positions_in_order(self) -> Iterator:
        """Positions that matter for generators, in an order reaching each of them."""
        return self.iter_positions()

    def prefix(self, count) -> list:
        out = []
        for pos in self.iter_positions():
            if len(out) >= count:
                break
            x, n = self.stratum(pos)
            out.append((pos, x, n))
        return out


class SequenceStrat(Stratification):
    """Strata indexed by {0..L-1} or by N.

    ``head`` holds explicit strata; ``tail(i)`` produces stratum i beyond the
    head for infinite sequences.  ``tail_min_dim`` is the lower bound on tail
    dimensions that the producer guarantees (used for symbolic flags).
    """

    index_kind = "N"

    def __init__(self, op, head, tail=None, tail_min_dim=None, recipe=None):
        super().__init__(op)
        self.head = [(x, n) for x, n in head]
        self.tail = tail
        self.tail_min_dim = tail_min_dim
        self.recipe = recipe
        self._tail_cache: dict = {}

    @property
    def infinite(self):
        return self.tail is not None

    @property
    def length(self):
        return None if self.infinite else len(self.head)

    def iter_positions(self):
        i = 0
        while self.infinite or i < len(self.head):
            yield i
            i += 1

    def stratum(self, pos):
        if pos < len(self.head):
            return self.head[pos]
        if not self.infinite:
            raise IndexError(pos)
        v = self._tail_cache.get(pos)
        if v is None:
            v = self.tail(pos)
            self._tail_cache[pos] = v
        return v

    def successor(self, pos):
        if self.infinite or pos + 1 < len(self.head):
            return pos + 1
        return None

    def has_predecessor(self, pos):
        return pos > 0

    def minimum(self):
        return 0 if (self.infinite or self.head) else None

    def flags(self):
        dims = [n for _, n in self.head]
        if self.infinite:
            tail_ok = self.tail_min_dim is not None and self.tail_min_dim >= 2
            pa = all(_ge2(n) for n in dims[1:]) and tail_ok
            first = dims[0] if dims else (self.tail_min_dim if tail_ok else 1)
            return PropertyFlags(pa, pa and _ge2(first), True)
        pa = all(_ge2(n) for n in dims[1:])
        return PropertyFlags(pa, pa and (not dims or _ge2(dims[0])), not dims)

    def to_json(self):
        if self.recipe is not None:
            return self.recipe
        if self.infinite:
            raise PropertyViolated("infinite sequence without a recipe")
        return {
            "kind": "finite",
            "op": self.op.to_json(),
            "gens": [[x.to_json(), n] for x, n in self.head],
        }


def finite_strat(op, gens) -> SequenceStrat:
    """Finite stratification from explicit ``(x, n)`` pairs (n None for infinite)."""
    return SequenceStrat(op, gens)


def arithmetic_strat(op, start: int, step: int, n, head=()) -> SequenceStrat:
    """Strata ``x_i = e_{start + step*i'}`` (i' counted after ``head``) with constant dimension n."""
    f = op.field
    head = list(head)
    h = len(head)

    def tail(i):
        return Vec.e(f, start + step * (i - h)), n

    recipe = {
        "kind": "arithmetic",
        "op": op.to_json(),
        "start": start,
        "step": step,
        "n": n,
        "head": [[x.to_json(), m] for x, m in head],
    }
    return SequenceStrat(op, head, tail, tail_min_dim=(10**9 if n is INF else n), recipe=recipe)


class TowerStrat(Stratification):
    """Lexicographic tower ({0} x D) u ({1} x D') of a finite lower stratification and an upper one."""

    index_kind = "tower"

    def __init__(self, lower: SequenceStrat, upper: Stratification, recipe=None):
        super().__init__(lower.op)
        self.lower = lower
        self.upper = upper
        self.recipe = recipe

    def iter_positions(self):
        for p in self.lower.iter_positions():
            yield (0, p)
        for p in self.upper.iter_positions():
            yield (1, p)

    def iter_positions_in_order(self):
        for p in self.lower.iter_positions():
            yield (0, p)
        for p in self.upper.iter_positions_in_order():
            yield (1, p)

    def stratum(self, pos):
        side, p = pos
        return (self.lower if side == 0 else self.upper).stratum(p)

    def successor(self, pos):
        side, p = pos
        if side == 0:
            s = self.lower.successor(p)
            return (0, s) if s is not None else (1, self.upper.minimum())
        s = self.upper.successor(p)
        return None if s is None else (1, s)

    def has_predecessor(self, pos):
        side, p = pos
        if side == 0:
            return self.lower.has_predecessor(p)
        if p == self.upper.minimum():
            return self.lower.minimum() is not None
        return self.upper.has_predecessor(p)

    def minimum(self):
        m = self.lower.minimum()
        return (0, m) if m is not None else (1, self.upper.minimum())

    def flags(self):
        lo, up = self.lower.flags(), self.upper.flags()
        return PropertyFlags(lo.PA and up.PAplus, lo.PAplus and up.PAplus, up.PM)

    def to_json(self):
        if self.recipe is not None:
            return self.recipe
        return {"kind": "tower", "lower": self.lower.to_json(), "upper": self.upper.to_json()}


class MappedStrat(Stratification):
    """A stratification of a summand T of V, carried into V by an index embedding.

    ``op`` must restrict to ``inner.op`` on the embedded copy of T.
    """

    def __init__(self, op: Operator, inner: Stratification, embed, recipe=None):
        super().__init__(op)
        self.inner = inner
        self.embed = embed
        self.recipe = recipe
        self.index_kind = inner.index_kind

    def iter_positions(self):
        return self.inner.iter_positions()

    def iter_positions_in_order(self):
        return self.inner.iter_positions_in_order()

    def stratum(self, pos):
        x, n = self.inner.stratum(pos)
        return x.remap(self.embed), n

    def successor(self, pos):
        return self.inner.successor(pos)

    def has_predecessor(self, pos):
        return self.inner.has_predecessor(pos)

    def minimum(self):
        return self.inner.minimum()

    def flags(self):
        return self.inner.flags()

    def to_json(self):
        if self.recipe is not None:
            return self.recipe
        return {"kind": "mapped", "op": self.op.to_json(), "inner": self.inner.to_json()}


def tower_compose(lower: SequenceStrat, upper: Stratification) -> TowerStrat:
    if lower.op is not upper.op and lower.op.to_json() != upper.op.to_json():
        raise PreconditionUnverifiable("lower and upper stratifications use different operators")
    if lower.infinite or not lower.head:
        raise PreconditionUnverifiable("the lower stratification must be finite and non-empty")
    if not lower.flags().PAplus:
        raise PreconditionUnverifiable("the lower stratification lacks PA+")
    if not upper.flags().good:
        raise PreconditionUnverifiable("the upper stratification is not good (PA+ and PM)")
    return TowerStrat(lower, upper)


def check_properties(s: Stratification) -> PropertyFlags:
    return s.flags()


# ---------------------------------------------------------------------------
# connector and elementary verification


def connector(s: Stratification, a) -> BasisOperator:
    """``v(u^{n-1} x_alpha) = a u^{n-1} x_alpha - x_{alpha+1}`` on chain ends, 0 elsewhere.

    Then ``v^2 = a v`` and ``u - v`` is elementary.
    """
    f = s.field
    a = f.coerce(a)
    fl = s.flags()
    if not (fl.PA and fl.PM):
        raise PropertyViolated(f"connector needs PA and PM, got {fl}")

    def image(label):
        pos, k = label
        n = s.stratum(pos)[1]
        if n is INF or k != n - 1:
            return Vec.zero(f)
        succ = s.successor(pos)
        end = s.power(pos, k)
        return end.scale(a) - s.stratum(succ)[0]

    recipe = ("connector", {"strat": s.to_json(), "a": f.fmt(a)})
    return BasisOperator(f, s.basis(), image, recipe)


_END = object()


def chain_items(w: Operator, generators) -> Iterator:
    """Labelled vectors ``((i, k), w^k g_i)``.

    One item of ``generators`` is consumed per round (``None`` items are
    placeholders), then every chain advances by one.
    """
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
            idx, k, vec = item
            yield (idx, k), vec
            item[1] = k + 1
            item[2] = apply(w, vec)


def verify_elementary(u: Operator, gens, prefix: int, budget: Optional[int] = None) -> ElementaryCertificate:
    """Certify that the ``u``-chains of ``gens`` are independent and span e_0..e_{prefix-1}."""
    f = u.field
    budget = budget if budget is not None else 64 * prefix + 64
    basis = LazyBasis(f, chain_items(u, gens), budget=budget, track=False)
    used = []
    try:
        complete = basis.covers(prefix)
    except CapExceeded as exc:
        raise SpanGapOnPrefix(f"prefix of length {prefix} not spanned within {budget} iterates") from exc
    if not complete:
        raise SpanGapOnPrefix(f"the chains do not span e_0..e_{prefix - 1}")
    for label in basis.labels():
        if label[1] == 0:
            used.append(basis.vector(label))
    return ElementaryCertificate(used, prefix, len(basis))


def chain_basis(w: Operator, generators) -> LazyBasis:
    return LazyBasis(w.field, chain_items(w, generators), budget=2_000_000)

