"""Finite constructor trees for column-finite endomorphisms of V = (+)_n F e_n.

Every node evaluates ``column(n) = u(e_n)`` exactly.  Structural tags (torsion,
free generators, dominant eigenvalue) are derived from the tree only; anything
the rules cannot decide is reported as unknown.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

from .algebra import FieldSpec, Polynomial, Scalar, split_quadratic
from .errors import FieldMismatch, FormatError, NotSplit
from .linalg import Vec, axpy

YES, NO, UNKNOWN = "yes", "no", "unknown"


@dataclass(frozen=True)
class OperatorClassTags:
    is_torsion: str
    free_part_generators: tuple
    dominant_candidate: Optional[Scalar]
    deviation_rank_finite: str

    def to_json(self):
        d = self.dominant_candidate
        return {
            "is_torsion": self.is_torsion,
            "free_part_generators": list(self.free_part_generators),
            "dominant_candidate": None if d is None else d.field.fmt(d.value),
            "deviation_rank_finite": self.deviation_rank_finite,
        }


@dataclass
class Report:
    ok: bool
    checked: int
    first_failure: Optional[int] = None
    detail: str = ""

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class _Info:
    """Internal structural summary of a node.

    ``dominant`` is a raw field element, ``None`` for "known to have none", and
    ``_UNK`` when the rules cannot tell.  ``deviation`` is the finite set of
    indices where ``u e_n != dominant * e_n`` (only when dominant is known).
    """

    torsion: str
    free: tuple
    dominant: object
    deviation: Optional[frozenset] = None


_UNK = object()


class Anatomy:
    """A partition of the basis indices into finite u-invariant blocks.

    ``exceptional`` blocks are listed explicitly; every other block comes from
    ``regular()`` in increasing order of its least index.  When ``lam`` is set,
    ``(u - lam)^2`` kills every regular block.
    """

    def __init__(self, exceptional: Sequence[tuple], regular: Callable[[], Iterator[tuple]], lam=None):
        self.exceptional = tuple(sorted((tuple(sorted(b)) for b in exceptional), key=lambda b: b[0]))
        self._regular = regular
        self.lam = lam

    def regular(self):
        return self._regular()

    def blocks(self) -> Iterator[tuple]:
        exc = list(self.exceptional)
        k = 0
        for b in self._regular():
            while k < len(exc) and exc[k][0] < b[0]:
                yield exc[k]
                k += 1
            yield b
        yield from exc[k:]

    def map(self, index_map: Callable[[int], int], monotone: bool = True, lam=None) -> "Anatomy":
        reg = self._regular

        def regular():
            for b in reg():
                yield tuple(index_map(i) for i in b)

        return Anatomy([tuple(index_map(i) for i in b) for b in self.exceptional], regular, lam)


def _merge_sorted(a: Iterator[tuple], b: Iterator[tuple]) -> Iterator[tuple]:
    x = next(a, None)
    y = next(b, None)
    while x is not None or y is not None:
        if y is None or (x is not None and x[0] < y[0]):
            yield x
            x = next(a, None)
        else:
            yield y
            y = next(b, None)


class Operator:
    """Base node.  Subclasses implement ``_column`` and ``to_json``."""

    kind = "abstract"

    def __init__(self, field: FieldSpec):
        self.field = field
        self._memo: dict = {}
        self._lock = threading.Lock()

    def column(self, n: int) -> Vec:
        v = self._memo.get(n)
        if v is None:
            v = self._column(n)
            with self._lock:
                self._memo[n] = v
        return v

    def _column(self, n: int) -> Vec:
        raise NotImplementedError

    def __call__(self, x: Vec) -> Vec:
        return apply(self, x)

    def _info(self) -> _Info:
        return _Info(UNKNOWN, (), _UNK)

    def anatomy(self) -> Optional[Anatomy]:
        return None

    def to_json(self):
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} over {self.field}>"


def _check_fields(*ops):
    fields = {o.field for o in ops}
    if len(fields) != 1:
        raise FieldMismatch(f"operators over different fields: {sorted(map(str, fields))}")
    return fields.pop()


class Shift(Operator):
    kind = "shift"

    def _column(self, n):
        return Vec.e(self.field, n + 1)

    def _info(self):
        return _Info(NO, (0,), None)

    def to_json(self):
        return {"type": "shift"}


class DownShift(Operator):
    kind = "downshift"

    def _column(self, n):
        return Vec.zero(self.field) if n == 0 else Vec.e(self.field, n - 1)

    def _info(self):
        return _Info(YES, (), None)

    def to_json(self):
        return {"type": "downshift"}


class ScalarIdentity(Operator):
    kind = "scalar"

    def __init__(self, field, value):
        super().__init__(field)
        self.value = field.coerce(value)

    def _column(self, n):
        return Vec.raw(self.field, {n: self.value} if self.value != 0 else {})

    def _info(self):
        return _Info(YES, (), self.value, frozenset())

    def anatomy(self):
        return Anatomy([], _singletons, self.value)

    def to_json(self):
        return {"type": "scalar", "value": self.field.fmt(self.value)}


def _repeated_root(p: Polynomial):
    f = p.field
    if p.degree == 1:
        return f.neg(p.coeffs[0])
    if p.degree == 2:
        try:
            q = split_quadratic(p)
        except NotSplit:
            return None
        return q.x.value if q.x == q.y else None
    return None


def _singletons():
    n = 0
    while True:
        yield (n,)
        n += 1


class DiagonalPeriodic(Operator):
    kind = "diagonal"

    def __init__(self, field, pattern):
        super().__init__(field)
        if not pattern:
            raise ValueError("empty diagonal pattern")
        self.pattern = tuple(field.coerce(c) for c in pattern)

    def _column(self, n):
        c = self.pattern[n % len(self.pattern)]
        return Vec.raw(self.field, {n: c} if c != 0 else {})

    def _constant(self):
        return self.pattern[0] if len(set(self.pattern)) == 1 else None

    def _info(self):
        lam = self._constant()
        return _Info(YES, (), lam, frozenset() if lam is not None else None)

    def anatomy(self):
        return Anatomy([], _singletons, self._constant())

    def to_json(self):
        return {"type": "diagonal", "pattern": [self.field.fmt(c) for c in self.pattern]}


class BandedPeriodic(Operator):
    """``u e_n = sum_o pattern_o[n mod len] e_{n+o}``; terms with n+o < 0 are dropped."""

    kind = "banded"

    def __init__(self, field, bands):
        super().__init__(field)
        self.bands = tuple(sorted((int(o), tuple(field.coerce(c) for c in pat)) for o, pat in bands))
        if any(not pat for _, pat in self.bands):
            raise ValueError("empty band pattern")

    def _column(self, n):
        d = {}
        for o, pat in self.bands:
            c = pat[n % len(pat)]
            if c != 0 and n + o >= 0:
                d[n + o] = self.field.add(d.get(n + o, self.field.zero), c)
        return Vec.raw(self.field, {i: c for i, c in d.items() if c != 0})

    def to_json(self):
        f = self.field
        return {"type": "banded", "bands": [[o, [f.fmt(c) for c in pat]] for o, pat in self.bands]}


class CompanionBlockSum(Operator):
    """Companion matrices of the listed monic polynomials, repeated forever along the diagonal."""

    kind = "companion"

    def __init__(self, field, polys: Sequence[Polynomial]):
        super().__init__(field)
        ps = []
        for p in polys:
            if not isinstance(p, Polynomial):
                p = Polynomial(field, p)
            if p.field != field:
                raise FieldMismatch("block polynomial over the wrong field")
            if p.degree < 1 or p.leading != field.one:
                raise ValueError("blocks need monic polynomials of degree >= 1")
            ps.append(p)
        if not ps:
            raise ValueError("no blocks")
        self.polys = tuple(ps)
        self._starts = [0]
        for p in ps:
            self._starts.append(self._starts[-1] + p.degree)
        self.period = self._starts[-1]

    def _locate(self, n):
        q, r = divmod(n, self.period)
        for k, p in enumerate(self.polys):
            if r < self._starts[k + 1]:
                return q * self.period + self._starts[k], p, r - self._starts[k]
        raise AssertionError

    def _column(self, n):
        f = self.field
        start, p, j = self._locate(n)
        d = p.degree
        if j < d - 1:
            return Vec.e(f, n + 1)
        return Vec.raw(f, {start + i: f.neg(c) for i, c in enumerate(p.coeffs[:d]) if c != 0})

    def _lam(self, power):
        """The common mu with every block polynomial equal to (t - mu)^d, d <= power."""
        lam = None
        for p in self.polys:
            if p.degree > power:
                return None
            mu = _repeated_root(p)
            if mu is None or (lam is not None and lam != mu):
                return None
            lam = mu
        return lam

    def _info(self):
        lam = self._lam(1)
        return _Info(YES, (), lam, frozenset() if lam is not None else None)

    def anatomy(self):
        def regular():
            base = 0
            while True:
                for k, p in enumerate(self.polys):
                    s = base + self._starts[k]
                    yield tuple(range(s, s + p.degree))
                base += self.period

        return Anatomy([], regular, self._lam(2))

    def to_json(self):
        return {"type": "companion", "blocks": [p.to_json() for p in self.polys]}


class FiniteRankPatch(Operator):
    kind = "patch"

    def __init__(self, base: Operator, columns: dict):
        super().__init__(base.field)
        self.base = base
        cols = {}
        for n, v in columns.items():
            if not isinstance(v, Vec):
                v = Vec.from_json(base.field, v)
            if v.field != base.field:
                raise FieldMismatch("patch column over the wrong field")
            if n < 0:
                raise ValueError("negative patch index")
            cols[int(n)] = v
        self.columns = cols

    def _column(self, n):
        v = self.columns.get(n)
        return v if v is not None else self.base.column(n)

    def _info(self):
        b = self.base._info()
        if b.dominant is _UNK:
            return _Info(UNKNOWN, (), _UNK)
        if b.dominant is None:
            return _Info(YES if self.anatomy() is not None else UNKNOWN, (), None)
        return _Info(YES, (), b.dominant, b.deviation | frozenset(self.columns))

    def anatomy(self):
        base = self.base.anatomy()
        if base is None:
            return None
        touched = set(self.columns)
        for v in self.columns.values():
            touched.update(v.data)
        if not touched:
            return base
        # the blocks meeting ``touched`` are merged; base blocks are finite and
        # sorted, so scanning stops once past max(touched)
        top = max(touched)
        merged = set()
        for b in base.blocks():
            if b[0] > top and all(x > top for x in b):
                break
            if touched.intersection(b):
                merged.update(b)
        exc = [b for b in base.exceptional if not merged.intersection(b)]
        exc.append(tuple(sorted(merged)))
        excluded = merged

        def regular():
            for b in base.regular():
                if not excluded.intersection(b):
                    yield b

        return Anatomy(exc, regular, base.lam)

    def to_json(self):
        return {
            "type": "patch",
            "base": self.base.to_json(),
            "columns": [[n, v.to_json()] for n, v in sorted(self.columns.items())],
        }


class Layout:
    """Index maps of a direct sum: ``interleave`` or ``prefix(k)``."""

    def __init__(self, kind: str, k: int = 0):
        if kind not in ("interleave", "prefix"):
            raise ValueError(f"unknown layout {kind}")
        if kind == "prefix" and k < 0:
            raise ValueError("prefix size must be non-negative")
        self.kind = kind
        self.k = k

    def left(self, n):
        return 2 * n if self.kind == "interleave" else n

    def right(self, n):
        return 2 * n + 1 if self.kind == "interleave" else n + self.k

    def split(self, n):
        """Global index -> (side, local index)."""
        if self.kind == "interleave":
            return ("L", n // 2) if n % 2 == 0 else ("R", n // 2)
        return ("L", n) if n < self.k else ("R", n - self.k)

    def to_json(self):
        return "interleave" if self.kind == "interleave" else {"prefix": self.k}

    @classmethod
    def from_json(cls, obj):
        if obj == "interleave":
            return cls("interleave")
        if isinstance(obj, dict) and "prefix" in obj:
            return cls("prefix", int(obj["prefix"]))
        raise FormatError(f"bad layout {obj!r}")

    def __eq__(self, other):
        return isinstance(other, Layout) and (self.kind, self.k) == (other.kind, other.k)


class DirectSum(Operator):
    """``left (+) right``; with a prefix layout only the first k columns of ``left`` are used."""

    kind = "direct_sum"

    def __init__(self, left: Operator, right: Operator, layout: Layout | str = "interleave"):
        super().__init__(_check_fields(left, right))
        self.left = left
        self.right = right
        self.layout = layout if isinstance(layout, Layout) else Layout.from_json(layout)

    def _column(self, n):
        side, m = self.layout.split(n)
        if side == "L":
            v = self.left.column(m)
            if self.layout.kind == "prefix" and v.max_index() >= self.layout.k:
                raise ValueError(f"left summand leaves the first {self.layout.k} coordinates")
            return v.remap(self.layout.left)
        return self.right.column(m).remap(self.layout.right)

    def _left_info(self):
        if self.layout.kind == "prefix":
            # a finite-dimensional summand is torsion and never blocks dominance
            return _Info(YES, (), "finite", frozenset(range(self.layout.k)))
        return self.left._info()

    def _info(self):
        a, b = self._left_info(), self.right._info()
        if a.torsion == NO or b.torsion == NO:
            torsion = NO
        elif a.torsion == YES and b.torsion == YES:
            torsion = YES
        else:
            torsion = UNKNOWN
        free = ()
        if torsion != UNKNOWN and a.torsion != UNKNOWN and b.torsion != UNKNOWN:
            fl = tuple(self.layout.left(i) for i in a.free) if self.layout.kind == "interleave" else ()
            free = fl + tuple(self.layout.right(i) for i in b.free)
        if a.dominant == "finite":
            if b.dominant is _UNK:
                return _Info(torsion, free, _UNK)
            if b.dominant is None:
                return _Info(torsion, free, None)
            dev = frozenset(range(self.layout.k)) | frozenset(self.layout.right(i) for i in b.deviation)
            return _Info(torsion, free, b.dominant, dev)
        if a.dominant is _UNK or b.dominant is _UNK:
            if a.dominant is None or b.dominant is None:
                return _Info(torsion, free, None)
            return _Info(torsion, free, _UNK)
        if a.dominant is None or b.dominant is None or a.dominant != b.dominant:
            return _Info(torsion, free, None)
        dev = frozenset(self.layout.left(i) for i in a.deviation) | frozenset(self.layout.right(i) for i in b.deviation)
        return _Info(torsion, free, a.dominant, dev)

    def anatomy(self):
        r = self.right.anatomy()
        if r is None:
            return None
        L = self.layout
        if L.kind == "prefix":
            exc = ([tuple(range(L.k))] if L.k else []) + [tuple(L.right(i) for i in b) for b in r.exceptional]

            def regular():
                for b in r.regular():
                    yield tuple(L.right(i) for i in b)

            return Anatomy(exc, regular, r.lam)
        l = self.left.anatomy()
        if l is None:
            return None
        lam = l.lam if l.lam is not None and l.lam == r.lam else None
        exc = [tuple(L.left(i) for i in b) for b in l.exceptional] + [tuple(L.right(i) for i in b) for b in r.exceptional]

        def regular():
            a = (tuple(L.left(i) for i in b) for b in l.regular())
            c = (tuple(L.right(i) for i in b) for b in r.regular())
            return _merge_sorted(a, c)

        return Anatomy(exc, regular, lam)

    def to_json(self):
        return {"type": "direct_sum", "left": self.left.to_json(), "right": self.right.to_json(),
                "layout": self.layout.to_json()}


class Sum(Operator):
    kind = "sum"

    def __init__(self, a: Operator, b: Operator):
        super().__init__(_check_fields(a, b))
        self.a, self.b = a, b

    def _column(self, n):
        return self.a.column(n) + self.b.column(n)

    def _info(self):
        return _sum_info(self.field, self.a, self.b, self.field.one)

    def anatomy(self):
        return _sum_anatomy(self.field, self.a, self.b, self.field.one)

    def to_json(self):
        return {"type": "sum", "terms": [self.a.to_json(), self.b.to_json()]}


class Difference(Operator):
    kind = "difference"

    def __init__(self, a: Operator, b: Operator):
        super().__init__(_check_fields(a, b))
        self.a, self.b = a, b

    def _column(self, n):
        return self.a.column(n) - self.b.column(n)

    def _info(self):
        return _sum_info(self.field, self.a, self.b, self.field.neg(self.field.one))

    def anatomy(self):
        return _sum_anatomy(self.field, self.a, self.b, self.field.neg(self.field.one))

    def to_json(self):
        return {"type": "difference", "left": self.a.to_json(), "right": self.b.to_json()}


def _is_exact_scalar(info: _Info) -> bool:
    return info.dominant is not _UNK and info.dominant is not None and info.deviation == frozenset()


def _sum_info(f, a, b, sign):
    ia, ib = a._info(), b._info()
    if ia.dominant is not _UNK and ia.dominant is not None and ib.dominant is not _UNK and ib.dominant is not None:
        return _Info(YES, (), f.add(ia.dominant, f.mul(sign, ib.dominant)), ia.deviation | ib.deviation)
    if _is_exact_scalar(ib):
        return _Info(ia.torsion, ia.free, _shift_dom(f, ia.dominant, f.mul(sign, ib.dominant)), ia.deviation)
    if _is_exact_scalar(ia) and sign == f.one:
        return _Info(ib.torsion, ib.free, _shift_dom(f, ib.dominant, ia.dominant), ib.deviation)
    if ia.dominant is None and ib.dominant is not _UNK and ib.dominant is not None:
        return _Info(UNKNOWN, (), None)
    if ib.dominant is None and ia.dominant is not _UNK and ia.dominant is not None:
        return _Info(UNKNOWN, (), None)
    return _Info(UNKNOWN, (), _UNK)


def _shift_dom(f, dom, c):
    if dom is _UNK or dom is None:
        return dom
    return f.add(dom, c)


def _sum_anatomy(f, a, b, sign):
    ia, ib = a._info(), b._info()
    if _is_exact_scalar(ib):
        an = a.anatomy()
        c = f.mul(sign, ib.dominant)
    elif _is_exact_scalar(ia) and sign == f.one:
        an = b.anatomy()
        c = ia.dominant
    else:
        return None
    if an is None:
        return None
    return Anatomy(an.exceptional, an.regular, None if an.lam is None else f.add(an.lam, c))


class Scale(Operator):
    kind = "scale"

    def __init__(self, c, op: Operator):
        super().__init__(op.field)
        self.c = op.field.coerce(c)
        self.op = op

    def _column(self, n):
        return self.op.column(n).scale(self.c)

    def _info(self):
        if self.c == 0:
            return _Info(YES, (), self.field.zero, frozenset())
        i = self.op._info()
        dom = i.dominant if i.dominant is _UNK or i.dominant is None else self.field.mul(self.c, i.dominant)
        return _Info(i.torsion, i.free, dom, i.deviation)

    def anatomy(self):
        if self.c == 0:
            return Anatomy([], _singletons, self.field.zero)
        an = self.op.anatomy()
        if an is None:
            return None
        return Anatomy(an.exceptional, an.regular, None if an.lam is None else self.field.mul(self.c, an.lam))

    def to_json(self):
        return {"type": "scale", "c": self.field.fmt(self.c), "op": self.op.to_json()}


class Compose(Operator):
    """``outer o inner``."""

    kind = "compose"

    def __init__(self, outer: Operator, inner: Operator):
        super().__init__(_check_fields(outer, inner))
        self.outer, self.inner = outer, inner

    def _column(self, n):
        return apply(self.outer, self.inner.column(n))

    def _info(self):
        a, b = self.outer._info(), self.inner._info()
        if a.dominant not in (None, _UNK) and b.dominant not in (None, _UNK):
            return _Info(YES, (), self.field.mul(a.dominant, b.dominant), a.deviation | b.deviation)
        return _Info(UNKNOWN, (), _UNK)

    def to_json(self):
        return {"type": "compose", "outer": self.outer.to_json(), "inner": self.inner.to_json()}


class RuleTable(Operator):
    """Explicit exceptional columns plus a periodic banded rule for all other columns."""

    kind = "rule_table"

    def __init__(self, field, exceptions: dict, period: int, tail: Sequence):
        super().__init__(field)
        if period < 1:
            raise ValueError("period must be positive")
        self.exceptions = {int(n): v if isinstance(v, Vec) else Vec.from_json(field, v) for n, v in exceptions.items()}
        self.period = period
        self.tail = tuple(sorted((int(o), tuple(field.coerce(c) for c in pat)) for o, pat in tail))
        for o, pat in self.tail:
            if len(pat) != period:
                raise ValueError("tail pattern length must equal the period")

    def _column(self, n):
        v = self.exceptions.get(n)
        if v is not None:
            return v
        f = self.field
        d = {}
        for o, pat in self.tail:
            c = pat[n % self.period]
            if c != 0 and n + o >= 0:
                d[n + o] = f.add(d.get(n + o, f.zero), c)
        return Vec.raw(f, {i: c for i, c in d.items() if c != 0})

    def to_json(self):
        f = self.field
        return {
            "type": "rule_table",
            "exceptions": [[n, v.to_json()] for n, v in sorted(self.exceptions.items())],
            "period": self.period,
            "tail": [[o, [f.fmt(c) for c in pat]] for o, pat in self.tail],
        }


class BasisOperator(Operator):
    """Operator given by its values on a lazily enumerated basis.

    ``image(label)`` is the image of basis vector ``label``; columns on e_n are
    obtained by expanding e_n in the basis.  ``recipe`` is a ``(name, args)`` pair
    that rebuilds the operator deterministically (see ``serialize``).
    """

    kind = "recipe"

    def __init__(self, field, basis, image: Callable[[object], Vec], recipe=None):
        super().__init__(field)
        self.basis = basis
        self.image = image
        self.recipe = recipe
        self._images: dict = {}

    def image_of(self, label) -> Vec:
        v = self._images.get(label)
        if v is None:
            v = self.image(label)
            with self._lock:
                self._images[label] = v
        return v

    def _column(self, n):
        f = self.field
        acc: dict = {}
        for label, c in self.basis.coords(Vec.e(f, n)).items():
            axpy(f, acc, c, self.image_of(label).data)
        return Vec.raw(f, acc)

    def to_json(self):
        if self.recipe is None:
            raise FormatError("this operator has no serializable recipe")
        name, args = self.recipe
        return {"type": "recipe", "name": name, "args": args}


# ---------------------------------------------------------------------------
# public operations


def apply(u: Operator, x: Vec) -> Vec:
    if x.field != u.field:
        raise FieldMismatch(f"vector over {x.field}, operator over {u.field}")
    f = u.field
    acc: dict = {}
    for n, c in x.data.items():
        axpy(f, acc, c, u.column(n).data)
    return Vec.raw(f, acc)


def op_add(a, b):
    return Sum(a, b)


def op_sub(a, b):
    return Difference(a, b)


def op_scale(c, a):
    return Scale(c, a)


def op_compose(a, b):
    return Compose(a, b)


def identity(field):
    return ScalarIdentity(field, field.one)


def eval_poly(p: Polynomial, u: Operator, x: Vec) -> Vec:
    if p.field != u.field or x.field != u.field:
        raise FieldMismatch("polynomial, operator and vector must share a field")
    f = u.field
    acc = Vec.zero(f)
    for c in reversed(p.coeffs):
        acc = apply(u, acc)
        if c != 0:
            acc = Vec.raw(f, axpy(f, dict(acc.data), c, x.data))
    return acc


def verify_annihilated(u: Operator, p: Polynomial, prefix: int) -> Report:
    if prefix < 1:
        raise ValueError("prefix must be at least 1")
    for n in range(prefix):
        r = eval_poly(p, u, Vec.e(u.field, n))
        if r:
            return Report(False, n + 1, n, f"p(u)e_{n} = {r!r}")
    return Report(True, prefix)


def classify_structure(u: Operator) -> OperatorClassTags:
    i = u._info()
    if i.dominant is _UNK:
        return OperatorClassTags(i.torsion, i.free, None, UNKNOWN)
    if i.dominant is None:
        return OperatorClassTags(i.torsion, i.free, None, NO)
    return OperatorClassTags(YES, i.free, Scalar(i.dominant, u.field), YES)


def deviation_columns(u: Operator):
    """``(lam, S)`` with ``u e_n = lam e_n`` for every n outside the finite set S, or None."""
    i = u._info()
    if i.dominant is _UNK or i.dominant is None:
        return None
    return i.dominant, frozenset(i.deviation)


def anatomy(u: Operator) -> Optional[Anatomy]:
    return u.anatomy()
