"""Sparse vectors, exact elimination, lazily extended bases and small dense matrices."""
from __future__ import annotations

import threading
from typing import Callable, Hashable, Iterator, Sequence

from .algebra import FieldSpec, Polynomial
from .errors import CapExceeded, FieldMismatch, NotFreeOnPrefix, SpanGapOnPrefix


class Vec:
    """Finitely supported vector of V = (+)_n F e_n; zero coefficients are never stored."""

    __slots__ = ("field", "data")

    def __init__(self, field: FieldSpec, data=None):
        self.field = field
        d = {}
        for i, c in (data or {}).items():
            if i < 0:
                raise ValueError(f"negative basis index {i}")
            c = field.coerce(c)
            if c != 0:
                d[int(i)] = c
        self.data = d

    @classmethod
    def raw(cls, field, data):
        v = object.__new__(cls)
        v.field = field
        v.data = data
        return v

    @classmethod
    def e(cls, field, n, coeff=None):
        return cls.raw(field, {n: field.one if coeff is None else field.coerce(coeff)})

    @classmethod
    def zero(cls, field):
        return cls.raw(field, {})

    def _check(self, other):
        if other.field != self.field:
            raise FieldMismatch(f"{self.field} vs {other.field}")

    def __add__(self, other):
        self._check(other)
        return Vec.raw(self.field, add_into(self.field, dict(self.data), other.data))

    def __sub__(self, other):
        self._check(other)
        return Vec.raw(self.field, axpy(self.field, dict(self.data), self.field.neg(self.field.one), other.data))

    def __neg__(self):
        f = self.field
        return Vec.raw(f, {i: f.neg(c) for i, c in self.data.items()})

    def scale(self, c):
        f = self.field
        c = f.coerce(c)
        if c == 0:
            return Vec.raw(f, {})
        return Vec.raw(f, {i: f.mul(c, x) for i, x in self.data.items()})

    __rmul__ = scale

    def __getitem__(self, i):
        return self.data.get(i, self.field.zero)

    def __bool__(self):
        return bool(self.data)

    def is_zero(self):
        return not self.data

    def __eq__(self, other):
        if not isinstance(other, Vec):
            return NotImplemented
        return self.field == other.field and self.data == other.data

    def __hash__(self):
        return hash((self.field, frozenset(self.data.items())))

    def support(self):
        return sorted(self.data)

    def max_index(self):
        return max(self.data) if self.data else -1

    def items(self):
        return sorted(self.data.items())

    def remap(self, index_map: Callable[[int], int]) -> "Vec":
        return Vec.raw(self.field, {index_map(i): c for i, c in self.data.items()})

    def to_json(self):
        return [[i, self.field.fmt(c)] for i, c in self.items()]

    @classmethod
    def from_json(cls, field, obj):
        if isinstance(obj, dict):
            return cls(field, {int(k): v for k, v in obj.items()})
        return cls(field, {int(i): c for i, c in obj})

    def __repr__(self):
        if not self.data:
            return "Vec(0)"
        return "Vec(" + " + ".join(f"{self.field.fmt(c)}*e{i}" for i, c in self.items()) + ")"


def axpy(field, y: dict, a, x: dict) -> dict:
    """In place ``y += a*x`` on raw dicts; returns ``y``."""
    if a == 0:
        return y
    p = field.characteristic
    if p:
        for i, c in x.items():
            s = (y.get(i, 0) + a * c) % p
            if s:
                y[i] = s
            else:
                y.pop(i, None)
    else:
        for i, c in x.items():
            s = y.get(i, 0) + a * c
            if s.__class__ is not int and s.denominator == 1:
                s = s.numerator
            if s:
                y[i] = s
            else:
                y.pop(i, None)
    return y


def add_into(field, y: dict, x: dict) -> dict:
    return axpy(field, y, field.one, x)


class Echelon:
    """Row echelon data keyed by each row's largest basis index.

    Optionally tracks, for every stored row, its expression in terms of the
    labelled vectors that were inserted.
    """

    def __init__(self, field: FieldSpec, track: bool = False):
        self.field = field
        self.track = track
        self.rows: dict[int, tuple[dict, dict]] = {}
        self.last_pivot = None

    def copy(self) -> "Echelon":
        e = Echelon(self.field, self.track)
        e.rows = dict(self.rows)
        return e

    @property
    def dim(self):
        return len(self.rows)

    def _reduce(self, vec: dict, combo: dict | None, full: bool):
        f = self.field
        res = dict(vec)
        if not res:
            return res, combo
        rows = self.rows
        if not full:
            while res:
                m = max(res)
                row = rows.get(m)
                if row is None:
                    break
                c = f.neg(res[m])
                axpy(f, res, c, row[0])
                if combo is not None:
                    axpy(f, combo, c, row[1])
            return res, combo
        pending = sorted((i for i in res if i in rows), reverse=True)
        while pending:
            m = pending.pop(0)
            if m not in res:
                continue
            row = rows[m]
            c = f.neg(res[m])
            axpy(f, res, c, row[0])
            if combo is not None:
                axpy(f, combo, c, row[1])
            pending = sorted((i for i in res if i in rows and i < m), reverse=True)
        return res, combo

    def normal_form(self, vec: Vec) -> Vec:
        """Canonical representative of ``vec`` modulo the span."""
        return Vec.raw(self.field, self._reduce(vec.data, None, True)[0])

    def contains(self, vec: Vec) -> bool:
        return not self._reduce(vec.data, None, False)[0]

    def add(self, vec: Vec, label: Hashable = None) -> bool:
        """Insert ``vec``; False when it already lies in the span."""
        combo = {label: self.field.one} if self.track else None
        res, combo = self._reduce(vec.data, combo, False)
        if not res:
            return False
        self._store(res, combo)
        return True

    def _store(self, res, combo):
        f = self.field
        m = max(res)
        inv = f.inv(res[m])
        row = {i: f.mul(inv, c) for i, c in res.items()}
        if combo is not None:
            combo = {k: f.mul(inv, c) for k, c in combo.items()}
        self.rows[m] = (row, combo)
        self.last_pivot = m

    def coordinates(self, vec: Vec):
        """Label coefficients expressing ``vec``, or None if outside the span."""
        res, combo = self._reduce(vec.data, {}, False)
        if res:
            return None
        f = self.field
        return {k: f.neg(c) for k, c in combo.items() if c != 0}


class LazyBasis:
    """A basis of V produced lazily by a labelled source.

    ``coords`` pulls new basis vectors until the requested vector is in the span
    of those pulled so far.  The source order is the only thing that matters, so
    results do not depend on which columns were requested first.
    """

    def __init__(self, field: FieldSpec, source: Iterator, budget: int = 100_000, track: bool = True):
        self.field = field
        self._source = iter(source)
        self._ech = Echelon(field, track=track)
        self._vectors: dict = {}
        self._order: list = []
        self._budget = budget
        self._exhausted = False
        self._lock = threading.RLock()

    def __len__(self):
        return len(self._order)

    def _pull(self) -> bool:
        if self._exhausted:
            return False
        if len(self._order) >= self._budget:
            raise CapExceeded(f"lazy basis exceeded its budget of {self._budget} vectors")
        try:
            label, vec = next(self._source)
        except StopIteration:
            self._exhausted = True
            return False
        if vec.field != self.field:
            raise FieldMismatch("basis vector over the wrong field")
        if label in self._vectors:
            raise ValueError(f"duplicate basis label {label!r}")
        if not self._ech.add(vec, label):
            raise NotFreeOnPrefix(f"basis vector {label!r} depends on earlier ones")
        self._vectors[label] = vec
        self._order.append(label)
        return True

    def labels(self):
        return list(self._order)

    def vector(self, label):
        with self._lock:
            while label not in self._vectors:
                if not self._pull():
                    raise KeyError(label)
            return self._vectors[label]

    def ensure(self, count: int):
        with self._lock:
            while len(self._order) < count and self._pull():
                pass
            return self._order[:count]

    def covers(self, prefix: int) -> bool:
        """Pull until e_0..e_{prefix-1} lie in the span; False if the source runs dry first.

        Pivots are largest indices, so the span meets the first ``prefix``
        coordinates in exactly the rows whose pivot is below ``prefix``.
        """
        with self._lock:
            low = sum(1 for p in self._ech.rows if p < prefix)
            while low < prefix:
                if not self._pull():
                    return False
                if self._ech.last_pivot < prefix:
                    low += 1
            return True

    def coords(self, vec: Vec) -> dict:
        f = self.field
        with self._lock:
            res, combo = self._ech._reduce(vec.data, {}, False)
            while res:
                if not self._pull():
                    raise SpanGapOnPrefix(f"{vec!r} is not in the span of the basis")
                res, combo = self._ech._reduce(res, combo, False)
            # the reduction tracks the residual, so the expression of vec is -combo
            return {k: f.neg(c) for k, c in combo.items() if c != 0}


def diagonal_merge(streams: Sequence[Callable[[int], object]]):
    """Yield ``(i, k, streams[i](k))`` along anti-diagonals i + k = 0, 1, 2, ..."""
    d = 0
    while True:
        for i in range(min(d, len(streams) - 1), -1, -1):
            yield i, d - i, streams[i](d - i)
        d += 1


# ---------------------------------------------------------------------------
# dense matrices


class MatrixFin:
    """Square (or rectangular) dense matrix of raw field elements."""

    __slots__ = ("field", "rows")

    def __init__(self, field: FieldSpec, rows):
        self.field = field
        self.rows = tuple(tuple(field.coerce(x) for x in r) for r in rows)

    @classmethod
    def raw(cls, field, rows):
        m = object.__new__(cls)
        m.field = field
        m.rows = tuple(tuple(r) for r in rows)
        return m

    @classmethod
    def zeros(cls, field, n, m=None):
        m = n if m is None else m
        return cls.raw(field, [[field.zero] * m for _ in range(n)])

    @classmethod
    def identity(cls, field, n, scalar=None):
        s = field.one if scalar is None else field.coerce(scalar)
        return cls.raw(field, [[s if i == j else field.zero for j in range(n)] for i in range(n)])

    @classmethod
    def from_columns(cls, field, columns, n):
        return cls.raw(field, [[col[i] for col in columns] for i in range(n)])

    @property
    def n(self):
        return len(self.rows)

    @property
    def shape(self):
        return (len(self.rows), len(self.rows[0]) if self.rows else 0)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def column(self, j):
        return [r[j] for r in self.rows]

    def __add__(self, other):
        f = self.field
        return MatrixFin.raw(f, [[f.add(a, b) for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __sub__(self, other):
        f = self.field
        return MatrixFin.raw(f, [[f.sub(a, b) for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def scale(self, c):
        f = self.field
        c = f.coerce(c)
        return MatrixFin.raw(f, [[f.mul(c, a) for a in r] for r in self.rows])

    def __matmul__(self, other):
        f = self.field
        cols = list(zip(*other.rows)) if other.rows else []
        out = []
        for r in self.rows:
            row = []
            for c in cols:
                acc = f.zero
                for a, b in zip(r, c):
                    if a and b:
                        acc = f.add(acc, f.mul(a, b))
                row.append(acc)
            out.append(row)
        return MatrixFin.raw(f, out)

    def apply(self, vec: Sequence):
        f = self.field
        out = []
        for r in self.rows:
            acc = f.zero
            for a, b in zip(r, vec):
                if a and b:
                    acc = f.add(acc, f.mul(a, b))
            out.append(acc)
        return out

    def __eq__(self, other):
        if not isinstance(other, MatrixFin):
            return NotImplemented
        return self.field == other.field and self.rows == other.rows

    def __hash__(self):
        return hash((self.field, self.rows))

    def trace(self):
        f = self.field
        acc = f.zero
        for i in range(self.n):
            acc = f.add(acc, self.rows[i][i])
        return acc

    def is_zero(self):
        return all(x == 0 for r in self.rows for x in r)

    def poly_eval(self, p: Polynomial) -> "MatrixFin":
        f = self.field
        acc = MatrixFin.zeros(f, self.n)
        for c in reversed(p.coeffs):
            acc = acc @ self + MatrixFin.identity(f, self.n, c)
        return acc

    def annihilated_by(self, p: Polynomial) -> bool:
        return self.poly_eval(p).is_zero()

    def direct_sum(self, other):
        f = self.field
        n, m = self.n, other.n
        rows = [list(r) + [f.zero] * m for r in self.rows]
        rows += [[f.zero] * n + list(r) for r in other.rows]
        return MatrixFin.raw(f, rows)

    def rank(self):
        return len(row_reduce(self.field, [list(r) for r in self.rows])[1])

    def inverse(self):
        f = self.field
        n = self.n
        aug = [list(r) + [f.one if i == j else f.zero for j in range(n)] for i, r in enumerate(self.rows)]
        red, piv = row_reduce(f, aug)
        if piv[:n] != list(range(n)):
            raise ZeroDivisionError("singular matrix")
        return MatrixFin.raw(f, [r[n:] for r in red[:n]])

    def to_json(self):
        return [[self.field.fmt(x) for x in r] for r in self.rows]

    @classmethod
    def from_json(cls, field, obj):
        return cls(field, obj)

    def __repr__(self):
        return "MatrixFin(" + repr([[self.field.fmt(x) for x in r] for r in self.rows]) + ")"


def row_reduce(field, rows):
    """Reduced row echelon form of a list of lists; returns (rows, pivot columns)."""
    f = field
    rows = [list(r) for r in rows]
    if not rows:
        return rows, []
    ncols = len(rows[0])
    piv = []
    r = 0
    for c in range(ncols):
        k = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if k is None:
            continue
        rows[r], rows[k] = rows[k], rows[r]
        inv = f.inv(rows[r][c])
        rows[r] = [f.mul(inv, x) for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                m = rows[i][c]
                rows[i] = [f.sub(x, f.mul(m, y)) for x, y in zip(rows[i], rows[r])]
        piv.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, piv


def nullspace(field, matrix_rows, ncols):
    """Basis of {x : M x = 0} as lists."""
    f = field
    red, piv = row_reduce(f, matrix_rows) if matrix_rows else ([], [])
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for fc in free:
        x = [f.zero] * ncols
        x[fc] = f.one
        for r, pc in enumerate(piv):
            x[pc] = f.neg(red[r][fc])
        basis.append(x)
    return basis


# ---------------------------------------------------------------------------
# cyclic (invariant factor) decomposition of a finite-dimensional F[t]-module


def _smith_with_left_inverse(field, A: MatrixFin):
    """Diagonalise ``tI - A`` over F[t] by unimodular operations.

    Returns the diagonal (invariant factors, monic, divisibility chain) and the
    inverse of the accumulated row transform as a matrix of polynomials.
    """
    f = field
    n = A.n
    one = Polynomial._raw(f, [f.one])
    zero = Polynomial._raw(f, [])
    M = [[(Polynomial._raw(f, [f.neg(A[i, j])] + ([f.one] if i == j else [])) if i == j
           else Polynomial._raw(f, [f.neg(A[i, j])])) for j in range(n)] for i in range(n)]
    Pinv = [[one if i == j else zero for j in range(n)] for i in range(n)]

    def row_add(i, j, c):  # row_i += c * row_j
        M[i] = [a + c * b for a, b in zip(M[i], M[j])]
        for r in range(n):
            Pinv[r][j] = Pinv[r][j] - Pinv[r][i] * c

    def row_swap(i, j):
        M[i], M[j] = M[j], M[i]
        for r in range(n):
            Pinv[r][i], Pinv[r][j] = Pinv[r][j], Pinv[r][i]

    def row_scale(i, u):
        M[i] = [a * u for a in M[i]]
        inv = f.inv(u)
        for r in range(n):
            Pinv[r][i] = Pinv[r][i] * inv

    def col_add(i, j, c):  # col_i += c * col_j
        for r in range(n):
            M[r][i] = M[r][i] + c * M[r][j]

    def col_swap(i, j):
        for r in range(n):
            M[r][i], M[r][j] = M[r][j], M[r][i]

    for k in range(n):
        while True:
            best = None
            for i in range(k, n):
                for j in range(k, n):
                    if not M[i][j].is_zero() and (best is None or M[i][j].degree < M[best[0]][best[1]].degree):
                        best = (i, j)
            if best is None:
                break
            i, j = best
            if i != k:
                row_swap(i, k)
            if j != k:
                col_swap(j, k)
            piv = M[k][k]
            clean = True
            for i in range(k + 1, n):
                if not M[i][k].is_zero():
                    q, r = divmod(M[i][k], piv)
                    row_add(i, k, -q)
                    if not r.is_zero():
                        clean = False
            for j in range(k + 1, n):
                if not M[k][j].is_zero():
                    q, r = divmod(M[k][j], piv)
                    col_add(j, k, -q)
                    if not r.is_zero():
                        clean = False
            if not clean:
                continue
            bad = None
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    if not (M[i][j] % piv).is_zero():
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            row_add(k, bad, one)
        if not M[k][k].is_zero():
            row_scale(k, f.inv(M[k][k].leading))
    return [M[k][k] for k in range(n)], Pinv


def cyclic_decomposition(A: MatrixFin):
    """Invariant factor decomposition of F^n under ``A``.

    Returns a list of ``(invariant_factor, generator)`` with generator a coordinate
    list; the cyclic subspaces spanned by ``A^k g`` (k < deg) form a direct sum
    decomposition of F^n and the factors divide one another in order.
    """
    f = A.field
    n = A.n
    diag, Pinv = _smith_with_left_inverse(f, A)
    powers = [MatrixFin.identity(f, n)]
    for _ in range(n):
        powers.append(powers[-1] @ A)
    out = []
    for k, d in enumerate(diag):
        if d.degree < 1:
            continue
        g = [f.zero] * n
        for i in range(n):
            p = Pinv[i][k]
            for deg, c in enumerate(p.coeffs):
                if c == 0:
                    continue
                col = powers[deg].column(i) if deg < len(powers) else None
                if col is None:
                    raise AssertionError("polynomial degree exceeds matrix size")
                g = [f.add(x, f.mul(c, y)) for x, y in zip(g, col)]
        out.append((d, g))
    return out
