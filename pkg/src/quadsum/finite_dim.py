"""Finite-dimensional support: invariant closures, the class [w], lambda-stable search.

The lambda-stable search is a bounded exhaustive backend over small prime
fields.  A failed search proves nothing; callers report it as unresolved.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .algebra import FieldSpec, QuadraticTarget, Scalar, same_field
from .certificate import ThreeSumCertificate, check_three_sum
from .errors import ConditionViolated, NotQuadratic, PreconditionUnverifiable, SearchFailed
from .linalg import Echelon, LazyBasis, MatrixFin, Vec, axpy, nullspace
from .operators import BasisOperator, Operator, apply, deviation_columns, eval_poly
from .scalar_sums import (
    ROOT_SUM_FAILS,
    TRACE_FAILS,
    scalar_is_sum,
    trace_condition,
    two_by_two_identity_triple,
)


# ---------------------------------------------------------------------------
# invariant closure


def invariant_closure(W: Sequence[Vec], a: Operator, b: Operator, c: Operator, polys=None) -> list:
    """Basis of W + a(W) + b(W) + c(W) + sum of (ef)(W) over (e, f) in {a, b, c}^2.

    ``polys`` optionally declares the annihilating quadratics; each must have
    degree 2 and kill its operator on the vectors involved.
    """
    ops = (a, b, c)
    if polys is not None:
        for p, op in zip(polys, ops):
            if p.degree != 2:
                raise NotQuadratic(f"declared polynomial {p} has degree {p.degree}")
            for x in W:
                if eval_poly(p, op, x):
                    raise NotQuadratic(f"declared polynomial does not annihilate the {op.kind} operator on W")
    f = a.field
    ech = Echelon(f)
    out = []

    def add(v):
        if ech.add(v):
            out.append(v)

    for x in W:
        add(x)
    for x in W:
        images = [apply(e, x) for e in ops]
        for y in images:
            add(y)
        for e in ops:
            for y in images:
                add(apply(e, y))
    return out


def is_stable(basis: Sequence[Vec], ops) -> bool:
    if not basis:
        return True
    ech = Echelon(basis[0].field)
    for v in basis:
        ech.add(v)
    return all(ech.contains(apply(op, v)) for op in ops for v in basis)


# ---------------------------------------------------------------------------
# the class [w]


@dataclass
class FiniteRankClass:
    """``representative`` is w restricted to a minimal W (basis ``basis``); n_of_w = dim W."""

    lam: Scalar
    representative: MatrixFin
    basis: list
    support: tuple

    @property
    def n_of_w(self) -> int:
        return len(self.basis)


def _w_column(u: Operator, lam, n) -> Vec:
    return u.column(n) - Vec.e(u.field, n).scale(lam)


def _w_apply(u: Operator, lam, x: Vec) -> Vec:
    return apply(u, x) - x.scale(lam)


def finite_rank_class(u: Operator):
    """``(lam, FiniteRankClass)`` for u = lam id + w with w of finite rank.

    W = im w + span of a few e_s (s in the deviation set S) chosen so that
    w(W) = im w; this has the minimal dimension 2 rk w - rk w^2.
    """
    dev = deviation_columns(u)
    if dev is None:
        raise PreconditionUnverifiable("u is not structurally lam*id + finite rank")
    lam, S = dev
    f = u.field
    S = sorted(S)
    img = Echelon(f)
    im_basis = []
    for s in S:
        c = _w_column(u, lam, s)
        if c and img.add(c):
            im_basis.append(c)
    reach = Echelon(f)
    for v in im_basis:
        reach.add(_w_apply(u, lam, v))
    extra = []
    for s in S:
        c = _w_column(u, lam, s)
        if c and reach.add(c):
            extra.append(Vec.e(f, s))
    basis = _tidy_basis(f, extra + im_basis)
    support = sorted(set(S).union(*(v.data for v in basis)) if basis else set(S))
    rep = _matrix_on(f, basis, lambda v: _w_apply(u, lam, v))
    return Scalar(lam, f), FiniteRankClass(Scalar(lam, f), rep, basis, tuple(support))


def _tidy_basis(f, basis):
    """Unit vectors in index order when the span is a coordinate subspace."""
    ech = Echelon(f)
    for v in basis:
        ech.add(v)
    idx = sorted(ech.rows)
    if all(ech.contains(Vec.e(f, i)) for i in idx):
        return [Vec.e(f, i) for i in idx]
    return list(basis)


def _matrix_on(f, basis, op) -> MatrixFin:
    """Matrix of ``op`` restricted to the invariant span of ``basis``."""
    n = len(basis)
    ech = Echelon(f, track=True)
    for k, v in enumerate(basis):
        ech.add(v, k)
    cols = []
    for v in basis:
        co = ech.coordinates(op(v))
        if co is None:
            raise PreconditionUnverifiable("subspace is not invariant")
        cols.append([co.get(k, f.zero) for k in range(n)])
    return MatrixFin.from_columns(f, cols, n)


# ---------------------------------------------------------------------------
# exhaustive enumeration over small prime fields


def _poly_ints(t: QuadraticTarget):
    c = t.monic.coeffs
    return int(c[0]), int(c[1])


@lru_cache(maxsize=None)
def annihilated_matrices(p: int, n: int, c0: int, c1: int) -> np.ndarray:
    """All n x n matrices X over F_p with X^2 + c1 X + c0 I = 0, as an (m, n, n) array.

    Full enumeration of F_p^{n x n} in chunks; rows of the result are in
    lexicographic order of the flattened entries.
    """
    total = p ** (n * n)
    chunk = 1 << 18
    eye = np.eye(n, dtype=np.int64)
    found = []
    weights = p ** np.arange(n * n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
        digits = (codes[:, None] // weights[None, :]) % p
        X = digits.reshape(-1, n, n)
        R = (X @ X + c1 * X + c0 * eye) % p
        keep = ~R.reshape(len(X), -1).any(axis=1)
        found.append(X[keep])
    return np.concatenate(found) if found else np.zeros((0, n, n), dtype=np.int64)


def _to_np(M: MatrixFin) -> np.ndarray:
    return np.array([[int(x) for x in r] for r in M.rows], dtype=np.int64).reshape(M.n, M.n)


def _from_np(f: FieldSpec, X: np.ndarray) -> MatrixFin:
    return MatrixFin.raw(f, [[int(x) for x in r] for r in X])


def find_triple(f: FieldSpec, M: MatrixFin, targets):
    """First (M1, M2, M3) with p_k(M_k) = 0 and M1 + M2 + M3 = M, or None."""
    p = f.characteristic
    n = M.n
    if n == 0:
        z = MatrixFin.zeros(f, 0)
        return (z, z, z)
    S1 = annihilated_matrices(p, n, *_poly_ints(targets[0]))
    S2 = annihilated_matrices(p, n, *_poly_ints(targets[1]))
    c0, c1 = _poly_ints(targets[2])
    eye = np.eye(n, dtype=np.int64)
    Mn = _to_np(M)
    for X in S1:
        Z = (Mn - X - S2) % p
        R = (Z @ Z + c1 * Z + c0 * eye) % p
        ok = np.flatnonzero(~R.reshape(len(Z), -1).any(axis=1))
        if len(ok):
            Y = S2[ok[0]]
            return _from_np(f, X), _from_np(f, Y), _from_np(f, (Mn - X - Y) % p)
    return None


def _structured_triple(f: FieldSpec, M: MatrixFin, targets):
    """Witnesses that need no enumeration: (M, 0, 0) when p1(M) = 0 and 0 kills p2, p3."""
    zero = MatrixFin.zeros(f, M.n)
    if all(t.monic(0).value == 0 for t in targets[1:]) and M.poly_eval(targets[0].monic).is_zero():
        return (M, zero, zero)
    return None


@dataclass
class StableWitness:
    q: int
    matrices: tuple  # three MatrixFin of size n + q
    lam: Scalar


def padded(A: MatrixFin, lam, q: int) -> MatrixFin:
    """(A + lam I_n) (+) lam I_q."""
    f = A.field
    n = A.n
    rows = []
    for i in range(n + q):
        row = []
        for j in range(n + q):
            x = A[i, j] if i < n and j < n else f.zero
            if i == j:
                x = f.add(x, lam)
            row.append(x)
        rows.append(row)
    return MatrixFin.raw(f, rows)


def check_lambda(lam: Scalar, targets):
    if scalar_is_sum(lam, targets) is None and not trace_condition(lam, targets):
        raise ConditionViolated(f"{ROOT_SUM_FAILS} and {TRACE_FAILS}", (ROOT_SUM_FAILS, TRACE_FAILS))


FINITE_RANK_NONZERO_TRACE = "finite rank and non-zero trace"
FINITE_RANK_TRACE_NOT_0_OR_LAM = "u−λ·id has finite rank and trace different from 0 and λ"
FINITE_RANK_TRACE_NOT_0_OR_1 = "u−λ·id has finite rank and trace outside {0,1}"


def _all_equal(targets, coeffs) -> bool:
    return all(t.monic.coeffs == tuple(t.field.coerce(c) for c in coeffs) for t in targets)


def trace_obstruction(trace_w, lam, targets) -> Optional[str]:
    """Trace refusals for u = lam id + w, w of finite rank, for the two pinned families.

    Square-zero matrices have trace 0, so tr w + (n + q) lam = 0 for some q;
    idempotent matrices in characteristic 2 have trace in {0, 1}.
    """
    f = same_field(targets)
    tw, lam = f.coerce(trace_w), f.coerce(lam)
    if _all_equal(targets, (0, 0, 1)):
        if f.characteristic == 2:
            return None if tw in (f.zero, lam) else FINITE_RANK_TRACE_NOT_0_OR_LAM
        if lam == 0 and tw != 0:
            return FINITE_RANK_NONZERO_TRACE
    if f.characteristic == 2 and _all_equal(targets, (0, 1, 1)):
        return None  # every element of F_2 lies in {0, 1}
    return None


EXHAUSTIVE_MAX = {2: 4, 3: 3}


def lambda_stable_search(A: MatrixFin, lam, targets, q_max: int = 4) -> StableWitness:
    """Smallest q <= q_max for which (A + lam I) (+) lam I_q is a (p1,p2,p3)-sum.

    Over F_2 / F_3 every size up to EXHAUSTIVE_MAX is enumerated; elsewhere only
    structured witnesses are tried.  Raises SearchFailed with the q range covered.
    """
    f = same_field(targets)
    lam = f.coerce(lam)
    check_lambda(Scalar(lam, f), targets)
    reason = trace_obstruction(A.trace(), lam, targets)
    if reason is not None:
        raise ConditionViolated(reason, (reason,))
    limit = EXHAUSTIVE_MAX.get(f.characteristic, 0)
    covered = []
    for q in range(q_max + 1):
        M = padded(A, lam, q)
        found = _structured_triple(f, M, targets)
        if found is None and M.n <= limit:
            found = find_triple(f, M, targets)
            covered.append(q)
        if found is not None:
            for X, t in zip(found, targets):
                assert X.poly_eval(t.monic).is_zero()
            assert found[0] + found[1] + found[2] == M
            return StableWitness(q, found, Scalar(lam, f))
    where = f"exhaustively for q in {covered}" if covered else "with structured witnesses only"
    raise SearchFailed(f"no witness for q <= {q_max} ({where})")


# ---------------------------------------------------------------------------
# finite-rank decomposition


def _kernel_complement(u, lam, cls: FiniteRankClass) -> list:
    """Vectors of ker w inside span(support) completing the basis of W to that span."""
    f = u.field
    T = list(cls.support)
    pos = {i: k for k, i in enumerate(T)}
    rows = [[f.zero] * len(T) for _ in range(len(T))]
    for k, i in enumerate(T):
        for j, c in _w_column(u, lam, i).data.items():
            if j not in pos:
                raise PreconditionUnverifiable("support is not invariant")
            rows[pos[j]][k] = c
    ech = Echelon(f)
    for v in cls.basis:
        ech.add(v)
    out = []
    for vec in nullspace(f, rows, len(T)):
        v = Vec.raw(f, {T[k]: c for k, c in enumerate(vec) if c != 0})
        if ech.add(v):
            out.append(v)
    return out


def finite_rank_decompose(u: Operator, targets, q_max: int = 4, prefix: int = 256) -> ThreeSumCertificate:
    f = same_field(targets)
    lam_s, cls = finite_rank_class(u)
    lam = lam_s.value
    check_lambda(lam_s, targets)
    reason = trace_obstruction(cls.representative.trace(), lam, targets)
    if reason is not None:
        raise ConditionViolated(reason, (reason,))
    wit = lambda_stable_search(cls.representative, lam, targets, q_max)
    kc = _kernel_complement(u, lam, cls)
    support = set(cls.support)
    head = [(("W", i), v) for i, v in enumerate(cls.basis)]

    def rest():
        yield from kc
        n = 0
        while True:
            if n not in support:
                yield Vec.e(f, n)
            n += 1

    stream = rest()
    q_vecs = [next(stream) for _ in range(wit.q)]
    head += [(("W", len(cls.basis) + j), v) for j, v in enumerate(q_vecs)]
    size = len(head)

    def source():
        yield from head
        tail = rest()
        for _ in range(wit.q):
            next(tail)
        for m, v in enumerate(tail):
            yield ("R", m), v

    scalar = scalar_is_sum(lam_s, targets)
    tiles = None if scalar is not None else two_by_two_identity_triple(lam_s, targets)

    summands = []
    for k in range(3):
        basis = LazyBasis(f, source(), budget=2_000_000)
        summands.append(BasisOperator(f, basis, _block_image(f, basis, wit.matrices[k], size,
                                                            scalar, tiles, k)))
    rep = check_three_sum(u, summands, targets, prefix)
    if not rep.ok:
        raise PreconditionUnverifiable(f"finite-rank assembly failed verification: {rep.detail}")
    return ThreeSumCertificate(
        tuple(summands), tuple(targets), prefix, "FiniteRank",
        {"lam": f.fmt(lam), "n_of_w": cls.n_of_w, "q": wit.q,
         "witness": [m.to_json() for m in wit.matrices],
         "representative": cls.representative.to_json(),
         "scalar_part": "witness" if scalar is not None else "tiled"},
    )


def _block_image(f, basis, M: MatrixFin, size, scalar, tiles, k):
    def image(label):
        acc: dict = {}
        if label[0] == "W":
            j = label[1]
            for i in range(size):
                c = M[i, j]
                if c != 0:
                    axpy(f, acc, c, basis.vector(("W", i)).data)
            return Vec.raw(f, acc)
        m = label[1]
        if scalar is not None:
            return basis.vector(label).scale(scalar.parts[k].value)
        T = (tiles.A, tiles.B, tiles.C)[k]
        base, r = m - m % 2, m % 2
        for i in range(2):
            c = T[i, r]
            if c != 0:
                axpy(f, acc, c, basis.vector(("R", base + i)).data)
        return Vec.raw(f, acc)

    return image
