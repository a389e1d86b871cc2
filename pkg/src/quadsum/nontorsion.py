"""Non-torsion modules: free part, the W (+) H splitting, sewing and assembly.

Structured operators expose their free part as whole direct summands (a shift
summand, possibly recentred or rescaled), so the free submodule read off the
tree is quasi-maximal and has a module complement T.  The splitting
``V = W (+) H`` then comes from splitting T itself: a finite T by its rational
canonical form, an infinite T through its dominant eigenvalue.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from .errors import CapExceeded, PreconditionUnverifiable, SpanGapOnPrefix
from .linalg import LazyBasis, MatrixFin, Vec, axpy, cyclic_decomposition
from .operators import (
    YES,
    BasisOperator,
    Difference,
    DirectSum,
    Layout,
    Operator,
    Scale,
    ScalarIdentity,
    Shift,
    Sum,
    _is_exact_scalar,
    apply,
)
from .torsion import split_dominant


# ---------------------------------------------------------------------------
# reading the free part off the tree


@dataclass
class Piece:
    """A torsion summand: ``op`` on local indices, ``embed`` to global ones; ``dim`` None if infinite."""

    op: Operator
    embed: Callable[[int], int]
    dim: Optional[int] = None


def _moved(p: Optional[Piece], fn) -> Optional[Piece]:
    if p is None:
        return None
    inner = p.embed
    return Piece(p.op, lambda n: fn(inner(n)), p.dim)


def _join(p: Optional[Piece], q: Optional[Piece]) -> Optional[Piece]:
    if p is None:
        return q
    if q is None:
        return p
    if p.dim is None and q.dim is not None:
        p, q = q, p
    if p.dim is not None:
        k = p.dim
        pe, qe = p.embed, q.embed
        dim = None if q.dim is None else k + q.dim
        return Piece(DirectSum(p.op, q.op, Layout("prefix", k)),
                     lambda n: pe(n) if n < k else qe(n - k), dim)
    pe, qe = p.embed, q.embed
    return Piece(DirectSum(p.op, q.op, "interleave"),
                 lambda n: pe(n // 2) if n % 2 == 0 else qe(n // 2))


def _with_scalar(p: Optional[Piece], c) -> Optional[Piece]:
    if p is None:
        return None
    return Piece(Sum(p.op, ScalarIdentity(p.op.field, c)), p.embed, p.dim)


def free_torsion_split(u: Operator):
    """``(free generator indices, torsion piece or None)`` with V = (+) F[t]e_g (+) T."""
    if isinstance(u, Shift):
        return [0], None
    info = u._info()
    if info.torsion == YES:
        return [], Piece(u, lambda n: n)
    if isinstance(u, DirectSum):
        L = u.layout
        if L.kind == "prefix":
            lf, lp = [], Piece(u.left, lambda n: n, L.k) if L.k else None
        else:
            lf, lp = free_torsion_split(u.left)
        rf, rp = free_torsion_split(u.right)
        gens = [L.left(g) for g in lf] + [L.right(g) for g in rf]
        return sorted(gens), _join(_moved(lp, L.left), _moved(rp, L.right))
    if isinstance(u, (Sum, Difference)):
        ia, ib = u.a._info(), u.b._info()
        sign = u.field.one if isinstance(u, Sum) else u.field.neg(u.field.one)
        if _is_exact_scalar(ib):
            gens, p = free_torsion_split(u.a)
            return gens, _with_scalar(p, u.field.mul(sign, ib.dominant))
        if _is_exact_scalar(ia) and isinstance(u, Sum):
            gens, p = free_torsion_split(u.b)
            return gens, _with_scalar(p, ia.dominant)
    if isinstance(u, Scale) and u.c != 0:
        gens, p = free_torsion_split(u.op)
        if p is not None:
            p = Piece(Scale(u.c, p.op), p.embed, p.dim)
        return gens, p
    raise PreconditionUnverifiable(f"free part of a {u.kind} node is not readable from its structure")


def quasi_maximal_free(u: Operator) -> list:
    """Generators of a free submodule with torsion quotient, read from the structure tree."""
    gens, _ = free_torsion_split(u)
    if not gens:
        raise PreconditionUnverifiable("the operator has no structural free part")
    return [Vec.e(u.field, g) for g in gens]


# ---------------------------------------------------------------------------
# the W (+) H splitting


@dataclass
class HBasis:
    """Basis of H: the listed vectors, then (if infinite) ``tail()``."""

    extra: list
    tail: Optional[Callable[[], Iterator[Vec]]] = None

    @property
    def dim(self) -> Optional[int]:
        return len(self.extra) if self.tail is None else None

    def __iter__(self):
        yield from self.extra
        if self.tail is not None:
            yield from self.tail()


@dataclass
class NonTorsionSplit:
    """V = W (+) H with F ⊆ W free, W/F spanned by the chains of ``G`` and u = lam on H."""

    F_generators: list
    G: list  # (vector, dim) with dim >= 2
    H: HBasis
    lam: object

    @property
    def W_is_F(self) -> bool:
        return not self.G


def _finite_matrix(p: Piece) -> MatrixFin:
    f = p.op.field
    cols = []
    for n in range(p.dim):
        c = p.op.column(n)
        if c and c.max_index() >= p.dim:
            raise PreconditionUnverifiable("finite summand is not invariant")
        cols.append([c[i] for i in range(p.dim)])
    return MatrixFin.from_columns(f, cols, p.dim)


def nontorsion_decompose(u: Operator) -> NonTorsionSplit:
    f = u.field
    gens, piece = free_torsion_split(u)
    if not gens:
        raise PreconditionUnverifiable("no structural free part")
    F = [Vec.e(f, g) for g in gens]
    if piece is None:
        return NonTorsionSplit(F, [], HBasis([]), f.zero)
    emb = piece.embed
    if piece.dim is not None:
        E, G, mu = [], [], None
        if piece.dim:
            for d, g in cyclic_decomposition(_finite_matrix(piece)):
                vec = Vec.raw(f, {emb(k): c for k, c in enumerate(g) if c != 0})
                if d.degree == 1:
                    mu = f.neg(d.coeffs[0])
                    E.append(vec)
                else:
                    G.append((vec, d.degree))
        return NonTorsionSplit(F, G, HBasis(E), mu if mu is not None else f.zero)
    try:
        ds = split_dominant(piece.op)
    except PreconditionUnverifiable as exc:
        raise PreconditionUnverifiable("torsion complement is infinite without a dominant eigenvalue") from exc
    G = [(g.remap(emb), n) for g, n in ds.summands]
    excluded = ds.excluded

    def tail():
        n = 0
        while True:
            if n not in excluded:
                yield Vec.e(f, emb(n))
            n += 1

    return NonTorsionSplit(F, G, HBasis([h.remap(emb) for h in ds.h_extra], tail), ds.lam)


# ---------------------------------------------------------------------------
# sewing


@dataclass(frozen=True)
class SewingTable:
    """Column rules of the sewing perturbation on the labels ("e", n) and ("f", n).

    ``p`` is dim V2 (None when infinite).  On e_k with k >= 3p the rule is zero.
    """

    a: object
    p: Optional[int]
    field: object = field(compare=False)

    @property
    def case(self):
        return ("a_zero" if self.a == 0 else "a_nonzero",
                "V2_infinite" if self.p is None else f"V2_finite({self.p})")

    def rule(self, label) -> dict:
        f = self.field
        one, neg = f.one, f.neg(f.one)
        kind, n = label
        if kind == "f":
            if self.a == 0:
                return {("e", 3 * n + 1): neg, ("f", n): one}
            return {("e", 3 * n + 1): f.neg(self.a), ("f", n): self.a}
        q, r = divmod(n, 3)
        if self.p is not None and q >= self.p:
            return {}
        if r == 0:
            return {("e", n + 1): one, ("f", q): neg}
        if r == 1 and self.a == 0:
            return {("e", n): neg, ("f", q): one}
        return {}


def _round_robin(streams) -> Iterator:
    live = [iter(s) for s in streams]
    while live:
        nxt = []
        for s in live:
            item = next(s, None)
            if item is not None:
                yield item
                nxt.append(s)
        live = nxt


def _chain(u: Operator, x: Vec, tag, shift=None) -> Iterator:
    """``(tag + (k,), w^k x)`` for w = u - shift (shift None means w = u)."""
    k = 0
    while True:
        yield tag + (k,), x
        y = apply(u, x)
        if shift is not None and shift != 0:
            y = y - shift * x
        x = y
        k += 1


def _sewing_items(u, x0, H: HBasis, lam, recenter=False):
    f = u.field
    es = _chain(u, x0, ("e",), f.coerce(lam) if recenter else None)
    fs = ((("f", n), h) for n, h in enumerate(H))
    return es, fs


def sewing(u: Operator, x: Vec, H: HBasis, lam, a, budget: int = 2_000_000,
           recenter: bool = False) -> BasisOperator:
    """The sewing perturbation on F[t]x (+) H, where u = lam on H.

    With ``recenter`` the rules are applied to u - lam, with e_n = (u - lam)^n x;
    u - v and u - lam - v differ by a scalar, so the orbit of x spans the same
    space.  Without it e_n = u^n x: the inductive span argument only ever adds
    lam f_n, which is already in the span, so the same tables work and the
    basis stays as sparse as u itself.
    Vectors outside F[t]x (+) H are not in the basis, so the result is only
    meaningful when that sum is all of V; ``assemble_a_elementary`` embeds it.
    """
    f = u.field
    table = SewingTable(f.coerce(a), H.dim, f)
    es, fs = _sewing_items(u, x, H, lam, recenter)
    basis = LazyBasis(f, _round_robin([es, fs]), budget=budget)
    return BasisOperator(f, basis, _table_image(f, basis, table.rule))


def _table_image(f, basis, rule):
    def image(label):
        acc: dict = {}
        for lab, c in rule(label).items():
            axpy(f, acc, c, basis.vector(lab).data)
        return Vec.raw(f, acc)

    return image


# ---------------------------------------------------------------------------
# final assembly


@dataclass
class AElementary:
    """v with v^2 = a v and u - v elementary with chain generators ``generators``."""

    v: Operator
    generators: list
    a: object
    d: int = 0
    M: int = 0


def _coords_or_fail(basis: LazyBasis, vec: Vec, what: str) -> dict:
    try:
        return basis.coords(vec)
    except (CapExceeded, SpanGapOnPrefix) as exc:
        raise PreconditionUnverifiable(f"{what} is not in the expected span") from exc


def assemble_a_elementary(u: Operator, split: NonTorsionSplit, a, budget: int = 100_000,
                          recenter: bool = False) -> AElementary:
    f = u.field
    a = f.coerce(a)
    x, others = split.F_generators[0], split.F_generators[1:]
    lam = split.lam
    H = split.H
    if split.W_is_F:
        if H.dim == 0:
            return AElementary(ScalarIdentity(f, 0), list(split.F_generators), a)
        table = SewingTable(a, H.dim, f)
        es, fs = _sewing_items(u, x, H, lam, recenter)
        streams = [es, fs] + [_chain(u, g, ("F", j)) for j, g in enumerate(others)]
        basis = LazyBasis(f, _round_robin(streams), budget=2_000_000)

        def rule(label):
            return table.rule(label) if label[0] in ("e", "f") else {}

        v = BasisOperator(f, basis, _table_image(f, basis, rule))
        return AElementary(v, [x] + list(others), a)

    # W != F: the chains of G stratify W/F with every dimension >= 2
    G = split.G
    M = sum(n for _, n in G)
    chains = []
    for g, n in G:
        vecs = [g]
        for _ in range(n):
            vecs.append(apply(u, vecs[-1]))
        chains.append(vecs)  # n + 1 vectors, the last is u^n x_i

    def free_streams():
        return [_chain(u, x, ("x",))] + [_chain(u, g, ("F", j)) for j, g in enumerate(others)]

    # p_i: u^{n_i} x_i = p_i(t) x  mod F' + the chains up to x_i
    m = 0
    for i, (g, n) in enumerate(G):
        fin = [(("B", j, k), chains[j][k]) for j in range(i + 1) for k in range(G[j][1])]
        basis = LazyBasis(f, _concat(fin, _round_robin(free_streams())), budget=budget)
        co = _coords_or_fail(basis, chains[i][n], f"u^{n}(x_{i + 1})")
        deg = max((lab[1] for lab in co if lab[0] == "x" and co[lab] != 0), default=0)
        m = max(m, deg)
    d = M + m

    # B: all chain vectors except the last vector of the last chain
    B = []
    for j, (g, n) in enumerate(G):
        top = n - 1 if j < len(G) - 1 else n - 2
        for k in range(top + 1):
            B.append((("B", j, k), chains[j][k]))
    xs = []
    xk = x
    for k in range(d):
        xs.append((("x", k), xk))
        xk = apply(u, xk)

    def f_rule(label) -> dict:
        # images as label combinations; unlisted labels map to 0
        if label[0] == "B":
            _, j, k = label
            if j < len(G) - 1 and k == G[j][1] - 1:
                return {label: a, ("B", j + 1, 0): f.neg(f.one)}
        return {}

    def f_apply(basis, vec, what):
        acc: dict = {}
        for lab, c in _coords_or_fail(basis, vec, what).items():
            for lab2, c2 in f_rule(lab).items():
                axpy(f, acc, f.mul(c, c2), basis.vector(lab2).data)
        return Vec.raw(f, acc)

    fbasis = LazyBasis(f, _concat(B + xs, _round_robin([_chain(u, g, ("F", j)) for j, g in enumerate(others)])),
                       budget=budget)
    ys = [chains[0][0]]
    for k in range(1, M):
        y = ys[-1]
        ys.append(apply(u, y) - f_apply(fbasis, y, f"y_{k}"))
    yM = ys[-1]

    # u(y_M) = z + z' with z in F_{d-1}[t]x (+) F' and z' in span(y_1..y_M)
    ybasis = LazyBasis(
        f,
        _concat([(("y", k), y) for k, y in enumerate(ys)] + xs,
                _round_robin([_chain(u, g, ("F", j)) for j, g in enumerate(others)])),
        budget=budget,
    )
    co = _coords_or_fail(ybasis, apply(u, yM), "u(y_M)")
    z: dict = {}
    for lab, c in co.items():
        if lab[0] != "y":
            axpy(f, z, c, ybasis.vector(lab).data)
    f_yM = a * yM + Vec.raw(f, z) - x

    # V = F_{d-1}[t]x (+) V' (+) G_2 (+) F' with V' = F[t]u^d x (+) H
    table = SewingTable(a, H.dim, f)
    x0 = xk  # u^d x
    es, fs = _sewing_items(u, x0, H, lam, recenter)
    finite = B + [(("yM",), yM)] + xs
    streams = [es, fs] + [_chain(u, g, ("F", j)) for j, g in enumerate(others)]
    basis = LazyBasis(f, _concat(finite, _round_robin(streams)), budget=2_000_000)
    fixed = {("yM",): f_yM}

    def image(label):
        if label in fixed:
            return fixed[label]
        if label[0] in ("e", "f"):
            rule = table.rule(label)
        else:
            rule = f_rule(label)
        acc: dict = {}
        for lab, c in rule.items():
            axpy(f, acc, c, basis.vector(lab).data)
        return Vec.raw(f, acc)

    v = BasisOperator(f, basis, image)
    return AElementary(v, [ys[0]] + list(others), a, d, M)


def _concat(finite, tail) -> Iterator:
    yield from finite
    yield from tail
