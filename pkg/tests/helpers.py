"""Shared oracles and generators for tests and the acceptance run."""
import itertools
import json
import random
from pathlib import Path

from quadsum.algebra import GF, target_from_roots
from quadsum.corpus import idempotent, square_zero
from quadsum.errors import ConditionViolated, SearchFailed
from quadsum.finite_dim import annihilated_matrices, lambda_stable_search
from quadsum.linalg import MatrixFin, Vec
from quadsum.operators import FiniteRankPatch, ScalarIdentity, Scale


def block_quadratic(f, root, block, X):
    """root * id off the block and the matrix X on e_block, e_block+1, ..."""
    cols = {}
    n = len(X)
    for j in range(n):
        cols[block + j] = Vec(f, {block + i: int(X[i][j]) for i in range(n) if int(X[i][j]) % f.characteristic})
    return FiniteRankPatch(ScalarIdentity(f, root), cols)


def random_closure_case(rng: random.Random, f, n=3):
    """``(W, (a, b, c), polys)``: a + b + c = lam id + w of finite rank and W contains im w.

    Each of a, b, c is a root times the identity off one block of size n and a
    random matrix annihilated by its quadratic on that block.
    """
    p = f.characteristic

    def pick(r, s, block):
        t = target_from_roots(f, r, s)
        c = t.monic.coeffs
        mats = annihilated_matrices(p, n, int(c[0]), int(c[1]))
        X = mats[rng.randrange(len(mats))]
        return block_quadratic(f, f.coerce(r), block, X.tolist()), t.monic

    r, s = rng.randrange(p), rng.randrange(p)
    a, pa = pick(r, s, rng.randrange(8))
    if rng.random() < 0.5:
        # b = -a cancels a, so w comes from c alone and im w is small
        b = Scale(f.neg(f.one), a)
        pb = target_from_roots(f, f.neg(f.coerce(r)), f.neg(f.coerce(s))).monic
    else:
        b, pb = pick(rng.randrange(p), rng.randrange(p), rng.randrange(8))
    c, pc = pick(rng.randrange(p), rng.randrange(p), rng.randrange(8))
    ops, polys = [a, b, c], [pa, pb, pc]
    # columns of w = a + b + c - lam id span im w; they live on the blocks
    lam = f.zero
    for op in ops:
        lam = f.add(lam, op.column(100)[100])  # every block ends before e_100
    W = []
    for j in range(n + 8):
        col = ops[0].column(j) + ops[1].column(j) + ops[2].column(j) - Vec.e(f, j).scale(lam)
        if col:
            W.append(col)
    W += [Vec.e(f, rng.randrange(12)) for _ in range(rng.randrange(1, 3))]
    return W, tuple(ops), polys


# ---------------------------------------------------------------------------
# plain checks by column reads


def apply_plain(op, x: Vec) -> Vec:
    acc = Vec.zero(op.field)
    for m, c in x.data.items():
        acc = acc + op.column(m).scale(c)
    return acc


def killed_by_roots(op, r, s, prefix) -> bool:
    """(op - r)(op - s) e_n = 0 for n < prefix."""
    f = op.field
    for n in range(prefix):
        y = op.column(n) - Vec.e(f, n).scale(s)
        if apply_plain(op, y) - y.scale(r):
            return False
    return True


def three_sum_plain(u, summands, targets, prefix) -> bool:
    for n in range(prefix):
        if summands[0].column(n) + summands[1].column(n) + summands[2].column(n) != u.column(n):
            return False
    return all(killed_by_roots(s, t.x.value, t.y.value, prefix) for s, t in zip(summands, targets))


# ---------------------------------------------------------------------------
# scalar oracle


def brute(f, lam, roots):
    """Independent root-sum test over the 8 choices."""
    lam = f.coerce(lam)
    for i, j, k in itertools.product(range(2), repeat=3):
        total = f.add(f.add(f.coerce(roots[0][i]), f.coerce(roots[1][j])), f.coerce(roots[2][k]))
        if total == lam:
            return True
    return False


def root_pairs(f):
    els = list(f.elements())
    return [(x, y) for x in els for y in els if x <= y]


# ---------------------------------------------------------------------------
# square-zero enumeration by plain loops


def plain_annihilated(p, n, c0, c1):
    out = []
    for entries in itertools.product(range(p), repeat=n * n):
        X = [entries[i * n:(i + 1) * n] for i in range(n)]
        ok = True
        for i in range(n):
            for j in range(n):
                s = sum(X[i][k] * X[k][j] for k in range(n)) + c1 * X[i][j] + (c0 if i == j else 0)
                if s % p:
                    ok = False
        if ok:
            out.append(tuple(entries))
    return out


# ---------------------------------------------------------------------------
# golden lambda-stable corpus (seed 0)


GOLDEN = Path(__file__).parent / "golden" / "lambda_stable_seed0.json"
F2, F3 = GF(2), GF(3)

# lines printed by the acceptance run, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def golden_corpus(seed=0):
    rng = random.Random(seed)
    out = []
    for i in range(10):
        f = (F2, F3)[i % 2]
        n = rng.randint(1, 2)
        A = [[rng.randrange(f.characteristic) for _ in range(n)] for _ in range(n)]
        lam = rng.randrange(f.characteristic)
        kind = rng.choice(["sz", "idem"]) if f is F2 else "sz"
        out.append((f, A, lam, kind))
    return out


def run_golden(f, A, lam, kind):
    """``(json row, witness or None)``; witnesses are re-checked by plain arithmetic."""
    targets = square_zero(f) if kind == "sz" else idempotent(f)
    row = {"field": str(f), "A": A, "lam": lam, "targets": kind}
    try:
        w = lambda_stable_search(MatrixFin.raw(f, A), lam, targets, q_max=2)
    except ConditionViolated as exc:
        return {**row, "outcome": "refused", "reason": list(exc.conditions)}, None
    except SearchFailed:
        return {**row, "outcome": "search_failed"}, None
    p, n = f.characteristic, len(A)
    M = MatrixFin.raw(f, [[((A[i][j] if i < n and j < n else 0) + (lam if i == j else 0)) % p
                           for j in range(n + w.q)] for i in range(n + w.q)])
    assert w.matrices[0] + w.matrices[1] + w.matrices[2] == M
    assert all(X.poly_eval(t.monic).is_zero() for X, t in zip(w.matrices, targets))
    return {**row, "outcome": "witness", "q": w.q}, w


def golden_rows():
    return [run_golden(*c)[0] for c in golden_corpus()]


def golden_expected():
    return json.loads(GOLDEN.read_text())
