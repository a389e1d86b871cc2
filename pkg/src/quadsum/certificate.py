"""The three-summand certificate and its independent re-verification."""
from __future__ import annotations

from dataclasses import dataclass, field

from .linalg import Vec
from .operators import Operator, Report, eval_poly

FORMAT_VERSION = 1


@dataclass
class ThreeSumCertificate:
    summands: tuple
    targets: tuple
    verified_prefix: int
    route: str
    sub: dict = field(default_factory=dict)


def check_three_sum(u: Operator, summands, targets, prefix: int, start: int = 0) -> Report:
    """Exact check of ``u = sum`` and ``p_k(summand_k) = 0`` on e_start..e_{prefix-1}."""
    f = u.field
    for n in range(start, prefix):
        e = Vec.e(f, n)
        total = Vec.zero(f)
        for s in summands:
            total = total + s.column(n)
        if total != u.column(n):
            return Report(False, n, n, f"sum identity fails on column {n}")
        for k, (s, t) in enumerate(zip(summands, targets)):
            r = eval_poly(t.monic, s, e)
            if r:
                return Report(False, n, n, f"p{k + 1}(u{k + 1}) is non-zero on column {n}")
    return Report(True, prefix)
