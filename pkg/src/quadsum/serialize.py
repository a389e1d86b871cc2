"""Operator files and certificate files (JSON-compatible, exact)."""
from __future__ import annotations

import json
from typing import Optional

from .algebra import QQ, GF, FieldSpec, Polynomial, split_quadratic
from .certificate import FORMAT_VERSION, ThreeSumCertificate
from .errors import FormatError, QuadsumError
from .linalg import MatrixFin, Vec
from .operators import (
    BandedPeriodic,
    CompanionBlockSum,
    Compose,
    Difference,
    DiagonalPeriodic,
    DirectSum,
    DownShift,
    FiniteRankPatch,
    Layout,
    Operator,
    RuleTable,
    ScalarIdentity,
    Scale,
    Shift,
    Sum,
)


class ColumnTable(Operator):
    """Explicitly listed columns; any other column is outside the table."""

    kind = "column_table"

    def __init__(self, field, columns: dict):
        super().__init__(field)
        self.columns = {int(n): v if isinstance(v, Vec) else Vec.from_json(field, v) for n, v in columns.items()}

    def _column(self, n):
        v = self.columns.get(n)
        if v is None:
            raise FormatError(f"column {n} is not recorded in the certificate")
        return v

    def to_json(self):
        return {"type": "column_table", "columns": [[n, v.to_json()] for n, v in sorted(self.columns.items())]}


# ---------------------------------------------------------------------------
# fields, targets


def field_to_json(f: FieldSpec) -> str:
    return str(f)


def field_from_json(obj) -> FieldSpec:
    if isinstance(obj, int):
        return QQ if obj == 0 else GF(obj)
    if not isinstance(obj, str):
        raise FormatError(f"bad field {obj!r}")
    s = obj.strip().upper().replace(" ", "")
    if s in ("QQ", "Q", "RATIONALS"):
        return QQ
    for pre in ("GF(", "F(", "F_"):
        if s.startswith(pre):
            body = s[len(pre):].rstrip(")")
            try:
                return GF(int(body))
            except ValueError as exc:
                raise FormatError(f"bad field {obj!r}: {exc}") from exc
    raise FormatError(f"bad field {obj!r}")


def targets_from_json(f: FieldSpec, obj):
    if not isinstance(obj, list) or len(obj) != 3:
        raise FormatError("targets must be a list of three coefficient lists")
    try:
        return tuple(split_quadratic(Polynomial(f, c)) for c in obj)
    except QuadsumError as exc:
        raise FormatError(f"bad target: {exc}") from exc


def targets_to_json(targets):
    return [t.monic.to_json() for t in targets]


# ---------------------------------------------------------------------------
# operator trees


def _pairs(obj, key):
    v = obj.get(key, [])
    if isinstance(v, dict):
        return {int(k): x for k, x in v.items()}
    return {int(n): x for n, x in v}


def op_from_json(f: FieldSpec, obj) -> Operator:
    if not isinstance(obj, dict) or "type" not in obj:
        raise FormatError(f"operator node must be an object with a 'type': {obj!r}")
    t = obj["type"]
    try:
        if t == "shift":
            return Shift(f)
        if t == "downshift":
            return DownShift(f)
        if t == "scalar":
            return ScalarIdentity(f, obj["value"])
        if t == "diagonal":
            return DiagonalPeriodic(f, obj["pattern"])
        if t == "banded":
            return BandedPeriodic(f, obj["bands"])
        if t == "companion":
            return CompanionBlockSum(f, [Polynomial(f, p) for p in obj["blocks"]])
        if t == "patch":
            return FiniteRankPatch(op_from_json(f, obj["base"]), _pairs(obj, "columns"))
        if t == "direct_sum":
            return DirectSum(op_from_json(f, obj["left"]), op_from_json(f, obj["right"]),
                             Layout.from_json(obj.get("layout", "interleave")))
        if t == "sum":
            terms = [op_from_json(f, x) for x in obj["terms"]]
            if not terms:
                raise FormatError("empty sum")
            acc = terms[0]
            for x in terms[1:]:
                acc = Sum(acc, x)
            return acc
        if t == "difference":
            return Difference(op_from_json(f, obj["left"]), op_from_json(f, obj["right"]))
        if t == "scale":
            return Scale(obj["c"], op_from_json(f, obj["op"]))
        if t == "compose":
            return Compose(op_from_json(f, obj["outer"]), op_from_json(f, obj["inner"]))
        if t == "rule_table":
            return RuleTable(f, _pairs(obj, "exceptions"), int(obj["period"]), obj["tail"])
        if t == "column_table":
            return ColumnTable(f, _pairs(obj, "columns"))
    except KeyError as exc:
        raise FormatError(f"operator node {t!r} is missing field {exc}") from exc
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise FormatError(f"bad {t!r} node: {exc}") from exc
    raise FormatError(f"unknown operator type {t!r}")


def is_structural(obj) -> bool:
    """True when the tree has no recipe nodes, i.e. it can be rebuilt exactly."""
    if isinstance(obj, dict):
        if obj.get("type") == "recipe":
            return False
        return all(is_structural(v) for v in obj.values())
    if isinstance(obj, list):
        return all(is_structural(v) for v in obj)
    return True


def operator_file(f: FieldSpec, u: Operator, targets=None) -> dict:
    out = {"field": field_to_json(f), "op": u.to_json()}
    if targets is not None:
        out["targets"] = targets_to_json(targets)
    return out


def parse_operator_file(obj) -> tuple:
    """``(field, operator, targets or None)`` from a parsed operator file."""
    if not isinstance(obj, dict):
        raise FormatError("operator file must be a JSON object")
    for key in ("field", "op"):
        if key not in obj:
            raise FormatError(f"operator file is missing {key!r}")
    f = field_from_json(obj["field"])
    u = op_from_json(f, obj["op"])
    targets = targets_from_json(f, obj["targets"]) if "targets" in obj else None
    return f, u, targets


# ---------------------------------------------------------------------------
# certificates


def closure_table(s: Operator, prefix: int) -> ColumnTable:
    """Columns of s on e_0..e_{prefix-1} and on the supports of those columns.

    That is exactly what a degree-two annihilation check on the prefix reads.
    """
    cols = {n: s.column(n) for n in range(prefix)}
    for n in range(prefix):
        for m in list(cols[n].data):
            if m not in cols:
                cols[m] = s.column(m)
    return ColumnTable(s.field, cols)


def _summand_json(s: Operator, prefix: int):
    try:
        obj = s.to_json()
        if is_structural(obj):
            return obj
    except (QuadsumError, NotImplementedError):
        pass
    return closure_table(s, prefix).to_json()


def _public(obj):
    """Drop live-only ``_`` keys and anything that is not plain JSON."""
    if isinstance(obj, dict):
        return {k: _public(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_public(v) for v in obj]
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, MatrixFin):
        return obj.to_json()
    return str(obj)


def certificate_to_json(cert: ThreeSumCertificate) -> dict:
    f = cert.targets[0].field
    return {
        "format_version": FORMAT_VERSION,
        "field": field_to_json(f),
        "targets": targets_to_json(cert.targets),
        "verified_prefix": cert.verified_prefix,
        "route": cert.route,
        "summands": [_summand_json(s, cert.verified_prefix) for s in cert.summands],
        "sub": _public(cert.sub),
    }


def certificate_from_json(obj) -> ThreeSumCertificate:
    if not isinstance(obj, dict):
        raise FormatError("certificate must be a JSON object")
    ver = obj.get("format_version")
    if ver != FORMAT_VERSION:
        raise FormatError(f"unsupported certificate format version {ver!r}")
    try:
        f = field_from_json(obj["field"])
        targets = targets_from_json(f, obj["targets"])
        summands = tuple(op_from_json(f, s) for s in obj["summands"])
        prefix = int(obj["verified_prefix"])
    except KeyError as exc:
        raise FormatError(f"certificate is missing {exc}") from exc
    if len(summands) != 3:
        raise FormatError("certificate needs exactly three summands")
    return ThreeSumCertificate(summands, targets, prefix, obj.get("route", ""), obj.get("sub", {}))


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, ensure_ascii=False)


def load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from exc


def read_operator(path: str) -> tuple:
    return parse_operator_file(load_json(path))


def read_certificate(path: str) -> ThreeSumCertificate:
    return certificate_from_json(load_json(path))


def write_json(path: Optional[str], obj) -> str:
    text = dumps(obj)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text
