"""Command line front-end: classify, decompose, verify, demo.

Exit codes: 0 verified, 1 verification failed, 2 refused, 3 unresolved, 4 input error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from .corpus import DEMOS, demo_case, idempotent, square_zero
from .errors import ConditionViolated, FormatError, QuadsumError, Unresolved
from .pipeline import check_lc3, classify, decompose_three, lc3, verify_certificate
from .serialize import (
    certificate_to_json,
    dumps,
    read_certificate,
    read_operator,
    targets_from_json,
    write_json,
)

EXIT_OK, EXIT_VERIFY_FAIL, EXIT_REFUSED, EXIT_UNRESOLVED, EXIT_INPUT = 0, 1, 2, 3, 4

NAMED_TARGETS = {"sz": square_zero, "square-zero": square_zero, "t2": square_zero,
                 "idem": idempotent, "idempotent": idempotent}


def parse_targets(field, text):
    """``sz``, ``idem``, a JSON list of three coefficient lists, or ``c0,c1,c2;...``."""
    text = text.strip()
    if text in NAMED_TARGETS:
        return NAMED_TARGETS[text](field)
    if text.startswith("["):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"--targets: {exc.msg} at column {exc.colno}") from exc
    else:
        obj = [[c.strip() for c in part.split(",")] for part in text.split(";")]
    return targets_from_json(field, obj)


def _load_job(args):
    f, u, targets = read_operator(args.file)
    if getattr(args, "targets", None):
        targets = parse_targets(f, args.targets)
    return f, u, targets


def cmd_classify(args) -> int:
    f, u, targets = _load_job(args)
    if targets is None:
        targets = square_zero(f)
    rep = classify(u, targets)
    print(dumps({"field": str(f), "targets": [str(t) for t in targets], **rep.to_json()}))
    return EXIT_OK


def cmd_decompose(args) -> int:
    f, u, targets = _load_job(args)
    if targets is None:
        raise FormatError("no targets: give them in the operator file or with --targets")
    t0 = time.perf_counter()
    try:
        cert = decompose_three(u, targets, prefix=args.prefix, q_max=args.q_max, budget=args.budget)
    except ConditionViolated as exc:
        print(f"refused: {exc}")
        for c in exc.conditions:
            print(f"  violated: {c}")
        return EXIT_REFUSED
    except Unresolved as exc:
        print(f"unresolved (backend limit): {exc}")
        return EXIT_UNRESOLVED
    obj = certificate_to_json(cert)
    obj["seed"] = args.seed
    text = write_json(args.out, obj)
    if not args.out:
        print(text)
    print(f"verified: route {cert.route}, prefix {cert.verified_prefix}, "
          f"{time.perf_counter() - t0:.2f}s", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_verify(args) -> int:
    _, u, _ = read_operator(args.file)
    cert = read_certificate(args.cert)
    if cert.summands[0].field != u.field:
        raise FormatError("certificate and operator live over different fields")
    rep = verify_certificate(u, cert, args.prefix)
    if rep.ok:
        print(f"verified on e_0..e_{rep.checked - 1}")
        return EXIT_OK
    where = "" if rep.first_failure is None else f" (column {rep.first_failure})"
    print(f"verification failed{where}: {rep.detail}")
    return EXIT_VERIFY_FAIL


def cmd_demo(args) -> int:
    kind, f, u, targets = demo_case(args.name)
    print(f"{args.name}: {u.to_json()} over {f}")
    if kind == "lc3":
        cert = lc3(u, prefix=args.prefix)
        rep = check_lc3(u, cert.coefficients, cert.idempotents, args.prefix)
        cs = ", ".join(str(f.fmt(c)) for c in cert.coefficients)
        print(f"u = c1 q1 + c2 q2 + c3 q3 with c = ({cs})")
        print(f"q_i^2 = q_i and the sum identity hold on e_0..e_{args.prefix - 1}: {rep.ok}")
        return EXIT_OK if rep.ok else EXIT_VERIFY_FAIL
    try:
        cert = decompose_three(u, targets, prefix=args.prefix)
    except ConditionViolated as exc:
        print(f"refused: {exc}")
        return EXIT_REFUSED
    except Unresolved as exc:
        print(f"unresolved (backend limit): {exc}")
        return EXIT_UNRESOLVED
    rep = verify_certificate(u, cert)
    print(f"route {cert.route}; targets {', '.join(str(t) for t in targets)}")
    print(f"u = u1 + u2 + u3 and p_k(u_k) = 0 on e_0..e_{args.prefix - 1}: {rep.ok}")
    return EXIT_OK if rep.ok else EXIT_VERIFY_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadsum", description="Three-quadratic decompositions of structured operators.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="report dominant eigenvalue, torsion and route")
    c.add_argument("file")
    c.add_argument("--targets")
    c.set_defaults(func=cmd_classify)

    d = sub.add_parser("decompose", help="build and verify a certificate")
    d.add_argument("file")
    d.add_argument("--targets")
    d.add_argument("--prefix", type=int, default=256)
    d.add_argument("--q-max", type=int, default=4)
    d.add_argument("--budget", type=int, default=200_000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_decompose)

    v = sub.add_parser("verify", help="re-check a certificate against an operator")
    v.add_argument("file")
    v.add_argument("cert")
    v.add_argument("--prefix", type=int)
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("demo", help="run a named example")
    m.add_argument("name", choices=sorted(DEMOS))
    m.add_argument("--prefix", type=int, default=128)
    m.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "prefix", None) is not None and args.prefix < 1:
        print("error: --prefix must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except QuadsumError as exc:
        print(f"input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
