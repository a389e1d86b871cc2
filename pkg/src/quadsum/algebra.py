"""Exact scalars over Q and F_p, polynomials, and split quadratic targets."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Iterable, Sequence

from .errors import (
    ConstantPolynomial,
    FieldMismatch,
    NotSplit,
    WrongDegree,
    ZeroPolynomial,
)


def qq_normal(x):
    """Integral rationals as ``int``: int arithmetic is far cheaper than Fraction."""
    if x.__class__ is int:
        return x
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else x


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, isqrt(n) + 1))


@dataclass(frozen=True)
class FieldSpec:
    """Ground field: characteristic 0 means Q, a prime p means F_p.

    Raw field elements over Q are ``int`` when integral and ``Fraction`` otherwise;
    over F_p they are ``int`` in ``[0, p)``.
    """

    characteristic: int

    def __post_init__(self):
        c = self.characteristic
        if c != 0 and not _is_prime(c):
            raise ValueError(f"characteristic must be 0 or prime, got {c}")

    @property
    def kind(self) -> str:
        return "Rationals" if self.characteristic == 0 else "PrimeField"

    @property
    def is_finite(self) -> bool:
        return self.characteristic != 0

    def __str__(self):
        return "QQ" if self.characteristic == 0 else f"GF({self.characteristic})"

    # raw element arithmetic -------------------------------------------------
    def coerce(self, x):
        if isinstance(x, Scalar):
            if x.field != self:
                raise FieldMismatch(f"scalar over {x.field} used over {self}")
            return x.value
        if isinstance(x, bool):
            raise TypeError("booleans are not field elements")
        if isinstance(x, str):
            x = Fraction(x)
        p = self.characteristic
        if p == 0:
            if isinstance(x, (int, Fraction)):
                return qq_normal(x)
            raise TypeError(f"cannot coerce {x!r} into {self}")
        if isinstance(x, int):
            return x % p
        if isinstance(x, Fraction):
            if x.denominator % p == 0:
                raise ZeroDivisionError(f"{x} has no image in {self}")
            return x.numerator * pow(x.denominator, -1, p) % p
        raise TypeError(f"cannot coerce {x!r} into {self}")

    @property
    def zero(self):
        return 0

    @property
    def one(self):
        return 1

    def add(self, a, b):
        p = self.characteristic
        return (a + b) % p if p else a + b

    def sub(self, a, b):
        p = self.characteristic
        return (a - b) % p if p else a - b

    def mul(self, a, b):
        p = self.characteristic
        return (a * b) % p if p else a * b

    def neg(self, a):
        p = self.characteristic
        return (-a) % p if p else -a

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        p = self.characteristic
        return pow(a, -1, p) if p else qq_normal(Fraction(1, 1) / a)

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def elements(self):
        if not self.characteristic:
            raise ValueError("Q is not enumerable")
        return range(self.characteristic)

    def sqrt(self, a):
        """Some square root of ``a`` in the field, or None."""
        p = self.characteristic
        if p:
            for r in range(p):
                if r * r % p == a:
                    return r
            return None
        if a < 0:
            return None
        n, d = a.numerator, a.denominator
        rn, rd = isqrt(n), isqrt(d)
        if rn * rn == n and rd * rd == d:
            return qq_normal(Fraction(rn, rd))
        return None

    def fmt(self, a) -> str | int:
        """JSON-friendly form: ints stay ints, other rationals become "num/den"."""
        if self.characteristic:
            return int(a)
        a = Fraction(a)
        return a.numerator if a.denominator == 1 else f"{a.numerator}/{a.denominator}"

    def scalar(self, x) -> "Scalar":
        return Scalar(self.coerce(x), self)


QQ = FieldSpec(0)


def GF(p: int) -> FieldSpec:
    return FieldSpec(p)


@dataclass(frozen=True)
class Scalar:
    """An exact field element tagged with its field."""

    value: object
    field: FieldSpec

    def __post_init__(self):
        object.__setattr__(self, "value", self.field.coerce(self.value))

    def _other(self, other):
        if isinstance(other, Scalar):
            if other.field != self.field:
                raise FieldMismatch(f"{self.field} vs {other.field}")
            return other.value
        return self.field.coerce(other)

    def __add__(self, other):
        return Scalar(self.field.add(self.value, self._other(other)), self.field)

    __radd__ = __add__

    def __sub__(self, other):
        return Scalar(self.field.sub(self.value, self._other(other)), self.field)

    def __rsub__(self, other):
        return Scalar(self.field.sub(self._other(other), self.value), self.field)

    def __mul__(self, other):
        return Scalar(self.field.mul(self.value, self._other(other)), self.field)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Scalar(self.field.div(self.value, self._other(other)), self.field)

    def __neg__(self):
        return Scalar(self.field.neg(self.value), self.field)

    def inverse(self):
        return Scalar(self.field.inv(self.value), self.field)

    def is_zero(self):
        return self.value == 0

    def __eq__(self, other):
        if isinstance(other, Scalar):
            return self.field == other.field and self.value == other.value
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            try:
                return self.value == self.field.coerce(other)
            except ZeroDivisionError:
                return False
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.field))

    def __repr__(self):
        return f"Scalar({self.field.fmt(self.value)!r}, {self.field})"

    def __str__(self):
        return str(self.field.fmt(self.value))


class Polynomial:
    """Dense univariate polynomial, coefficients lowest degree first."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field: FieldSpec, coeffs: Iterable = ()):
        cs = [field.coerce(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.field = field
        self.coeffs = tuple(cs)

    @classmethod
    def _raw(cls, field, coeffs):
        p = object.__new__(cls)
        cs = list(coeffs)
        while cs and cs[-1] == 0:
            cs.pop()
        p.field = field
        p.coeffs = tuple(cs)
        return p

    @classmethod
    def monomial(cls, field, degree, coeff=1):
        return cls._raw(field, [field.zero] * degree + [field.coerce(coeff)])

    @classmethod
    def from_roots(cls, field, roots):
        poly = cls._raw(field, [field.one])
        for r in roots:
            poly = poly * cls._raw(field, [field.neg(field.coerce(r)), field.one])
        return poly

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self):
        return not self.coeffs

    @property
    def leading(self):
        if not self.coeffs:
            raise ZeroPolynomial("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def coeff(self, k):
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else self.field.zero

    def _check(self, other):
        if not isinstance(other, Polynomial):
            raise TypeError(f"expected Polynomial, got {type(other).__name__}")
        if other.field != self.field:
            raise FieldMismatch(f"{self.field} vs {other.field}")

    def __add__(self, other):
        self._check(other)
        f = self.field
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial._raw(f, [f.add(self.coeff(i), other.coeff(i)) for i in range(n)])

    def __sub__(self, other):
        self._check(other)
        f = self.field
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial._raw(f, [f.sub(self.coeff(i), other.coeff(i)) for i in range(n)])

    def __neg__(self):
        return Polynomial._raw(self.field, [self.field.neg(c) for c in self.coeffs])

    def __mul__(self, other):
        f = self.field
        if not isinstance(other, Polynomial):
            c = f.coerce(other)
            return Polynomial._raw(f, [f.mul(c, a) for a in self.coeffs])
        self._check(other)
        if not self.coeffs or not other.coeffs:
            return Polynomial._raw(f, [])
        out = [f.zero] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] = f.add(out[i + j], f.mul(a, b))
        return Polynomial._raw(f, out)

    __rmul__ = __mul__

    def __divmod__(self, other):
        self._check(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        f = self.field
        rem = list(self.coeffs)
        dq = len(rem) - len(other.coeffs)
        if dq < 0:
            return Polynomial._raw(f, []), self
        quot = [f.zero] * (dq + 1)
        inv_lead = f.inv(other.leading)
        for k in range(dq, -1, -1):
            c = f.mul(rem[k + other.degree], inv_lead)
            quot[k] = c
            if c == 0:
                continue
            for j, b in enumerate(other.coeffs):
                rem[k + j] = f.sub(rem[k + j], f.mul(c, b))
        return Polynomial._raw(f, quot), Polynomial._raw(f, rem)

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def __call__(self, x):
        """Evaluate at a scalar (Horner)."""
        f = self.field
        x = f.coerce(x)
        acc = f.zero
        for c in reversed(self.coeffs):
            acc = f.add(f.mul(acc, x), c)
        return Scalar(acc, f)

    def shift(self, c) -> "Polynomial":
        """The polynomial ``p(t + c)``."""
        f = self.field
        c = f.coerce(c)
        lin = Polynomial._raw(f, [c, f.one])
        acc = Polynomial._raw(f, [])
        for coef in reversed(self.coeffs):
            acc = acc * lin + Polynomial._raw(f, [coef])
        return acc

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.field == other.field and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.field, self.coeffs))

    def to_json(self):
        return [self.field.fmt(c) for c in self.coeffs]

    def __repr__(self):
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            s = self.field.fmt(c)
            terms.append(f"{s}" if k == 0 else f"{s}*t^{k}" if k > 1 else f"{s}*t")
        return f"Polynomial({' + '.join(terms) or '0'} over {self.field})"


def poly_gcd(a: Polynomial, b: Polynomial) -> Polynomial:
    while not b.is_zero():
        a, b = b, a % b
    return monicize(a) if not a.is_zero() else a


@dataclass(frozen=True)
class QuadraticTarget:
    """A split monic quadratic ``(t - x)(t - y)`` with its canonical root order."""

    monic: Polynomial
    roots: tuple
    trace: Scalar

    @property
    def field(self) -> FieldSpec:
        return self.monic.field

    @property
    def x(self) -> Scalar:
        return self.roots[0]

    @property
    def y(self) -> Scalar:
        return self.roots[1]

    @property
    def constant(self) -> Scalar:
        """``p(0)``, the product of the roots."""
        return Scalar(self.monic.coeff(0), self.field)

    def __str__(self):
        return f"(t-{self.x})(t-{self.y})"


def monicize(p: Polynomial) -> Polynomial:
    if p.is_zero():
        raise ZeroPolynomial("cannot monicize the zero polynomial")
    f = p.field
    inv = f.inv(p.leading)
    return Polynomial._raw(f, [f.mul(inv, c) for c in p.coeffs])


def poly_trace(p: Polynomial) -> Scalar:
    if p.degree < 1:
        raise ConstantPolynomial("trace is defined for non-constant polynomials only")
    m = monicize(p)
    return Scalar(p.field.neg(m.coeffs[-2]), p.field)


def _root_key(field, r):
    return r  # Fractions and residues both order naturally


def split_quadratic(p: Polynomial) -> QuadraticTarget:
    if p.degree != 2:
        raise WrongDegree(f"expected degree 2, got {p.degree}")
    f = p.field
    m = monicize(p)
    c0, c1 = m.coeffs[0], m.coeffs[1]
    if f.characteristic:
        roots = [r for r in f.elements() if f.add(f.add(f.mul(r, r), f.mul(c1, r)), c0) == 0]
        if not roots:
            raise NotSplit(f"{p} has no root in {f}")
        x = roots[0]
        y = f.sub(f.neg(c1), x)
    else:
        disc = c1 * c1 - 4 * c0
        s = f.sqrt(disc)
        if s is None:
            raise NotSplit(f"{p} has no root in {f}")
        x, y = qq_normal(Fraction(-c1 - s, 2)), qq_normal(Fraction(-c1 + s, 2))
    x, y = sorted((x, y), key=lambda r: _root_key(f, r))
    return QuadraticTarget(m, (Scalar(x, f), Scalar(y, f)), Scalar(f.add(x, y), f))


def quadratic(field: FieldSpec, coeffs: Sequence) -> QuadraticTarget:
    """Convenience: split the polynomial with the given low-first coefficients."""
    return split_quadratic(Polynomial(field, coeffs))


def target_from_roots(field: FieldSpec, x, y) -> QuadraticTarget:
    return split_quadratic(Polynomial.from_roots(field, [x, y]))


def same_field(targets) -> FieldSpec:
    fields = {t.field for t in targets}
    if len(fields) != 1:
        raise FieldMismatch(f"targets live over different fields: {sorted(map(str, fields))}")
    return fields.pop()


def canonical_shift(targets) -> tuple[Scalar, tuple[Scalar, Scalar, Scalar]]:
    """Return ``c = x1+x2+x3`` and ``a_k = y_k - x_k``.

    ``u`` is a (p1,p2,p3)-sum iff ``u - c*id`` is a (t^2-a1 t, t^2-a2 t, t^2-a3 t)-sum.
    """
    f = same_field(targets)
    c = Scalar(f.zero, f)
    for t in targets:
        c = c + t.x
    return c, tuple(t.y - t.x for t in targets)
