"""Decompositions of countable-dimensional endomorphisms into sums of three quadratic operators."""

from .algebra import GF, QQ, FieldSpec, Polynomial, QuadraticTarget, Scalar

__all__ = ["GF", "QQ", "FieldSpec", "Polynomial", "QuadraticTarget", "Scalar"]
