"""Multivariate rational functions with exact rational coefficients (thin wrapper over sympy)."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

import sympy as sp


def symbols(prefix: str, count: int) -> tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol(f"{prefix}{i}") for i in range(count))


def to_sympy(value) -> sp.Expr:
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    return sp.sympify(value)


class RationalFunctionMV:
    """``numerator / denominator`` with the denominator's leading coefficient scaled to 1."""

    __slots__ = ("numerator", "denominator", "gens")

    def __init__(self, expr, gens=None):
        expr = sp.cancel(sp.together(sp.sympify(expr)))
        num, den = sp.fraction(expr)
        gens = tuple(gens) if gens is not None else tuple(sorted(expr.free_symbols, key=str))
        if not gens:
            gens = (sp.Symbol("_"),)
        p = sp.Poly(num, *gens, domain="QQ")
        q = sp.Poly(den, *gens, domain="QQ")
        if q.is_zero:
            raise ZeroDivisionError("denominator vanishes identically")
        lc = q.LC()
        self.numerator = p.quo_ground(lc)
        self.denominator = q.quo_ground(lc)
        self.gens = gens

    def expr(self) -> sp.Expr:
        return self.numerator.as_expr() / self.denominator.as_expr()

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalFunctionMV):
            other = RationalFunctionMV(other)
        lhs = self.numerator.as_expr() * other.denominator.as_expr()
        rhs = other.numerator.as_expr() * self.denominator.as_expr()
        return sp.expand(lhs - rhs) == 0

    def __hash__(self):
        return hash(str(self.expr()))

    def __add__(self, other: "RationalFunctionMV") -> "RationalFunctionMV":
        return RationalFunctionMV(self.expr() + _expr(other))

    def __mul__(self, other) -> "RationalFunctionMV":
        return RationalFunctionMV(self.expr() * _expr(other))

    def subs(self, mapping: Mapping) -> "RationalFunctionMV":
        return RationalFunctionMV(self.expr().subs({k: to_sympy(v) for k, v in mapping.items()}, simultaneous=True))

    def evaluate(self, mapping: Mapping):
        """Exact value (Fraction) for rational inputs, complex otherwise."""
        exact = all(isinstance(v, (int, Fraction)) for v in mapping.values())
        vals = {k: to_sympy(v) for k, v in mapping.items()}
        den = self.denominator.as_expr().subs(vals, simultaneous=True)
        num = self.numerator.as_expr().subs(vals, simultaneous=True)
        if exact:
            den = sp.Rational(den)
            if den == 0:
                raise ZeroDivisionError("evaluation at a pole")
            q = sp.Rational(num) / den
            return Fraction(int(q.p), int(q.q))
        d = complex(den)
        if d == 0:
            raise ZeroDivisionError("evaluation at a pole")
        return complex(num) / d

    def lambdify(self, variables):
        return sp.lambdify(variables, self.expr(), "numpy")

    def degree(self, gen) -> tuple[int, int]:
        return self.numerator.degree(gen), self.denominator.degree(gen)

    def __repr__(self) -> str:
        return f"RationalFunctionMV({sp.sstr(self.expr())})"

    def __str__(self) -> str:
        return sp.sstr(sp.factor(self.expr()))


def _expr(value):
    return value.expr() if isinstance(value, RationalFunctionMV) else sp.sympify(value)
