"""Exact polynomials p(x, y) with coefficients in Q[a, b] and the orthogonality family rules.

A polynomial is stored as a sparse dict mapping (i, j, k, l) to a Fraction,
meaning coeff * x^i * y^j * a^k * b^l with a = Re(lambda), b = Im(lambda).
The family contains polynomials p with int p(x, y) |u(x + i y)|^2 dx = 0 for
every y, where u is an eigenfunction of -u'' + i z^3 u = lambda u.
"""

from __future__ import annotations

import ast
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.integrate

from .grid import FieldGrid

Monomial = tuple[int, int, int, int]
Number = int | Fraction

VARS = ("x", "y", "a", "b")
# print order inside a monomial: parameters first
_PRINT_ORDER = (2, 3, 0, 1)


class BivariatePoly:
    """Sparse exact polynomial in x, y with coefficients in Q[a, b]."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, Number] | None = None):
        clean: dict[Monomial, Fraction] = {}
        for mon, c in (terms or {}).items():
            if len(mon) != 4 or any(e < 0 for e in mon):
                raise ValueError(f"bad monomial {mon}")
            c = Fraction(c)
            if c:
                key = tuple(int(e) for e in mon)
                clean[key] = clean.get(key, Fraction(0)) + c
                if not clean[key]:
                    del clean[key]
        self.terms = clean

    # construction
    @classmethod
    def const(cls, c: Number) -> BivariatePoly:
        return cls({(0, 0, 0, 0): c})

    @classmethod
    def var(cls, name: str) -> BivariatePoly:
        e = [0, 0, 0, 0]
        e[VARS.index(name)] = 1
        return cls({tuple(e): 1})

    # arithmetic
    def __add__(self, other):
        other = _coerce(other)
        t = dict(self.terms)
        for m, c in other.terms.items():
            t[m] = t.get(m, Fraction(0)) + c
        return BivariatePoly(t)

    __radd__ = __add__

    def __neg__(self):
        return BivariatePoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        t: dict[Monomial, Fraction] = {}
        for (m1, c1), (m2, c2) in itertools.product(self.terms.items(), other.terms.items()):
            m = (m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2], m1[3] + m2[3])
            t[m] = t.get(m, Fraction(0)) + c1 * c2
        return BivariatePoly(t)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        out = BivariatePoly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __truediv__(self, c: Number):
        c = Fraction(c)
        return BivariatePoly({m: v / c for m, v in self.terms.items()})

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = BivariatePoly.const(other)
        return isinstance(other, BivariatePoly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    # calculus in x, y
    def diff(self, var: str) -> BivariatePoly:
        k = VARS.index(var)
        t = {}
        for m, c in self.terms.items():
            if m[k]:
                e = list(m)
                e[k] -= 1
                t[tuple(e)] = c * m[k]
        return BivariatePoly(t)

    def integrate_x(self) -> BivariatePoly:
        """Antiderivative in x vanishing at x = 0."""
        return BivariatePoly({(m[0] + 1, m[1], m[2], m[3]): c / (m[0] + 1) for m, c in self.terms.items()})

    # inspection
    def degree(self, var: str | None = None) -> int:
        if not self.terms:
            return -1
        if var is None:
            return max(m[0] + m[1] for m in self.terms)
        k = VARS.index(var)
        return max(m[k] for m in self.terms)

    def uses(self, var: str) -> bool:
        k = VARS.index(var)
        return any(m[k] for m in self.terms)

    def substitute(self, alpha: Number, beta: Number) -> BivariatePoly:
        """Exact substitution of rational parameter values."""
        t: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            key = (m[0], m[1], 0, 0)
            t[key] = t.get(key, Fraction(0)) + c * Fraction(alpha) ** m[2] * Fraction(beta) ** m[3]
        return BivariatePoly(t)

    def evaluate(self, x, y, alpha=0, beta=0):
        """Value at numbers or numpy arrays; exact when all arguments are rational."""
        exact = all(isinstance(v, (int, Fraction)) for v in (x, y, alpha, beta))
        total = Fraction(0) if exact else 0.0
        for (i, j, k, l), c in self.terms.items():
            cc = c if exact else float(c)
            total = total + cc * x ** i * y ** j * alpha ** k * beta ** l
        return total

    def row_coefficients(self, y: float, alpha: float, beta: float) -> np.ndarray:
        """Float coefficients in x (ascending) at fixed y and parameters."""
        out = np.zeros(self.degree("x") + 1 if self.terms else 1)
        for (i, j, k, l), c in self.terms.items():
            out[i] += float(c) * y ** j * alpha ** k * beta ** l
        return out

    # text form
    def to_text(self) -> str:
        if not self.terms:
            return "0"
        order = sorted(self.terms, key=lambda m: (-(m[0] + m[1]), -m[0], -m[1], -m[2], -m[3]))
        parts = []
        for n, m in enumerate(order):
            c = self.terms[m]
            sign = "-" if c < 0 else "+"
            c = abs(c)
            factors = []
            for k in _PRINT_ORDER:
                if m[k] == 1:
                    factors.append(VARS[k])
                elif m[k] > 1:
                    factors.append(f"{VARS[k]}^{m[k]}")
            if c != 1 or not factors:
                factors.insert(0, str(c))
            body = "*".join(factors)
            if n == 0:
                parts.append(body if sign == "+" else "-" + body)
            else:
                parts.append(f"{sign} {body}")
        return " ".join(parts)

    __str__ = to_text

    def __repr__(self):
        return f"BivariatePoly('{self.to_text()}')"

    @classmethod
    def parse(cls, text: str) -> BivariatePoly:
        """Parse +, -, *, /, ^ (or **), parentheses, integers and the names x, y, a, b."""
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ValueError(f"cannot parse polynomial {text!r}: {exc.msg}") from None
        return _eval_node(tree.body, text)


def _coerce(v) -> BivariatePoly:
    if isinstance(v, BivariatePoly):
        return v
    if isinstance(v, (int, Fraction)):
        return BivariatePoly.const(v)
    raise TypeError(f"cannot combine BivariatePoly with {type(v).__name__}")


def _eval_node(node, text):
    if isinstance(node, ast.BinOp):
        left = _eval_node(node.left, text)
        right = _eval_node(node.right, text)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            if right.degree() > 0 or any(m != (0, 0, 0, 0) for m in right.terms):
                raise ValueError(f"division by a non-constant in {text!r}")
            return left / right.terms.get((0, 0, 0, 0), Fraction(0))
        if isinstance(node.op, ast.Pow):
            if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                raise ValueError(f"exponent must be a nonnegative integer in {text!r}")
            return left ** node.right.value
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand, text)
        return -v if isinstance(node.op, ast.USub) else v
    elif isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
        return BivariatePoly.const(node.value)
    elif isinstance(node, ast.Name) and node.id in VARS:
        return BivariatePoly.var(node.id)
    raise ValueError(f"unsupported element {ast.dump(node)[:40]} in {text!r}")


# --- family generators ------------------------------------------------------

X = BivariatePoly.var("x")
Y = BivariatePoly.var("y")
A = BivariatePoly.var("a")
B = BivariatePoly.var("b")


def p_base() -> BivariatePoly:
    """x^3 - 3 x y^2 - b."""
    return X ** 3 - 3 * X * Y ** 2 - B


def rule_ii(m: int) -> BivariatePoly:
    if not isinstance(m, int) or m < 0:
        raise ValueError("m must be a nonnegative integer")
    f = Fraction
    inner = X ** (m + 5) / (m + 5) - 3 * Y ** 2 * X ** (m + 3) / (m + 3) - B * X ** (m + 2) / (m + 2)
    out = f(4, m + 1) * inner * (X ** 3 - 3 * Y ** 2 * X - B)
    if m >= 2:  # m (m - 1) vanishes for m < 2
        out = out - m * (m - 1) * X ** (m - 2)
    out = out - 4 * X ** m * (3 * X ** 2 * Y - Y ** 3 + A) - f(12, m + 1) * Y * X ** (m + 2)
    return out


def rule_iii(p: BivariatePoly) -> BivariatePoly:
    return p.diff("y") + 2 * p_base() * p.integrate_x()


def rule_iv(p: BivariatePoly) -> BivariatePoly:
    return (p.diff("x").diff("x") + p.diff("y").diff("y") + 12 * X ** 2 * Y * p
            + 4 * p_base() * p.diff("y").integrate_x())


RULES = {"iii": rule_iii, "iv": rule_iv}


def apply_rules(script: str | Sequence[str], start: BivariatePoly | None = None) -> BivariatePoly:
    """Apply a composition script such as "iii,iv" (left to right) starting from p_base().

    A leading "ii:m" item starts from rule_ii(m) instead.
    """
    items = [s.strip() for s in (script.split(",") if isinstance(script, str) else script) if s.strip()]
    p = p_base() if start is None else start
    for n, it in enumerate(items):
        if it.startswith("ii:"):
            if n != 0:
                raise ValueError("ii:m may only start a script")
            p = rule_ii(int(it[3:]))
        elif it in RULES:
            p = RULES[it](p)
        elif it in ("i", "base"):
            if n != 0:
                raise ValueError("i may only start a script")
            p = p_base()
        else:
            raise ValueError(f"unknown rule {it!r}; use i, ii:m, iii or iv")
    return p


@dataclass(frozen=True)
class FamilyMember:
    script: tuple[str, ...]
    poly: BivariatePoly

    @property
    def label(self) -> str:
        return ",".join(self.script)


def enumerate_family(depth: int = 3, degree_cap: int = 16) -> list[FamilyMember]:
    """Members reachable by at most ``depth`` applications of rules iii/iv, total degree <= degree_cap.

    Seeds are p_base() (rule i) and rule_ii(m) for every m with degree <= cap.
    Compositions that collapse to 0 or repeat an earlier member are dropped.
    No claim is made that these span the family.
    """
    seeds = [FamilyMember(("i",), p_base())]
    m = 0
    while True:
        p = rule_ii(m)
        if p.degree() > degree_cap:
            break
        seeds.append(FamilyMember((f"ii:{m}",), p))
        m += 1
    out = []
    seen = set()
    frontier = []
    for s in seeds:
        if s.poly not in seen:
            seen.add(s.poly)
            out.append(s)
            frontier.append(s)
    for _ in range(depth):
        nxt = []
        for mem in frontier:
            for name, rule in RULES.items():
                p = rule(mem.poly)
                if not p or p.degree() > degree_cap or p in seen:
                    continue
                seen.add(p)
                nm = FamilyMember(mem.script + (name,), p)
                out.append(nm)
                nxt.append(nm)
        frontier = nxt
    return out


# --- numerical orthogonality -----------------------------------------------

class OrthogonalityError(ValueError):
    pass


def _row_index(grid: FieldGrid, y: float) -> int:
    lo, hi = grid.y[0], grid.y[-1]
    if not (lo - 1e-12 <= y <= hi + 1e-12):
        raise OrthogonalityError(f"y = {y} outside the grid rows [{lo}, {hi}]")
    i = int(np.argmin(np.abs(grid.y - y)))
    if abs(grid.y[i] - y) > 1e-9 * max(1.0, abs(y)):
        raise OrthogonalityError(f"y = {y} is not a grid row (nearest {grid.y[i]})")
    return i


def orthogonality_test(p: BivariatePoly, grid: FieldGrid, lam: complex | None = None,
                       y_values: Iterable[float] = (-1.0, 0.0, 1.0)) -> list[float]:
    """|int p |u|^2 dx| / int (1 + |x|^deg_x p) |u|^2 dx for each requested row (Simpson)."""
    lam = grid.lam if lam is None else complex(getattr(lam, "lam", lam))
    out = []
    dx_deg = max(p.degree("x"), 0)
    for y in y_values:
        i = _row_index(grid, float(y))
        ls = grid.log_scale[i]
        w = np.abs(grid.u[i]) ** 2 * np.exp(2 * (ls - ls.max()))
        coeffs = p.row_coefficients(float(grid.y[i]), lam.real, lam.imag)
        vals = np.polynomial.polynomial.polyval(grid.x, coeffs)
        num = scipy.integrate.simpson(vals * w, x=grid.x)
        den = scipy.integrate.simpson((1 + np.abs(grid.x) ** dx_deg) * w, x=grid.x)
        out.append(float(abs(num) / den) if den > 0 else math.inf)
    return out
