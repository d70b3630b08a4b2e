from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from ptspectra.cli import NAMED_MEMBERS
from ptspectra.ortho import (BivariatePoly, OrthogonalityError, apply_rules, enumerate_family, orthogonality_test,
                             p_base, rule_ii, rule_iii, rule_iv)

# printed closed forms, transcribed by hand (a = alpha, b = beta)
P7 = "x^7 - 9*x^5*y^2 - 5*x^4*b + 18*x^3*y^4 + 18*x^2*y^2*b + 4*x*(b^2 - 3*y)"
P8 = "2*x^8 - 16*x^6*y^2 - 7*x^5*b + 30*x^4*y^4 + 25*x^3*y^2*b + 5*x^2*(b^2 - 12*y) + 10*y^3 - 10*a"
P9 = "2*x^9 - 15*x^7*y^2 - 6*x^6*b + 27*x^5*y^4 + 4*x^3*(b^2 - 27*y) + 24*x*y^3 + 21*x^4*y^2*b - 24*x*a"
P10 = ("20*x^10 - 144*x^8*y^2 - 55*x^7*b + 252*x^6*y^4 + 189*x^5*y^2*b - 35*x^4*(48*y - b^2)"
       " + 420*x^2*(y^3 - a) - 210")

x, y, a, b, t = sympy.symbols("x y a b t")
SP_BASE = x ** 3 - 3 * x * y ** 2 - b


def to_sympy(p: BivariatePoly):
    return sympy.expand(sympy.sympify(p.to_text().replace("^", "**"), locals={"a": a, "b": b, "x": x, "y": y}))


def sp_rule_ii(m):
    inner = x ** (m + 5) / (m + 5) - 3 * y ** 2 * x ** (m + 3) / (m + 3) - b * x ** (m + 2) / (m + 2)
    return sympy.expand(sympy.Rational(4, m + 1) * inner * SP_BASE - m * (m - 1) * x ** max(m - 2, 0)
                        - 4 * x ** m * (3 * x ** 2 * y - y ** 3 + a) - sympy.Rational(12, m + 1) * y * x ** (m + 2))


def sp_rule_iii(p):
    return sympy.expand(sympy.diff(p, y) + 2 * SP_BASE * sympy.integrate(p.subs(x, t), (t, 0, x)))


def sp_rule_iv(p):
    py = sympy.diff(p, y)
    return sympy.expand(sympy.diff(p, x, 2) + sympy.diff(p, y, 2) + 12 * x ** 2 * y * p
                        + 4 * SP_BASE * sympy.integrate(py.subs(x, t), (t, 0, x)))


# --- exact closures ---------------------------------------------------------

def test_printed_closures_exact():
    assert 2 * rule_iii(p_base()) == BivariatePoly.parse(P7)
    assert Fraction(5, 2) * rule_ii(0) == BivariatePoly.parse(P8)
    assert 6 * rule_ii(1) == BivariatePoly.parse(P9)
    assert 105 * rule_ii(2) == BivariatePoly.parse(P10)


def test_cli_named_members_match_printed_forms():
    for name, text in (("p7", P7), ("p8", P8), ("p9", P9), ("p10", P10)):
        assert BivariatePoly.parse(NAMED_MEMBERS[name]) == BivariatePoly.parse(text)
    assert BivariatePoly.parse(NAMED_MEMBERS["p3"]) == p_base()


@pytest.mark.parametrize("m", range(5))
def test_rule_ii_against_sympy(m):
    assert sympy.expand(to_sympy(rule_ii(m)) - sp_rule_ii(m)) == 0


def test_rules_iii_iv_against_sympy():
    for p in (p_base(), rule_ii(1), apply_rules("iii"), BivariatePoly.parse("x^2*y - a*y^3 + 3*b")):
        sp = to_sympy(p)
        assert sympy.expand(to_sympy(rule_iii(p)) - sp_rule_iii(sp)) == 0
        assert sympy.expand(to_sympy(rule_iv(p)) - sp_rule_iv(sp)) == 0


def test_printed_forms_reproduced_by_sympy():
    for coeff, expr, text in ((2, sp_rule_iii(SP_BASE), P7), (sympy.Rational(5, 2), sp_rule_ii(0), P8),
                              (6, sp_rule_ii(1), P9), (105, sp_rule_ii(2), P10)):
        assert sympy.expand(coeff * expr - sympy.sympify(text.replace("^", "**"))) == 0


# --- base and trivial rules -------------------------------------------------

def test_p_base():
    p = p_base()
    assert p.evaluate(1, 0, 0, 0) == 1
    assert not p.uses("a") and p.uses("b")
    assert p == BivariatePoly.parse("x^3 - 3*x*y^2 - b")


def test_rules_annihilate_zero():
    zero = BivariatePoly()
    assert rule_iii(zero) == zero and rule_iv(zero) == zero


def test_rule_iv_of_base_vanishes():
    # p_xx + p_yy = 0 and 12 x^2 y p cancels against 4 p int_0^x p_y
    assert rule_iv(p_base()) == BivariatePoly()
    assert sp_rule_iv(SP_BASE) == 0


def test_rule_ii_rejects_negative():
    with pytest.raises(ValueError):
        rule_ii(-1)


def test_apply_rules_scripts():
    assert apply_rules("iii") == rule_iii(p_base())
    assert apply_rules("ii:2,iii") == rule_iii(rule_ii(2))
    with pytest.raises(ValueError):
        apply_rules("iii,ii:1")
    with pytest.raises(ValueError):
        apply_rules("v")


def test_parse_rejections():
    for bad in ("x/y", "x^y", "z + 1", "x +", "1.5*x"):
        with pytest.raises(ValueError):
            BivariatePoly.parse(bad)


# --- property tests ---------------------------------------------------------

monomial = st.tuples(*[st.integers(0, 3)] * 4)
coefficient = st.fractions(min_value=-5, max_value=5, max_denominator=7)
small_poly = st.dictionaries(monomial, coefficient, max_size=5).map(BivariatePoly)
rational = st.fractions(min_value=-3, max_value=3, max_denominator=5)


@settings(max_examples=60, deadline=None)
@given(small_poly, small_poly)
def test_rules_linear(p, q):
    assert rule_iii(p + q) == rule_iii(p) + rule_iii(q)
    assert rule_iv(p + q) == rule_iv(p) + rule_iv(q)
    assert rule_iii(3 * p) == 3 * rule_iii(p)


@settings(max_examples=60, deadline=None)
@given(small_poly)
def test_text_roundtrip(p):
    assert BivariatePoly.parse(p.to_text()) == p


@settings(max_examples=60, deadline=None)
@given(small_poly, small_poly, rational, rational, rational, rational)
def test_evaluation_homomorphism(p, q, xv, yv, av, bv):
    ev = lambda r: r.evaluate(xv, yv, av, bv)
    assert ev(p + q) == ev(p) + ev(q)
    assert ev(p * q) == ev(p) * ev(q)
    assert isinstance(ev(p * q), Fraction)
    assert ev(p) == p.substitute(av, bv).evaluate(xv, yv)


@settings(max_examples=60, deadline=None)
@given(small_poly)
def test_degree_bookkeeping(p):
    if not p:
        return
    d = p.degree()
    # rule iii: the top part 2 (x^3 - 3 x y^2) int_0^x top(p) never cancels
    assert rule_iii(p).degree() == d + 4
    # rule iv: at most d + 3; the top-degree part follows from the formula
    top = BivariatePoly({m: c for m, c in p.terms.items() if m[0] + m[1] == d})
    lead = 12 * BivariatePoly.parse("x^2*y") * top + 4 * BivariatePoly.parse("x^3 - 3*x*y^2") * top.diff("y").integrate_x()
    r = rule_iv(p)
    if lead:
        assert r.degree() == d + 3
    else:
        assert r.degree() <= d + 2


def test_family_enumeration():
    fam = enumerate_family(depth=3, degree_cap=16)
    assert fam[0].label == "i"
    assert all(m.poly and m.poly.degree() <= 16 for m in fam)
    assert len({m.poly for m in fam}) == len(fam)
    assert any(len(m.script) == 4 for m in fam)    # depth 3 reached


# --- numerical orthogonality -----------------------------------------------

@pytest.mark.parametrize("text", ["x^3 - 3*x*y^2 - b", P7, P8, P9, P10])
def test_printed_members_orthogonal(wide_grid, text):
    res = orthogonality_test(BivariatePoly.parse(text), wide_grid, y_values=(-1.0, 0.0, 1.0))
    assert max(res) < 1e-6, res


def test_family_orthogonal(wide_grid):
    worst = max(max(orthogonality_test(m.poly, wide_grid)) for m in enumerate_family(3, 16))
    assert worst < 1e-5


def test_constant_is_not_orthogonal(wide_grid):
    # normalisation: int 1 |u|^2 / int (1 + |x|^0) |u|^2 = 1/2
    res = orthogonality_test(BivariatePoly.const(1), wide_grid)
    assert np.allclose(res, 0.5, rtol=1e-12)


def test_row_outside_grid(wide_grid):
    with pytest.raises(OrthogonalityError):
        orthogonality_test(p_base(), wide_grid, y_values=[3.0])
    with pytest.raises(OrthogonalityError):
        orthogonality_test(p_base(), wide_grid, y_values=[0.0123])
