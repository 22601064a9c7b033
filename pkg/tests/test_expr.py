import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shockfront.errors import ExprSyntaxError, ExpressionEvalError, UnknownIdentifier
from shockfront.expr import (Binary, Call, FUNCTIONS, Neg, Number, Variable, evaluate,
                             parse_expression, to_text)
from shockfront.fields import FieldSpec


def test_band_formula_ast():
    ast = parse_expression("1 - x*exp(-x^2)")
    expected = Binary("-", Number(1.0),
                      Binary("*", Variable("x"),
                             Call("exp", (Neg(Binary("^", Variable("x"), Number(2.0))),))))
    assert ast == expected


def test_unclosed_parenthesis_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse_expression("2*(t")
    assert info.value.offset == 4
    assert "')'" in info.value.expected


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as info:
        parse_expression("y + 1")
    assert info.value.name == "y"


@pytest.mark.parametrize("text", ["", "   ", "1 +", "*2", "exp(1, 2)", "min(x)", "3 $ 4",
                                  "(1))", "sin x"])
def test_malformed_inputs_raise_syntax_errors(text):
    with pytest.raises((ExprSyntaxError, UnknownIdentifier)):
        parse_expression(text)


def test_precedence_and_associativity():
    assert evaluate(parse_expression("2^3^2"), 0, 0) == 512.0
    assert evaluate(parse_expression("-2^2"), 0, 0) == -4.0
    assert evaluate(parse_expression("8/4/2"), 0, 0) == 1.0
    assert evaluate(parse_expression("1 - 2 - 3"), 0, 0) == -4.0
    assert evaluate(parse_expression("2 + 3 * 4"), 0, 0) == 14.0


@pytest.mark.parametrize("x, expected", [(0.0, 1.0), (1.0, 1 - math.exp(-1))])
def test_band_evaluation(x, expected):
    assert evaluate(parse_expression("1 - x*exp(-x^2)"), 0.0, x) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("text, x", [("1/x", 0.0), ("sqrt(x - 1)", 0.0), ("exp(x)", 1000.0),
                                     ("x^(-1)", 0.0), ("x^0.5", -1.0)])
def test_eval_errors(text, x):
    with pytest.raises(ExpressionEvalError):
        evaluate(parse_expression(text), 0.0, x)


def test_eval_error_names_subexpression():
    with pytest.raises(ExpressionEvalError) as info:
        evaluate(parse_expression("t + 1/x"), 1.0, 0.0)
    assert "(1.0 / x)" in info.value.subexpression


def test_array_evaluation_broadcasts():
    f = parse_expression("t + 2*x")
    t = np.array([[0.0], [1.0]])
    x = np.array([0.0, 1.0, 2.0])
    out = evaluate(f, t, x)
    assert out.shape == (2, 3)
    np.testing.assert_array_equal(out, t + 2 * x)
    assert evaluate(parse_expression("3"), t, x).shape == (2, 3)


def test_functions_cover_min_max():
    assert evaluate(parse_expression("min(t, x) + max(t, x)"), 2.0, 5.0) == 7.0
    assert evaluate(parse_expression("abs(-x) + cos(0) + sin(0)"), 0.0, 3.0) == 4.0


@settings(max_examples=50, deadline=None)
@given(a0=st.floats(0.5, 3.0), a1=st.floats(-0.1, 0.1), g0=st.floats(0.01, 2.0),
       t=st.floats(0.0, 10.0), x=st.floats(0.0, 5.0))
def test_expression_agrees_with_gauss_band(a0, a1, g0, t, x):
    builtin = FieldSpec.gauss_band(a0, g0, a1)
    text = f"({a0!r} + {a1!r}*t) - 2*{g0!r}*x*exp(-x^2)"
    assert FieldSpec.expression(text).value(t, x) == pytest.approx(builtin.value(t, x), abs=1e-12)


numbers = st.floats(0.0, 1e6, allow_nan=False).map(Number)
leaves = st.one_of(numbers, st.sampled_from([Variable("t"), Variable("x")]))


def _extend(children):
    unary = [n for n, k in FUNCTIONS.items() if k == 1]
    binary = [n for n, k in FUNCTIONS.items() if k == 2]
    return st.one_of(
        children.map(Neg),
        st.builds(Binary, st.sampled_from("+-*/^"), children, children),
        st.builds(lambda f, a: Call(f, (a,)), st.sampled_from(unary), children),
        st.builds(lambda f, a, b: Call(f, (a, b)), st.sampled_from(binary), children, children),
    )


@settings(max_examples=200, deadline=None)
@given(st.recursive(leaves, _extend, max_leaves=12))
def test_print_parse_round_trip(ast):
    assert parse_expression(to_text(ast)) == ast


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="tx0123456789.+-*/^(), eaxpsinmcoqrtb", max_size=30))
def test_parsing_is_total(text):
    try:
        parse_expression(text)
    except (ExprSyntaxError, UnknownIdentifier):
        pass
