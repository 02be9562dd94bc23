"""Parser, formatter, differentiation and substitution behavior."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagrangeforge import (
    Abs,
    Antideriv,
    Const,
    Cos,
    Div,
    Exp,
    ExprSyntaxError,
    Ln,
    Mul,
    Neg,
    Pow,
    Sin,
    Sqrt,
    SubstitutionError,
    UnknownIdentifierError,
    Var,
    canonical,
    differentiate,
    differentiate_with_notes,
    evaluate,
    format_expression,
    free_vars,
    parse_expression,
    simplify,
    substitute,
)

X, V, T = Var("x"), Var("v"), Var("t")


class TestParsing:
    def test_number_forms(self):
        assert parse_expression("2") == Const(2.0)
        assert parse_expression("2.5e-3") == Const(0.0025)
        assert parse_expression(".5") == Const(0.5)

    def test_core_variables(self):
        assert parse_expression("x") == X
        assert parse_expression("v*t") == Mul(V, T)

    def test_params_must_be_declared(self):
        assert parse_expression("k*x", params=("k",)) == Mul(Var("k"), X)
        with pytest.raises(UnknownIdentifierError) as err:
            parse_expression("k*x")
        assert err.value.offset == 0

    def test_precedence(self):
        # 1 + 2*3^2 groups as 1 + (2*(3^2))
        assert evaluate(parse_expression("1 + 2*3^2"), {}) == 19.0

    def test_power_right_associative(self):
        assert evaluate(parse_expression("2^3^2"), {}) == 512.0

    def test_power_binds_tighter_than_unary_minus(self):
        assert evaluate(parse_expression("-2^2"), {}) == -4.0

    def test_subtraction_left_associative(self):
        assert evaluate(parse_expression("8 - 3 - 2"), {}) == 3.0

    def test_division_left_associative(self):
        assert evaluate(parse_expression("16 / 4 / 2"), {}) == 2.0

    def test_functions(self):
        e = parse_expression("exp(x) + ln(t) + sqrt(v) + abs(x) + sin(t) + cos(t)")
        assert evaluate(e, {"x": 0.0, "v": 4.0, "t": 1.0}) == pytest.approx(
            1.0 + 0.0 + 2.0 + 0.0 + math.sin(1.0) + math.cos(1.0)
        )

    def test_integral_form(self):
        e = parse_expression("integral(s, 0, s^2)", params=("s",))
        assert isinstance(e, Antideriv)
        assert e.var == "s"
        assert e.base == 0.0
        # the dummy is bound inside: not a required parameter of the integrand
        assert free_vars(e) == {"s"}

    def test_integral_negative_base(self):
        e = parse_expression("integral(t, -1.5, t)")
        assert e.base == -1.5

    def test_syntax_error_offset(self):
        with pytest.raises(ExprSyntaxError) as err:
            parse_expression("x + * v")
        assert err.value.offset == 4

    def test_unbalanced_parens(self):
        with pytest.raises(ExprSyntaxError):
            parse_expression("(x + v")

    def test_trailing_garbage(self):
        with pytest.raises(ExprSyntaxError):
            parse_expression("x + v)")

    def test_bad_character(self):
        with pytest.raises(ExprSyntaxError) as err:
            parse_expression("x @ v")
        assert err.value.offset == 2

    def test_unknown_function(self):
        with pytest.raises(UnknownIdentifierError):
            parse_expression("sinh(x)")

    def test_reserved_param_rejected(self):
        with pytest.raises(ValueError):
            parse_expression("x", params=("exp",))


class TestFormatting:
    def test_round_trip_simple(self):
        for text in [
            "x + v*t",
            "x - (v - t)",
            "x/(v*t)",
            "(x + v)^2",
            "2^x^2",
            "-x^2",
            "exp(-(x*t))",
            "integral(t, 0, t^2*x)",
        ]:
            e = parse_expression(text)
            assert parse_expression(format_expression(e)) == canonical(e)

    def test_subtraction_grouping(self):
        e = parse_expression("x - (v - t)")
        assert evaluate(
            parse_expression(format_expression(e)), {"x": 5.0, "v": 3.0, "t": 2.0}
        ) == 4.0

    def test_negative_constant(self):
        assert format_expression(Const(-2.0)) == "-2"
        assert parse_expression("-2") == Const(-2.0)


@st.composite
def expressions(draw, depth=0):
    if depth >= 4:
        leaf = draw(st.sampled_from(["x", "v", "t", "const"]))
        if leaf == "const":
            c = draw(st.floats(min_value=-9.0, max_value=9.0,
                               allow_nan=False, allow_infinity=False))
            return Const(c)
        return Var(leaf)
    kind = draw(st.sampled_from(
        ["leaf", "add", "sub", "mul", "div", "neg", "pow", "exp", "sin", "cos"]
    ))
    if kind == "leaf":
        return draw(expressions(depth=4))
    if kind in ("add", "sub", "mul", "div"):
        left = draw(expressions(depth=depth + 1))
        right = draw(expressions(depth=depth + 1))
        ctor = {"add": lambda a, b: a + b, "sub": lambda a, b: a - b,
                "mul": lambda a, b: a * b, "div": Div}[kind]
        return ctor(left, right)
    if kind == "neg":
        return Neg(draw(expressions(depth=depth + 1)))
    if kind == "pow":
        base = draw(expressions(depth=depth + 1))
        n = draw(st.integers(min_value=0, max_value=3))
        return Pow(base, Const(float(n)))
    op = draw(expressions(depth=depth + 1))
    return {"exp": Exp, "sin": Sin, "cos": Cos}[kind](op)


@settings(max_examples=200, deadline=None)
@given(expressions())
def test_format_parse_round_trip(expr):
    assert parse_expression(format_expression(expr)) == canonical(expr)


class TestDifferentiation:
    def test_polynomial(self):
        e = parse_expression("x^3 + 2*x")
        d = differentiate(e, "x")
        for xv in (-2.0, 0.0, 1.5):
            assert evaluate(d, {"x": xv}) == pytest.approx(3 * xv * xv + 2)

    def test_product_rule(self):
        d = differentiate(parse_expression("x*v^2"), "v")
        assert evaluate(d, {"x": 3.0, "v": 2.0}) == 12.0

    def test_quotient_rule(self):
        d = differentiate(parse_expression("x/t"), "t")
        assert evaluate(d, {"x": 6.0, "t": 2.0}) == pytest.approx(-1.5)

    def test_chain_rule(self):
        d = differentiate(parse_expression("exp(x^2)"), "x")
        assert evaluate(d, {"x": 1.0}) == pytest.approx(2.0 * math.e)

    def test_absent_variable_gives_zero(self):
        assert differentiate(parse_expression("v^2 + t"), "x") == Const(0.0)

    def test_general_power(self):
        # d/dx x^x = x^x (ln x + 1)
        d = differentiate(Pow(X, X), "x")
        assert evaluate(d, {"x": 2.0}) == pytest.approx(4.0 * (math.log(2.0) + 1.0))

    def test_abs_note(self):
        _, notes = differentiate_with_notes(Abs(X), "x")
        assert len(notes) == 1
        d = differentiate(Abs(X), "x")
        assert evaluate(d, {"x": -3.0}) == -1.0

    def test_integral_fundamental_theorem(self):
        e = Antideriv(Mul(T, T), "t", 0.0)
        d = differentiate(e, "t")
        assert evaluate(d, {"t": 2.0}) == pytest.approx(4.0)

    def test_integral_parameter_derivative(self):
        # d/dx of int_0^t x*s ds = t^2/2
        e = Antideriv(Mul(X, Var("s")), "s", 0.0)
        d = differentiate(e, "x")
        assert evaluate(d, {"x": 7.0, "s": 3.0}) == pytest.approx(4.5)

    def test_integral_no_dependence(self):
        e = Antideriv(Var("s"), "s", 0.0)
        assert differentiate(e, "x") == Const(0.0)


class TestSubstitution:
    def test_basic(self):
        e = parse_expression("k*x^2", params=("k",))
        assert substitute(e, "k", Const(3.0)) == parse_expression("3*x^2")

    def test_replace_with_expression(self):
        e = substitute(parse_expression("v^2"), "v", parse_expression("x + t"))
        assert evaluate(e, {"x": 1.0, "t": 2.0}) == 9.0

    def test_bound_variable_protected(self):
        e = Antideriv(Mul(Var("s"), X), "s", 0.0)
        with pytest.raises(SubstitutionError):
            substitute(e, "s", Const(1.0))

    def test_capture_rejected(self):
        e = Antideriv(Mul(Var("s"), X), "s", 0.0)
        with pytest.raises(SubstitutionError):
            substitute(e, "x", Var("s"))

    def test_untouched_subtree_shared(self):
        e = parse_expression("x^2 + v")
        assert substitute(e, "t", Const(0.0)) is e


class TestSimplify:
    def test_zero_and_one_identities(self):
        assert simplify(parse_expression("x*1 + 0")) == X
        assert simplify(parse_expression("0*v + x^1")) == X

    def test_constant_folding(self):
        assert simplify(parse_expression("2*3 + 4")) == Const(10.0)

    def test_self_subtraction(self):
        assert simplify(Mul(X, V) - Mul(X, V)) == Const(0.0)

    def test_ln_exp(self):
        assert simplify(Ln(Exp(X))) == X

    def test_guarded_folding(self):
        # 0^-1 stays symbolic instead of raising during simplify
        e = Pow(Const(0.0), Const(-1.0))
        assert simplify(e) == e


class TestStructure:
    def test_free_vars(self):
        e = parse_expression("integral(s, 0, s*x) + v", params=("s",))
        assert free_vars(e) == {"s", "x", "v"}

    def test_nesting_depth_cap(self):
        inner = Antideriv(Var("a"), "a", 0.0)
        mid = Antideriv(Mul(Var("b"), inner), "b", 0.0)
        with pytest.raises(ValueError):
            Antideriv(Mul(Var("c"), mid), "c", 0.0)

    def test_const_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Const(math.inf)

    def test_var_rejects_reserved(self):
        with pytest.raises(ValueError):
            Var("exp")
        with pytest.raises(ValueError):
            Var("2bad")

    def test_operator_sugar(self):
        e = 2.0 * X + 1.0
        assert evaluate(e, {"x": 3.0}) == 7.0
        e2 = X / 2.0 - 1.0
        assert evaluate(e2, {"x": 8.0}) == 3.0

    def test_sqrt_of_square_abs_semantics(self):
        e = Sqrt(Pow(X, Const(2.0)))
        assert evaluate(e, {"x": -3.0}) == 3.0
