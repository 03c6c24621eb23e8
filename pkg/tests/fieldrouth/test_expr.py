import math
from math import isclose
from re import findall

from hypothesis import given, settings
from hypothesis.strategies import (DrawFn, booleans, composite, floats, integers, lists,
                                   sampled_from)
from pytest import mark, raises
from sympy import Derivative, Function, Integer, Rational, Symbol, cosh, sech, sinh

from fieldrouth import (Chart, EvaluationError, ExprSyntaxError, JetOrderError,
                        UnknownIdentifierError, canonical, divergence, evaluate, parse_expr,
                        print_expr, total_derivative)
from fieldrouth.base_types import Expr
from fieldrouth.expr import diff_partial, on_section, section_function, vanishes

chart = Chart(("t", "x"), ("phi", "psi"), ("c", "mu"))
t, x, phi, psi = (Symbol(n) for n in ("t", "x", "phi", "psi"))
phi_t, phi_x, psi_x = (Symbol(n) for n in ("phi_t", "phi_x", "psi_x"))


def test_parse_collects_equal_jets() -> None:
    assert parse_expr("phi_tx - phi_xt + 1/2*phi_x^3", chart) == phi_x ** 3 / 2


@mark.parametrize(
    ("text", "expected"),
    [
        ("2^3", Integer(8)),
        ("-phi^2", -phi ** 2),
        ("phi^(-1)", 1 / phi),
        ("1/2*phi_t*phi_x", phi_t * phi_x / 2),
        ("(phi + psi)^2", phi ** 2 + 2 * phi * psi + psi ** 2),
        ("0.5*phi", Rational(1, 2) * phi),
        ("sech(x)^2", sech(x) ** 2),
        ("mu(t, x)", Function("mu")(t, x)),
        ("diff(mu(t, x), x)", Derivative(Function("mu")(t, x), x)),
        ("c*phi", Symbol("c") * phi),
    ],
)
def test_parse(text: str, expected: Expr) -> None:
    assert canonical(parse_expr(text, chart) - expected) == 0


@mark.parametrize(
    ("text", "position"),
    [
        ("phi +", 5),
        ("phi $ psi", 4),
        ("(phi", 4),
        ("phi^1.5", 4),
        ("sin(phi, psi)", 0),
    ],
)
def test_syntax_errors(text: str, position: int) -> None:
    with raises(ExprSyntaxError) as e:
        parse_expr(text, chart)
    assert e.value.position == position


@mark.parametrize("text", ["chi", "phi_y", "nu(t)", "phi_txx"])
def test_unknown_identifiers(text: str) -> None:
    with raises(UnknownIdentifierError) as e:
        parse_expr(text, chart)
    assert e.value.name == text.split("(")[0]


@mark.parametrize(
    "text",
    ["phi_x^3/2 - psi*phi_t", "mu(t, x)*diff(mu(t, x), t, x)", "sech(x)^2 - c^(-2)*phi_tx"],
)
def test_printed_expressions_parse_back(text: str) -> None:
    e = parse_expr(text, chart)

    assert parse_expr(print_expr(e), chart) == e


def test_print_uses_caret() -> None:
    assert print_expr(parse_expr("phi^2", chart)) == "phi^2"


def test_total_derivative() -> None:
    e = parse_expr("t*phi*phi_x + psi", chart)

    expected = parse_expr("phi*phi_x + t*phi_t*phi_x + t*phi*phi_tx + psi_t", chart)
    assert total_derivative(e, "t", chart) == expected


def test_total_derivative_of_second_jets_fails() -> None:
    with raises(JetOrderError):
        total_derivative(parse_expr("phi_xx", chart), "t", chart)


def test_divergence() -> None:
    assert divergence([phi_x / 2, phi_t / 2], chart) == Symbol("phi_tx")


def test_evaluate() -> None:
    e = parse_expr("phi^2 + mu(t, x)", chart)

    assert isclose(evaluate(e, {"phi": 2.0, Function("mu")(t, x): 0.5}), 4.5)


def test_evaluate_canonical_zero_is_exact() -> None:
    assert evaluate(parse_expr("phi - phi", chart), {}) == 0.0


@mark.parametrize(
    ("text", "assignment"),
    [
        ("phi + psi", {"phi": 1.0}),
        ("1/phi", {"phi": 0.0}),
    ],
)
def test_evaluate_fails(text: str, assignment: dict[str, float]) -> None:
    with raises(EvaluationError):
        evaluate(parse_expr(text, chart), assignment)


def test_on_section_allows_higher_derivatives() -> None:
    e = on_section(parse_expr("phi_xx", chart), chart)

    phi_f = section_function(chart, "phi")
    assert canonical(e.diff(x) - phi_f.diff(x, 3)) == 0


def test_vanishes_recognizes_hyperbolic_identities() -> None:
    assert vanishes(cosh(x) ** 2 - sinh(x) ** 2 - 1)
    assert not vanishes(cosh(x) ** 2 + sinh(x) ** 2 - 1)


_monomials = [t, x, phi, psi, phi * psi, t * phi, x * psi, phi ** 2, psi ** 2 * x]


@composite
def zero_order_expressions(draw: DrawFn) -> Expr:
    coefficients = draw(lists(integers(-3, 3), min_size=1, max_size=4))
    monomials = draw(lists(sampled_from(_monomials), min_size=len(coefficients),
                           max_size=len(coefficients)))
    return canonical(sum((c * m for c, m in zip(coefficients, monomials, strict=True)),
                         Integer(0)))


@settings(max_examples=100, deadline=None)
@given(zero_order_expressions())
def test_total_derivatives_commute(e: Expr) -> None:
    assert (total_derivative(total_derivative(e, "t", chart), "x", chart)
            == total_derivative(total_derivative(e, "x", chart), "t", chart))


@mark.parametrize(
    ("text", "symbol", "expected"),
    [
        ("1/2*phi_t*phi_x + phi_x^3 + phi_x*psi_x + 1/2*psi^2", phi_t, "1/2*phi_x"),
        ("c", x, "0"),
        ("phi_x^3", phi_x, "3*phi_x^2"),
        ("mu(t, x)*phi", phi, "mu(t, x)"),
    ],
)
def test_diff_partial(text: str, symbol: Symbol, expected: str) -> None:
    assert diff_partial(parse_expr(text, chart), symbol) == parse_expr(expected, chart)


@mark.parametrize(("text", "assignment"), [("sech(0)", {}), ("sech(x)", {"x": 0.0})])
def test_evaluate_sech_at_zero(text: str, assignment: dict[str, float]) -> None:
    assert evaluate(parse_expr(text, chart), assignment) == 1.0


class _Calculator:
    """A small double precision interpreter for the expression language."""

    FUNCTIONS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "tanh": math.tanh,
                 "sech": lambda v: 1 / math.cosh(v)}

    def __init__(self, text: str, values: dict[str, float]) -> None:
        self._tokens = findall(r"\d+(?:\.\d+)?|[A-Za-z][A-Za-z0-9_]*|\S", text)
        self._pos = 0
        self._values = values

    def value(self) -> float:
        v = self._sum()
        assert self._pos == len(self._tokens)
        return v

    def _peek(self) -> str:
        return self._tokens[self._pos] if self._pos < len(self._tokens) else ""

    def _next(self) -> str:
        self._pos += 1
        return self._tokens[self._pos - 1]

    def _sum(self) -> float:
        v = self._product()
        while self._peek() in ("+", "-"):
            v = v + self._product() if self._next() == "+" else v - self._product()
        return v

    def _product(self) -> float:
        v = self._unary()
        while self._peek() in ("*", "/"):
            v = v * self._unary() if self._next() == "*" else v / self._unary()
        return v

    def _unary(self) -> float:
        if self._peek() in ("+", "-"):
            return self._unary() if self._next() == "+" else -self._unary()
        return self._power()

    def _power(self) -> float:
        base = self._atom()
        if self._peek() == "^":
            self._next()
            return float(base ** self._unary())
        return base

    def _atom(self) -> float:
        token = self._next()
        if token == "(":
            v = self._sum()
            assert self._next() == ")"
            return v
        if token in self.FUNCTIONS:
            assert self._next() == "("
            v = self._sum()
            assert self._next() == ")"
            return float(self.FUNCTIONS[token](v))
        if token[0].isdigit():
            return float(token)
        return self._values[token]


_LEAVES = ["phi", "psi", "t", "x", "phi_x", "psi_t", "2", "0.5"]


@composite
def expression_texts(draw: DrawFn, depth: int = 3) -> str:
    if depth == 0 or draw(booleans()):
        return draw(sampled_from(_LEAVES))
    match draw(integers(0, 3)):
        case 0:
            left, right = draw(expression_texts(depth - 1)), draw(expression_texts(depth - 1))
            operator = draw(sampled_from(["+", "-", "*"]))
            return f"({left} {operator} {right})"
        case 1:
            return f"({draw(expression_texts(depth - 1))})^2"
        case 2:
            return f"-{draw(expression_texts(depth - 1))}"
        case _:
            function = draw(sampled_from(["sin", "cos", "tanh", "sech"]))
            return f"{function}({draw(expression_texts(depth - 1))})"


_values = floats(-1.0, 1.0, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(expression_texts())
def test_canonical_is_idempotent(text: str) -> None:
    e = parse_expr(text, chart)

    assert canonical(e) == e


@settings(max_examples=100, deadline=None)
@given(expression_texts(), lists(_values, min_size=6, max_size=6))
def test_evaluate_agrees_with_calculator(text: str, values: list[float]) -> None:
    assignment = dict(zip(("phi", "psi", "t", "x", "phi_x", "psi_t"), values, strict=True))

    expected = _Calculator(text, assignment).value()

    assert isclose(evaluate(parse_expr(text, chart), assignment), expected,
                   rel_tol=1e-12, abs_tol=1e-12)


@settings(max_examples=50, deadline=None)
@given(expression_texts(), expression_texts(), integers(-3, 3), integers(-3, 3),
       sampled_from([phi, psi, x, phi_x]))
def test_diff_partial_is_linear(a_text: str, b_text: str, k: int, n: int, s: Symbol) -> None:
    a, b = parse_expr(a_text, chart), parse_expr(b_text, chart)

    assert canonical(diff_partial(k * a + n * b, s)
                     - k * diff_partial(a, s) - n * diff_partial(b, s)) == 0


@settings(max_examples=50, deadline=None)
@given(expression_texts(), expression_texts(), sampled_from([phi, psi, x, phi_x]))
def test_diff_partial_obeys_leibniz_rule(a_text: str, b_text: str, s: Symbol) -> None:
    a, b = parse_expr(a_text, chart), parse_expr(b_text, chart)

    assert canonical(diff_partial(a * b, s)
                     - diff_partial(a, s) * b - a * diff_partial(b, s)) == 0


@settings(max_examples=50, deadline=None)
@given(expression_texts(), expression_texts(), integers(-3, 3), integers(-3, 3),
       sampled_from(["t", "x"]))
def test_total_derivative_is_linear(a_text: str, b_text: str, k: int, n: int,
                                    coordinate: str) -> None:
    a, b = parse_expr(a_text, chart), parse_expr(b_text, chart)

    assert canonical(total_derivative(k * a + n * b, coordinate, chart)
                     - k * total_derivative(a, coordinate, chart)
                     - n * total_derivative(b, coordinate, chart)) == 0


@settings(max_examples=50, deadline=None)
@given(expression_texts(), expression_texts(), sampled_from(["t", "x"]))
def test_total_derivative_obeys_leibniz_rule(a_text: str, b_text: str, coordinate: str) -> None:
    a, b = parse_expr(a_text, chart), parse_expr(b_text, chart)

    assert canonical(total_derivative(a * b, coordinate, chart)
                     - total_derivative(a, coordinate, chart) * b
                     - a * total_derivative(b, coordinate, chart)) == 0
