from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from re import finditer
from typing import Any

from sympy import (Basic, Derivative, Float, Function, Integer, Rational, Symbol, cancel, cos, cosh,
                   diff, exp, expand, lambdify, nan, oo, sech, sin, tanh, zoo)
from sympy.core.function import AppliedUndef
from sympy.printing.str import StrPrinter

from fieldrouth.base_types import (ELEMENTARY_FUNCTIONS, MAX_JET_ORDER, Chart, Expr, JetOrderError,
                                   SymbolKind)

_ELEMENTARY: Mapping[str, Callable[[Expr], Expr]] = dict(
    zip(ELEMENTARY_FUNCTIONS, (sin, cos, exp, tanh, sech))
)

_TOKEN_PATTERN = (r"(?P<number>\d+(?:\.\d+)?)|(?P<identifier>[A-Za-z][A-Za-z0-9_]*)"
                  r"|(?P<operator>[-+*/^(),])|(?P<space>\s+)|(?P<error>.)")


class ExprSyntaxError(ValueError):
    def __init__(self, text: str, position: int, reason: str) -> None:
        self._position = position
        super().__init__(f"Syntax error at position {position} in '{text}': {reason}",
                         text, position)

    @property
    def position(self) -> int:
        return self._position


class UnknownIdentifierError(ValueError):
    def __init__(self, name: str, position: int, reason: str | None = None) -> None:
        self._name = name
        super().__init__(f"Unknown identifier '{name}' at position {position}"
                         f"{f': {reason}' if reason else ''}", name, position)

    @property
    def name(self) -> str:
        return self._name


class EvaluationError(ValueError):
    def __init__(self, e: Basic, reason: str) -> None:
        super().__init__(f"Cannot evaluate {print_expr(e)}: {reason}", e)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    position: int


def _tokenize(text: str) -> Iterator[_Token]:
    for match in finditer(_TOKEN_PATTERN, text):
        kind = match.lastgroup
        assert kind
        if kind == "error":
            raise ExprSyntaxError(text, match.start(), f"unexpected character '{match.group()}'")
        if kind != "space":
            yield _Token(kind, match.group(), match.start())
    yield _Token("end", "", len(text))


class _Parser:
    """Recursive-descent parser for the expression grammar.

    ::

        expr     := term (('+'|'-') term)*
        term     := unary (('*'|'/') unary)*
        unary    := ('+'|'-') unary | power
        power    := base ('^' exponent)?
        exponent := '-'? integer | '(' '-'? integer ')'
        base     := number | identifier | identifier '(' expr (',' expr)* ')' | '(' expr ')'
    """

    def __init__(self, text: str, chart: Chart) -> None:
        self._text = text
        self._chart = chart
        self._tokens = list(_tokenize(text))
        self._pos = 0

    def parse(self) -> Expr:
        e = self._expr()
        self._expect("end")
        return e

    @property
    def _current(self) -> _Token:
        return self._tokens[self._pos]

    def _accept(self, *texts: str) -> _Token | None:
        token = self._current
        if token.kind == "operator" and token.text in texts:
            self._pos += 1
            return token
        return None

    def _expect(self, kind: str, text: str | None = None) -> _Token:
        token = self._current
        if token.kind != kind or (text is not None and token.text != text):
            expected = f"'{text}'" if text else kind
            found = f"'{token.text}'" if token.text else "end of input"
            raise ExprSyntaxError(self._text, token.position, f"expected {expected}, found {found}")
        self._pos += 1
        return token

    def _expr(self) -> Expr:
        e = self._term()
        while op := self._accept("+", "-"):
            right = self._term()
            e = e + right if op.text == "+" else e - right
        return e

    def _term(self) -> Expr:
        e = self._unary()
        while op := self._accept("*", "/"):
            right = self._unary()
            e = e * right if op.text == "*" else e / right
        return e

    def _unary(self) -> Expr:
        if op := self._accept("+", "-"):
            operand = self._unary()
            return operand if op.text == "+" else -operand
        return self._power()

    def _power(self) -> Expr:
        base = self._base()
        if self._accept("^"):
            return base ** self._exponent()
        return base

    def _exponent(self) -> int:
        parenthesized = self._accept("(") is not None
        sign = -1 if self._accept("-") else 1
        token = self._expect("number")
        if not token.text.isdigit():
            raise ExprSyntaxError(self._text, token.position, "exponent must be an integer")
        if parenthesized:
            self._expect("operator", ")")
        return sign * int(token.text)

    def _base(self) -> Expr:
        token = self._current
        if token.kind == "number":
            self._pos += 1
            return Rational(token.text)
        if token.kind == "identifier":
            self._pos += 1
            if self._accept("("):
                return self._application(token)
            return self._identifier(token)
        if self._accept("("):
            e = self._expr()
            self._expect("operator", ")")
            return e
        found = f"'{token.text}'" if token.text else "end of input"
        raise ExprSyntaxError(self._text, token.position, f"unexpected {found}")

    def _arguments(self) -> list[Expr]:
        arguments = [self._expr()]
        while self._accept(","):
            arguments.append(self._expr())
        self._expect("operator", ")")
        return arguments

    def _application(self, token: _Token) -> Expr:
        name = token.text
        arguments = self._arguments()
        if name in _ELEMENTARY:
            if len(arguments) != 1:
                raise ExprSyntaxError(self._text, token.position, f"{name} takes one argument")
            return _ELEMENTARY[name](arguments[0])
        if name == "diff":
            if len(arguments) < 2 or not all(isinstance(a, Symbol) for a in arguments[1:]):
                raise ExprSyntaxError(self._text, token.position,
                                      "diff takes an expression followed by symbols")
            result: Expr = diff(arguments[0], *arguments[1:])
            return result
        if name in self._chart.parameters:
            return self._chart.apply(name, *arguments)
        raise UnknownIdentifierError(name, token.position, "not a function or declared parameter")

    def _identifier(self, token: _Token) -> Expr:
        try:
            info = self._chart.lookup(token.text)
        except JetOrderError as e:
            raise UnknownIdentifierError(token.text, token.position, str(e)) from e
        if info:
            return info.symbol
        if split := self._chart.split_jet_name(token.text):
            raise UnknownIdentifierError(
                token.text, token.position,
                f"jet suffix '{split[1]}' does not consist of base coordinates {self._chart.base}")
        raise UnknownIdentifierError(token.text, token.position)


def parse_expr(text: str, chart: Chart) -> Expr:
    """Parse ``text`` into the canonical form of an expression over ``chart``.

    Identifiers resolve to the symbols of the chart. Field names followed by ``_`` and base
    coordinate names denote jet coordinates (``phi_tx`` equals ``phi_xt``), declared
    parameters may be applied like functions (``mu_1(t, x)``), and ``diff(e, t, ...)`` denotes
    a partial derivative.

    Args:
        text: the expression to parse
        chart: the symbol table identifiers are resolved in
    Returns:
        the expression in canonical form.
    Raises:
        ExprSyntaxError: if ``text`` does not conform to the grammar
        UnknownIdentifierError: if an identifier does not resolve in the chart

    Example:
        >>> from fieldrouth import Chart
        >>> chart = Chart(("t", "x"), ("phi",))
        >>> parse_expr("phi_tx - phi_xt + 1/2*phi_x^3", chart)
        phi_x**3/2
    """
    return canonical(_Parser(text, chart).parse())


def canonical(e: Basic | int) -> Expr:
    """Return the canonical form: sums and products flattened and collected, powers expanded."""
    expanded: Expr = expand(Integer(e) if isinstance(e, int) else e,
                            power_base=False, power_exp=False, log=False)
    return expanded


class _ExprPrinter(StrPrinter):
    # pylint: disable=invalid-name
    def _print_Pow(self, expr: Basic, rational: bool = False) -> str:  # noqa: N802
        printed: str = super()._print_Pow(expr, rational)
        return printed.replace("**", "^")

    def _print_Derivative(self, expr: Derivative) -> str:  # noqa: N802
        variables = ", ".join(self._print(v) for v, count in expr.variable_count
                              for _ in range(count))
        return f"diff({self._print(expr.expr)}, {variables})"


_PRINTER = _ExprPrinter()


def print_expr(e: Basic) -> str:
    """Print ``e`` deterministically in the syntax accepted by :func:`parse_expr`."""
    printed: str = _PRINTER.doprint(e)
    return printed


def diff_partial(e: Expr, s: Symbol) -> Expr:
    """Return the canonical partial derivative treating all other chart symbols as independent."""
    return canonical(diff(e, s))


def total_derivative(e: Expr, i: int | str, chart: Chart) -> Expr:
    """Return the total derivative ``D_i e`` along prolonged sections.

    ``D_i e = de/dx^i + u^a_i de/du^a + u^a_ij de/du^a_j``

    Raises:
        JetOrderError: if ``e`` contains second jets, as third jets would be required.
    """
    if chart.jet_order(e) >= MAX_JET_ORDER:
        raise JetOrderError(print_expr(e), MAX_JET_ORDER + 1)
    index = chart.coordinate_index(i)
    result = diff(e, chart.coordinate(index))
    for field in chart.fields:
        result += chart.jet(field, (index,)) * diff(e, chart.field(field))
        for j in range(chart.m):
            result += chart.jet(field, (index, j)) * diff(e, chart.jet(field, (j,)))
    return canonical(result)


def divergence(components: Sequence[Expr], chart: Chart) -> Expr:
    """Return ``sum_i D_i components[i]``."""
    return canonical(sum((total_derivative(c, i, chart) for i, c in enumerate(components)),
                         Integer(0)))


def evaluate(e: Expr, assignment: Mapping[Basic | str, float]) -> float:
    """Evaluate ``e`` in double precision.

    Args:
        e: the expression
        assignment: values for the symbols (or applied parameters) occurring in ``e``.
            Keys may be given by name.
    Returns:
        the value. A canonical zero evaluates to exactly ``0.0``.
    Raises:
        EvaluationError: if a symbol is not assigned or the expression is not defined
            at the given point.
    """
    if canonical(e) == 0:
        return 0.0
    replacements = {(Symbol(k) if isinstance(k, str) else k): Float(v)
                    for k, v in assignment.items()}
    value = e.xreplace(replacements)
    if missing := value.free_symbols | value.atoms(AppliedUndef):
        raise EvaluationError(e, f"missing assignment for {sorted(map(str, missing))}")
    if value.has(zoo, nan, oo, -oo):
        raise EvaluationError(e, "division by zero")
    result = complex(value.evalf())
    if result.imag:
        raise EvaluationError(e, f"value {result} is not real")
    return result.real


def section_function(chart: Chart, field: str) -> Expr:
    """Return the undefined function ``field(x^1, ..., x^m)`` standing for a section."""
    applied: Expr = Function(field)(*chart.coordinates())
    return applied


def on_section(e: Expr, chart: Chart) -> Expr:
    """Replace field and jet symbols by derivatives of undefined functions of the base.

    On a section, derivatives of any order are available, so the result can be differentiated
    beyond the jet order of the chart with :func:`sympy.diff`.
    """
    replacements: dict[Basic, Basic] = {}
    for s in e.free_symbols:
        info = chart.info(s)
        if info and info.kind is SymbolKind.FIELD:
            replacements[s] = section_function(chart, info.name)
        elif info and info.kind is SymbolKind.JET:
            assert info.field
            replacements[s] = Derivative(section_function(chart, info.field),
                                         *(chart.coordinate(i) for i in info.index))
    return canonical(e.subs(replacements))


def vanishes(e: Expr) -> bool:
    """Return if ``e`` is zero, also recognizing hyperbolic identities."""
    if canonical(e) == 0:
        return True
    return bool(cancel(canonical(e.rewrite(exp))) == 0)


def without_sech(e: Expr) -> Expr:
    replaced: Expr = e.replace(sech, lambda a: 1 / cosh(a))
    return replaced


def lambdify_expr(arguments: Sequence[Symbol], e: Expr) -> Callable[..., Any]:
    """Compile ``e`` into a numpy-vectorized function of ``arguments``."""
    compiled: Callable[..., Any] = lambdify(arguments, without_sech(e), modules="numpy")
    return compiled
