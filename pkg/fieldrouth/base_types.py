from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from itertools import combinations_with_replacement
from re import fullmatch
from typing import TypeAlias

from sympy import Basic, Derivative, Function, Symbol
from sympy import Expr as SympyExpr
from sympy.core.function import AppliedUndef

Expr: TypeAlias = SympyExpr

MAX_JET_ORDER = 2

ELEMENTARY_FUNCTIONS = ("sin", "cos", "exp", "tanh", "sech")
RESERVED_NAMES = (*ELEMENTARY_FUNCTIONS, "diff")

_COORDINATE_NAME = r"[A-Za-z][A-Za-z0-9]*"
_NAME = r"[A-Za-z][A-Za-z0-9_]*"


class SymbolKind(Enum):
    BASE = "base-coordinate"
    FIELD = "field"
    JET = "jet-coordinate"
    PARAMETER = "parameter"


@dataclass(frozen=True)
class SymbolInfo:
    """Describe a symbol of a :class:`Chart`.

    ``field`` and ``index`` are only set for jet coordinates. ``index`` holds the sorted
    positions of the base coordinates the field is differentiated by, so ``phi_tx`` and
    ``phi_xt`` share the same info.
    """

    name: str
    kind: SymbolKind
    field: str | None = None
    index: tuple[int, ...] = ()

    @property
    def order(self) -> int:
        return len(self.index)

    @property
    def symbol(self) -> Symbol:
        return Symbol(self.name)


class ChartError(ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Invalid chart: {reason}", reason)


class JetOrderError(ValueError):
    def __init__(self, what: object, order: int) -> None:
        self._order = order
        super().__init__(f"{what} requires jets of order {order}, "
                         f"but at most order {MAX_JET_ORDER} is supported", what, order)

    @property
    def order(self) -> int:
        return self._order


@dataclass(frozen=True)
class Chart:
    """The symbol table of an adapted coordinate chart on the second jet bundle.

    A chart consists of base coordinates ``x^1..x^m``, fields ``u^1..u^n``, their jet
    coordinates up to order two and free parameters. Jet names are derived mechanically from
    the field name and the names of the base coordinates, e.g. ``phi_t`` and ``phi_tx``.
    Parameters can be used as constants or applied as undefined functions, like
    ``mu_1(t, x)``.

    Example:
        >>> chart = Chart(("t", "x"), ("phi", "psi"))
        >>> chart.jet("phi", ("x", "t"))
        phi_tx
        >>> chart.lookup("phi_xt").index
        (0, 1)
    """

    base: tuple[str, ...]
    fields: tuple[str, ...]
    parameters: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.base:
            raise ChartError("at least one base coordinate is required")
        if bad := [n for n in self.base if not fullmatch(_COORDINATE_NAME, n)]:
            raise ChartError(f"base coordinate names must be alphanumeric: {bad}")
        if bad := [n for n in (*self.fields, *self.parameters) if not fullmatch(_NAME, n)]:
            raise ChartError(f"not an identifier: {bad}")
        if reserved := set(self.base + self.fields + self.parameters) & set(RESERVED_NAMES):
            raise ChartError(f"reserved names cannot be declared: {sorted(reserved)}")
        names = [info.name for info in self._infos()]
        if duplicates := sorted({n for n in names if names.count(n) > 1}):
            raise ChartError(f"names are not unique: {duplicates}")

    @property
    def m(self) -> int:
        return len(self.base)

    @cached_property
    def symbols(self) -> Mapping[str, SymbolInfo]:
        return {info.name: info for info in self._infos()}

    def _infos(self) -> Iterable[SymbolInfo]:
        yield from (SymbolInfo(name, SymbolKind.BASE) for name in self.base)
        yield from (SymbolInfo(name, SymbolKind.FIELD) for name in self.fields)
        for field in self.fields:
            for order in range(1, MAX_JET_ORDER + 1):
                for index in combinations_with_replacement(range(self.m), order):
                    yield SymbolInfo(self.jet_name(field, index), SymbolKind.JET, field, index)
        yield from (SymbolInfo(name, SymbolKind.PARAMETER) for name in self.parameters)

    def coordinate_index(self, coordinate: int | str) -> int:
        if isinstance(coordinate, int):
            if 0 <= coordinate < self.m:
                return coordinate
            raise ChartError(f"base coordinate index {coordinate} out of range")
        if coordinate not in self.base:
            raise ChartError(f"{coordinate} is not a base coordinate of {self.base}")
        return self.base.index(coordinate)

    def coordinate(self, coordinate: int | str) -> Symbol:
        return Symbol(self.base[self.coordinate_index(coordinate)])

    def coordinates(self) -> tuple[Symbol, ...]:
        return tuple(Symbol(name) for name in self.base)

    def field(self, name: str) -> Symbol:
        if name not in self.fields:
            raise ChartError(f"{name} is not a field of {self.fields}")
        return Symbol(name)

    def parameter(self, name: str) -> Symbol:
        if name not in self.parameters:
            raise ChartError(f"{name} is not a parameter of {self.parameters}")
        return Symbol(name)

    def apply(self, parameter: str, *arguments: Basic) -> Expr:
        self.parameter(parameter)
        applied: Expr = Function(parameter)(*arguments)
        return applied

    def jet_name(self, field: str, index: Iterable[int]) -> str:
        suffix = "".join(self.base[i] for i in sorted(index))
        return f"{field}_{suffix}" if suffix else field

    def jet(self, field: str, index: Iterable[int | str]) -> Symbol:
        """Return the jet symbol of ``field`` differentiated along the coordinates in ``index``.

        Raises:
            JetOrderError: if more than two derivatives are requested.
        """
        self.field(field)
        positions = tuple(sorted(self.coordinate_index(i) for i in index))
        if len(positions) > MAX_JET_ORDER:
            raise JetOrderError(f"{field} differentiated by {positions}", len(positions))
        return Symbol(self.jet_name(field, positions))

    def first_jets(self, field: str) -> tuple[Symbol, ...]:
        return tuple(self.jet(field, (i,)) for i in range(self.m))

    def split_jet_name(self, name: str) -> tuple[str, str] | None:
        """Split ``name`` into field and suffix if its head is a field of this chart."""
        if "_" not in name:
            return None
        head, suffix = name.rsplit("_", 1)
        return (head, suffix) if head in self.fields else None

    def lookup(self, name: str) -> SymbolInfo | None:
        """Return the info of a symbol name, accepting jet suffixes in any order."""
        if info := self.symbols.get(name):
            return info
        if split := self.split_jet_name(name):
            field, suffix = split
            decompositions = self._decompose_suffix(suffix)
            if len(decompositions) == 1:
                index = tuple(sorted(decompositions[0]))
                if len(index) > MAX_JET_ORDER:
                    raise JetOrderError(name, len(index))
                return self.symbols[self.jet_name(field, index)]
        return None

    def _decompose_suffix(self, suffix: str) -> list[tuple[int, ...]]:
        if not suffix:
            return [()]
        return [(i, *rest)
                for i, coordinate in enumerate(self.base) if suffix.startswith(coordinate)
                for rest in self._decompose_suffix(suffix[len(coordinate):])]

    def info(self, symbol: Basic) -> SymbolInfo | None:
        return self.symbols.get(symbol.name) if isinstance(symbol, Symbol) else None

    def generators(self) -> tuple[str, ...]:
        """Return the names whose differentials generate 1-forms, in the global generator order.

        The order is: base coordinates, fields, first jets (field by field).
        """
        return (*self.base, *self.fields,
                *(self.jet_name(field, (i,)) for field in self.fields for i in range(self.m)))

    def jet_order(self, e: Basic) -> int:
        """Return the highest jet order of a field symbol in ``e`` (-1 if no field occurs)."""
        orders = [info.order for s in e.free_symbols
                  if (info := self.info(s)) and info.kind in (SymbolKind.FIELD, SymbolKind.JET)]
        return max(orders, default=-1)

    def field_symbols(self, e: Basic, field: str) -> set[Symbol]:
        """Return the symbols of ``field`` (the field itself and its jets) occurring in ``e``."""
        return {s for s in e.free_symbols
                if (info := self.info(s))
                and (info.name == field and info.kind is SymbolKind.FIELD or info.field == field)}

    def applied_parameters(self, e: Basic) -> set[AppliedUndef]:
        return {f for f in e.atoms(AppliedUndef) if f.func.__name__ in self.parameters}

    def is_base_function(self, e: Basic) -> bool:
        """Return if ``e`` depends on base coordinates and parameters only."""
        allowed = {*self.base, *self.parameters}
        arguments_ok = all({s.name for s in f.free_symbols} <= set(self.base)
                           for f in e.atoms(AppliedUndef, Derivative))
        return {s.name for s in e.free_symbols} <= allowed and arguments_ok

    def extend(self, fields: Iterable[str] = (), parameters: Iterable[str] = ()) -> "Chart":
        return Chart(self.base, (*self.fields, *fields), (*self.parameters, *parameters))

    def restrict(self, fields: Iterable[str]) -> "Chart":
        kept = set(fields)
        return Chart(self.base, tuple(f for f in self.fields if f in kept), self.parameters)
