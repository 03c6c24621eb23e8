from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from itertools import product

from sympy import Integer, Symbol, diff

from fieldrouth.base_types import MAX_JET_ORDER, Chart, Expr, JetOrderError, SymbolKind
from fieldrouth.expr import canonical, print_expr

Key = tuple[str, ...]


class FormError(ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Invalid differential form: {reason}", reason)


def _sort_key(chart: Chart, key: Sequence[str]) -> tuple[int, Key] | None:
    """Sort generator names into the global generator order.

    Returns:
        the sign of the permutation and the sorted key, or ``None`` if a generator repeats.
    """
    order = {name: i for i, name in enumerate(chart.generators())}
    if unknown := [g for g in key if g not in order]:
        raise FormError(f"{unknown} are not generators of {chart.generators()}")
    if len(set(key)) != len(key):
        return None
    positions = [order[g] for g in key]
    inversions = sum(1 for i, p in enumerate(positions) for q in positions[i + 1:] if p > q)
    return (-1) ** inversions, tuple(sorted(key, key=order.__getitem__))


@dataclass(frozen=True)
class DifferentialForm:
    """A differential form on the first jet bundle of a chart.

    Terms map strictly sorted generator lists to coefficients in canonical form. The
    generators are the differentials of base coordinates, fields and first jets. Zero
    coefficients are pruned, so the zero form of any degree has no terms.

    Use :meth:`build` to construct forms from unsorted terms.

    Example:
        >>> from fieldrouth import Chart
        >>> chart = Chart(("t", "x"), ("phi",))
        >>> print(DifferentialForm.d(chart, "x").wedge(DifferentialForm.d(chart, "t")))
        (-1)*dt∧dx
    """

    chart: Chart
    degree: int
    terms: tuple[tuple[Key, Expr], ...] = ()

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise FormError(f"negative degree {self.degree}")
        if bad := [key for key, _ in self.terms if len(key) != self.degree]:
            raise FormError(f"terms {bad} do not have degree {self.degree}")

    @staticmethod
    def build(chart: Chart, degree: int,
              terms: Iterable[tuple[Sequence[str], Expr]]) -> "DifferentialForm":
        collected: dict[Key, Expr] = {}
        for key, coefficient in terms:
            if (sorted_key := _sort_key(chart, key)) is None:
                continue
            sign, normalized = sorted_key
            collected[normalized] = collected.get(normalized, Integer(0)) + sign * coefficient
        order = {name: i for i, name in enumerate(chart.generators())}
        canonical_terms = ((key, canonical(c)) for key, c in collected.items())
        return DifferentialForm(chart, degree, tuple(sorted(
            ((key, c) for key, c in canonical_terms if c != 0),
            key=lambda term: [order[g] for g in term[0]])))

    @staticmethod
    def zero(chart: Chart, degree: int = 0) -> "DifferentialForm":
        return DifferentialForm(chart, degree)

    @staticmethod
    def scalar(chart: Chart, coefficient: Expr | int) -> "DifferentialForm":
        return DifferentialForm.build(chart, 0, [((), Integer(coefficient)
                                                  if isinstance(coefficient, int)
                                                  else coefficient)])

    @staticmethod
    def d(chart: Chart, generator: str) -> "DifferentialForm":
        """Return the 1-form ``d generator`` for a base coordinate, field or first jet name."""
        return DifferentialForm.build(chart, 1, [((generator,), Integer(1))])

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def components(self) -> Mapping[Key, Expr]:
        return dict(self.terms)

    def coefficient(self, generators: Sequence[str]) -> Expr:
        """Return the coefficient of the wedge product of ``generators`` in the given order."""
        if len(generators) != self.degree:
            raise FormError(f"{generators} does not have degree {self.degree}")
        if (sorted_key := _sort_key(self.chart, generators)) is None:
            return Integer(0)
        sign, key = sorted_key
        return canonical(sign * self.components().get(key, Integer(0)))

    def map_coefficients(self, f: Callable[[Expr], Expr]) -> "DifferentialForm":
        return DifferentialForm.build(self.chart, self.degree,
                                      ((key, f(c)) for key, c in self.terms))

    def scale(self, factor: Expr | int) -> "DifferentialForm":
        return self.map_coefficients(lambda c: factor * c)

    def _compatible(self, other: "DifferentialForm") -> None:
        if self.chart != other.chart:
            raise FormError("forms over different charts cannot be combined")

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        self._compatible(other)
        if other.is_zero:
            return self
        if self.is_zero:
            return other
        if self.degree != other.degree:
            raise FormError(f"cannot add forms of degree {self.degree} and {other.degree}")
        return DifferentialForm.build(self.chart, self.degree, (*self.terms, *other.terms))

    def __neg__(self) -> "DifferentialForm":
        return self.scale(-1)

    def __sub__(self, other: "DifferentialForm") -> "DifferentialForm":
        return self + -other

    def wedge(self, other: "DifferentialForm") -> "DifferentialForm":
        """Return the graded-antisymmetric product ``self ∧ other``.

        If the degrees exceed the number of generators, the zero form of the summed degree
        is returned.
        """
        self._compatible(other)
        degree = self.degree + other.degree
        if degree > len(self.chart.generators()):
            return DifferentialForm.zero(self.chart, degree)
        return DifferentialForm.build(
            self.chart, degree,
            ((key_a + key_b, a * b) for (key_a, a), (key_b, b) in product(self.terms,
                                                                          other.terms)))

    def exterior_derivative(self) -> "DifferentialForm":
        """Return ``d self`` with ``d(f dg) = sum_s df/ds ds ∧ dg`` over all generators ``s``.

        Raises:
            JetOrderError: if a coefficient contains second jets, as their differentials
                are not generators.
        """
        if any(self.chart.jet_order(c) >= MAX_JET_ORDER for _, c in self.terms):
            raise JetOrderError(f"d of {self}", MAX_JET_ORDER + 1)
        return DifferentialForm.build(
            self.chart, self.degree + 1,
            (((s, *key), diff(c, Symbol(s)))
             for key, c in self.terms for s in self.chart.generators()))

    def contract(self, generator: str) -> "DifferentialForm":
        """Return the interior product of the vector field dual to ``generator`` with this form."""
        return DifferentialForm.build(
            self.chart, max(self.degree - 1, 0),
            ((key[:i] + key[i + 1:], (-1) ** i * c)
             for key, c in self.terms for i, g in enumerate(key) if g == generator))

    def is_horizontal(self, k: int) -> bool:
        """Return if the form vanishes whenever ``k`` of its arguments are vertical."""
        base = set(self.chart.base)
        return all(sum(1 for g in key if g not in base) < k for key, _ in self.terms)

    def horizontalize(self) -> "DifferentialForm":
        """Return the pullback along prolonged sections.

        ``du^a`` becomes ``u^a_i dx^i`` and ``du^a_j`` becomes ``u^a_ij dx^i``.
        """
        result = DifferentialForm.zero(self.chart, self.degree)
        for key, c in self.terms:
            factors = [_horizontal_differential(self.chart, g) for g in key]
            term = DifferentialForm.scalar(self.chart, c)
            for factor in factors:
                term = term.wedge(factor)
            result = result + term
        return result

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        return " + ".join(f"({print_expr(c)})*{'∧'.join(f'd{g}' for g in key)}" if key
                          else f"({print_expr(c)})"
                          for key, c in self.terms)


def _horizontal_differential(chart: Chart, generator: str) -> DifferentialForm:
    info = chart.lookup(generator)
    assert info
    if info.kind is SymbolKind.BASE:
        return DifferentialForm.d(chart, generator)
    field = info.field or info.name
    return coordinate_form(chart, {coordinate: chart.jet(field, (*info.index, i))
                                   for i, coordinate in enumerate(chart.base)})


@dataclass(frozen=True)
class HorizontalBasis:
    """The volume form ``η = dx^1∧…∧dx^m`` and the basis ``η_i = ∂_i⌟η`` of horizontal (m-1)-forms.

    ``epsilon`` is the sign ``(-1)^(m-1)``. For ``m = 2`` with base ``(t, x)``,
    ``η_1 = dx`` and ``η_2 = -dt``. For ``m = 1`` ``η_1`` is the constant function ``1``.
    """

    chart: Chart
    eta: DifferentialForm
    etas: tuple[DifferentialForm, ...]
    epsilon: int

    @staticmethod
    def of(chart: Chart) -> "HorizontalBasis":
        eta = DifferentialForm.build(chart, chart.m, [(chart.base, Integer(1))])
        return HorizontalBasis(chart, eta, tuple(eta.contract(x) for x in chart.base),
                               (-1) ** (chart.m - 1))

    def eta_i(self, coordinate: int | str) -> DifferentialForm:
        return self.etas[self.chart.coordinate_index(coordinate)]

    def volume_coefficient(self, form: DifferentialForm) -> Expr:
        """Return ``f`` for an m-form ``f η``."""
        return form.coefficient(self.chart.base)


def coordinate_form(chart: Chart, coefficients: Mapping[str, Expr]) -> DifferentialForm:
    """Return the 1-form ``sum_k c_k d(k)`` for generator names ``k``."""
    return DifferentialForm.build(chart, 1, (((g,), c) for g, c in coefficients.items()))


def horizontal_form(basis: HorizontalBasis, components: Sequence[Expr]) -> DifferentialForm:
    """Return ``sum_i components[i] η_i``."""
    result = DifferentialForm.zero(basis.chart, basis.chart.m - 1)
    for component, eta_i in zip(components, basis.etas, strict=True):
        result = result + eta_i.scale(component)
    return result


def horizontal_components(basis: HorizontalBasis, form: DifferentialForm) -> tuple[Expr, ...]:
    """Return the coefficients of a horizontal (m-1)-form in the basis ``η_i``.

    Uses ``dx^j ∧ η_i = δ^j_i η``, so the i-th component is the volume coefficient of
    ``ε form ∧ dx^i``.
    """
    if form.degree != basis.chart.m - 1 or not form.is_horizontal(1):
        raise FormError(f"{form} is not a horizontal {basis.chart.m - 1}-form")
    return tuple(canonical(basis.epsilon * basis.volume_coefficient(
        form.wedge(DifferentialForm.d(basis.chart, x)))) for x in basis.chart.base)


def contact_form(chart: Chart, field: str) -> DifferentialForm:
    """Return ``θ^a = du^a - u^a_i dx^i``."""
    return coordinate_form(chart, {field: Integer(1),
                                   **{x: -jet for x, jet in zip(chart.base,
                                                               chart.first_jets(field))}})
