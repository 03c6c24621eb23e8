from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from logging import getLogger

from sympy import Basic, Derivative, Integer

from fieldrouth.base_types import Chart, Expr
from fieldrouth.expr import (canonical, diff_partial, print_expr, section_function,
                             total_derivative)
from fieldrouth.forms import DifferentialForm, HorizontalBasis, contact_form

logger = getLogger(__name__)


class ModelValidationError(ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Invalid field model: {reason}", reason)


ForceKey = tuple[str, str, str]


@dataclass(frozen=True)
class Force:
    """A π_10-basic (m+1)-form ``½F^j_ab du^a∧du^b∧η_j + F_a du^a∧η`` in coordinates.

    ``linear`` maps a field ``a`` to ``F_a``, ``gyroscopic`` maps ``(a, b, x^j)`` to ``F^j_ab``.
    Both orderings of every antisymmetric pair are stored; use :meth:`of` to imply the
    antisymmetric partners.
    """

    linear: Mapping[str, Expr] = field(default_factory=dict)
    gyroscopic: Mapping[ForceKey, Expr] = field(default_factory=dict)

    @staticmethod
    def of(linear: Mapping[str, Expr] | None = None,
           pairs: Mapping[ForceKey, Expr] | None = None) -> "Force":
        """Return a force from ``F_a`` and ``F^j_ab`` given for one ordering of each pair."""
        gyroscopic: dict[ForceKey, Expr] = {}
        for (a, b, coordinate), value in (pairs or {}).items():
            if a == b:
                raise ModelValidationError(f"force F^{coordinate}_{a}{b} must vanish")
            gyroscopic[a, b, coordinate] = canonical(value)
            gyroscopic[b, a, coordinate] = canonical(-value)
        return Force({a: canonical(value) for a, value in (linear or {}).items()}, gyroscopic)

    @property
    def is_zero(self) -> bool:
        return all(v == 0 for v in (*self.linear.values(), *self.gyroscopic.values()))

    def coefficients(self) -> Iterator[Expr]:
        yield from self.linear.values()
        yield from self.gyroscopic.values()

    def linear_term(self, a: str) -> Expr:
        return self.linear.get(a, Integer(0))

    def gyroscopic_term(self, a: str, b: str, coordinate: str) -> Expr:
        return self.gyroscopic.get((a, b, coordinate), Integer(0))

    def validate(self, chart: Chart) -> None:
        names = set(chart.fields)
        coordinates = set(chart.base)
        referenced = {*self.linear, *(a for a, _, _ in self.gyroscopic),
                      *(b for _, b, _ in self.gyroscopic)}
        if unknown := sorted(referenced - names):
            raise ModelValidationError(f"force references unknown fields {unknown}")
        if unknown := sorted({x for (_, _, x) in self.gyroscopic if x not in coordinates}):
            raise ModelValidationError(f"force references unknown base coordinates {unknown}")
        if jets := [print_expr(c) for c in self.coefficients() if chart.jet_order(c) > 0]:
            raise ModelValidationError(f"force coefficients must not contain jets: {jets}")
        for (a, b, x), value in self.gyroscopic.items():
            if canonical(value + self.gyroscopic_term(b, a, x)) != 0:
                raise ModelValidationError(
                    f"force is not antisymmetric: F^{x}_{a}{b} = {print_expr(value)}, "
                    f"F^{x}_{b}{a} = {print_expr(self.gyroscopic_term(b, a, x))}")

    def restrict(self, fields: Iterable[str]) -> "Force":
        kept = set(fields)
        return Force({a: v for a, v in self.linear.items() if a in kept},
                     {k: v for k, v in self.gyroscopic.items() if k[0] in kept and k[1] in kept})

    def touches(self, fields: Iterable[str]) -> bool:
        """Return if a non-zero coefficient is attached to one of ``fields``."""
        touched = set(fields)
        return (any(v != 0 for a, v in self.linear.items() if a in touched)
                or any(v != 0 for (a, b, _), v in self.gyroscopic.items()
                       if a in touched or b in touched))

    def __add__(self, other: "Force") -> "Force":
        linear = {a: canonical(self.linear_term(a) + other.linear_term(a))
                  for a in {*self.linear, *other.linear}}
        gyroscopic = {k: canonical(self.gyroscopic_term(*k) + other.gyroscopic_term(*k))
                      for k in {*self.gyroscopic, *other.gyroscopic}}
        return Force(linear, gyroscopic)

    def as_form(self, chart: Chart, basis: HorizontalBasis | None = None) -> DifferentialForm:
        basis = basis or HorizontalBasis.of(chart)
        result = DifferentialForm.zero(chart, chart.m + 1)
        for a, value in self.linear.items():
            result = result + DifferentialForm.d(chart, a).wedge(basis.eta).scale(value)
        for (a, b, x), value in self.gyroscopic.items():
            result = result + (DifferentialForm.d(chart, a).wedge(DifferentialForm.d(chart, b))
                               .wedge(basis.eta_i(x)).scale(value / 2))
        return result


@dataclass(frozen=True)
class FieldModel:
    """A first order Lagrangian field theory with an optional external force.

    Raises:
        ModelValidationError: if the Lagrangian contains second jets or the force is not
            antisymmetric or depends on jets.
    """

    chart: Chart
    lagrangian: Expr
    force: Force = field(default_factory=Force)

    def __post_init__(self) -> None:
        if (order := self.chart.jet_order(self.lagrangian)) > 1:
            raise ModelValidationError(
                f"Lagrangian {print_expr(self.lagrangian)} contains jets of order {order}")
        self.force.validate(self.chart)


@dataclass(frozen=True)
class ELSystem:
    """Euler–Lagrange residuals, one per field of the chart, in canonical form."""

    chart: Chart
    residuals: Mapping[str, Expr]

    def equations(self) -> Iterator[tuple[str, Expr]]:
        for name in self.chart.fields:
            yield name, self.residuals[name]

    def __getitem__(self, field_name: str) -> Expr:
        return self.residuals[field_name]

    def substitute(self, mapping: Mapping[Basic, Basic]) -> "ELSystem":
        return ELSystem(self.chart, {name: canonical(residual.subs(mapping))
                                     for name, residual in self.residuals.items()})


def force_term(model: FieldModel, a: str) -> Expr:
    """Return ``sum_b,j F^j_ab u^b_j + F_a``."""
    chart = model.chart
    return canonical(model.force.linear_term(a) + sum(
        (model.force.gyroscopic_term(a, b, x) * chart.jet(b, (x,))
         for b in chart.fields for x in chart.base), Integer(0)))


def legendre_multipliers(model: FieldModel) -> Mapping[tuple[str, str], Expr]:
    """Return ``p^i_a = ∂L/∂u^a_i`` keyed by field and base coordinate name."""
    chart = model.chart
    return {(a, x): diff_partial(model.lagrangian, chart.jet(a, (x,)))
            for a in chart.fields for x in chart.base}


def euler_lagrange(model: FieldModel) -> ELSystem:
    """Return the residuals ``D_k(∂L/∂u^a_k) - ∂L/∂u^a - F^j_ab u^b_j - F_a``.

    A section is critical if and only if all residuals vanish along its second prolongation.
    """
    chart = model.chart
    multipliers = legendre_multipliers(model)
    residuals = {}
    for a in chart.fields:
        residual = canonical(
            sum((total_derivative(multipliers[a, x], x, chart) for x in chart.base), Integer(0))
            - diff_partial(model.lagrangian, chart.field(a)) - force_term(model, a))
        logger.debug("Euler-Lagrange residual for %s: %s", a, print_expr(residual))
        residuals[a] = residual
    return ELSystem(chart, residuals)


def cartan_form(model: FieldModel) -> DifferentialForm:
    """Return ``Lη + p^i_a θ^a∧η_i`` with the multipliers replaced by ``∂L/∂u^a_i``."""
    chart = model.chart
    basis = HorizontalBasis.of(chart)
    result = basis.eta.scale(model.lagrangian)
    for (a, x), p in legendre_multipliers(model).items():
        result = result + contact_form(chart, a).wedge(basis.eta_i(x)).scale(p)
    return result


def multiplier_name(field_name: str, coordinate: str) -> str:
    return f"p_{field_name}_{coordinate}"


@dataclass(frozen=True)
class ImplicitELSystem:
    """The Euler–Lagrange equations in implicit form with independent multipliers.

    The multipliers ``p^k_a`` are parameters of ``chart`` applied to the base coordinates.
    ``legendre`` holds ``p^k_a - ∂L/∂u^a_k``, ``holonomy`` pairs each first jet with the
    derivative it stands for along a section, and ``balance`` holds
    ``D_k p^k_a - ∂L/∂u^a - F^j_ab u^b_j - F_a``.
    """

    model: FieldModel
    chart: Chart
    legendre: Mapping[tuple[str, str], Expr]
    holonomy: tuple[tuple[Expr, Expr], ...]
    balance: Mapping[str, Expr]

    def multiplier(self, field_name: str, coordinate: str) -> Expr:
        return self.chart.apply(multiplier_name(field_name, coordinate),
                                *self.chart.coordinates())

    def explicit(self) -> ELSystem:
        """Eliminate the multipliers with the Legendre relations."""
        multipliers = legendre_multipliers(self.model)
        replacements: dict[Basic, Basic] = {}
        for (a, x), p in multipliers.items():
            applied = self.multiplier(a, x)
            for y in self.chart.base:
                replacements[Derivative(applied, self.chart.coordinate(y))] = \
                    total_derivative(p, y, self.model.chart)
            replacements[applied] = p
        return ELSystem(self.model.chart, {a: canonical(e.xreplace(replacements))
                                           for a, e in self.balance.items()})


def implicit_euler_lagrange(model: FieldModel) -> ImplicitELSystem:
    chart = model.chart.extend(parameters=(multiplier_name(a, x) for a in model.chart.fields
                                           for x in model.chart.base))
    coordinates = chart.coordinates()
    multipliers = legendre_multipliers(model)

    def p(a: str, x: str) -> Expr:
        return chart.apply(multiplier_name(a, x), *coordinates)

    legendre = {(a, x): canonical(p(a, x) - value) for (a, x), value in multipliers.items()}
    holonomy = tuple((chart.jet(a, (x,)),
                      Derivative(section_function(chart, a), chart.coordinate(x)))
                     for a in chart.fields for x in chart.base)
    balance = {a: canonical(sum((total_derivative(p(a, x), x, chart) for x in chart.base),
                                Integer(0))
                            - diff_partial(model.lagrangian, chart.field(a))
                            - force_term(model, a))
               for a in chart.fields}
    logger.debug("Implicit Euler-Lagrange system with multipliers %s",
                 [multiplier_name(a, x) for a, x in multipliers])
    return ImplicitELSystem(model, chart, legendre, holonomy, balance)
