from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from logging import getLogger

from sympy import Add, Basic, Derivative, Dummy, Integer, solve
from sympy.core.function import AppliedUndef

from fieldrouth.base_types import Chart, ChartError, Expr
from fieldrouth.expr import canonical, divergence, print_expr
from fieldrouth.forms import (DifferentialForm, HorizontalBasis, horizontal_components,
                              horizontal_form)
from fieldrouth.model import FieldModel, euler_lagrange, legendre_multipliers

logger = getLogger(__name__)


class InvarianceError(ValueError):
    def __init__(self, field_name: str, term: Basic | str) -> None:
        self._field = field_name
        printed = term if isinstance(term, str) else print_expr(term)
        super().__init__(f"Not invariant under translation of {field_name}: {printed}",
                         field_name, term)

    @property
    def field(self) -> str:
        return self._field


class MomentumNotClosedError(ValueError):
    def __init__(self, field_name: str, divergence_value: Expr) -> None:
        self._field = field_name
        super().__init__(f"Momentum value for {field_name} is not closed: "
                         f"divergence {print_expr(divergence_value)}", field_name, divergence_value)

    @property
    def field(self) -> str:
        return self._field


class MomentumValueError(ValueError):
    def __init__(self, field_name: str, reason: str) -> None:
        super().__init__(f"Invalid momentum value for {field_name}: {reason}", field_name, reason)


@dataclass(frozen=True)
class CyclicAction:
    """Translation of the cyclic fields by an abelian group ``R^k``, one generator per field."""

    cyclic_fields: tuple[str, ...]

    def validate(self, chart: Chart) -> None:
        if unknown := [a for a in self.cyclic_fields if a not in chart.fields]:
            raise ChartError(f"cyclic fields {unknown} are not fields of {chart.fields}")

    def non_cyclic(self, chart: Chart) -> tuple[str, ...]:
        return tuple(b for b in chart.fields if b not in self.cyclic_fields)


@dataclass(frozen=True)
class MomentumValue:
    """Per cyclic field the components ``μ̂^i_a`` of ``μ_a = sum_i μ̂^i_a η_i``.

    Components depend on base coordinates and parameters only.
    """

    chart: Chart
    components: Mapping[str, tuple[Expr, ...]]

    def __post_init__(self) -> None:
        for a, values in self.components.items():
            if len(values) != self.chart.m:
                raise MomentumValueError(
                    a, f"expected {self.chart.m} components, got {len(values)}")
            if bad := [print_expr(v) for v in values if not self.chart.is_base_function(v)]:
                raise MomentumValueError(a, f"components must only depend on base coordinates: "
                                            f"{bad}")

    @staticmethod
    def zero(chart: Chart, fields: Iterable[str]) -> "MomentumValue":
        return MomentumValue(chart, {a: (Integer(0),) * chart.m for a in fields})

    @staticmethod
    def from_covector(chart: Chart, forms: Mapping[str, DifferentialForm]) -> "MomentumValue":
        """Convert horizontal (m-1)-forms, e.g. ``μ_1 dt + μ_2 dx``, to ``η_i`` components."""
        basis = HorizontalBasis.of(chart)
        return MomentumValue(chart, {a: horizontal_components(basis, form)
                                     for a, form in forms.items()})

    def component(self, field_name: str, coordinate: int | str) -> Expr:
        values = self.components.get(field_name)
        return values[self.chart.coordinate_index(coordinate)] if values else Integer(0)

    def as_covector(self, field_name: str) -> DifferentialForm:
        """Return ``μ_a`` as a form in the coordinate differentials of the base."""
        return horizontal_form(HorizontalBasis.of(self.chart),
                               [self.component(field_name, i) for i in range(self.chart.m)])

    def on_chart(self, chart: Chart) -> "MomentumValue":
        return MomentumValue(chart, self.components)


@dataclass(frozen=True)
class ClosednessVerdict:
    """The divergences ``sum_i ∂μ̂^i_a/∂x^i`` of a momentum value.

    Divergences that only vanish by virtue of relations between derivatives of undefined
    parameter functions are resolved into substitution ``rules`` for one derivative each.
    """

    divergences: Mapping[str, Expr]
    rules: Mapping[Basic, Expr] = field(default_factory=dict)

    @property
    def closed(self) -> bool:
        return all(d == 0 for d in self.divergences.values())

    def impose(self, e: Expr) -> Expr:
        return canonical(e.subs(self.rules)) if self.rules else e

    def __str__(self) -> str:
        if self.closed:
            return "closed"
        return "closed if " + ", ".join(f"{print_expr(lhs)} = {print_expr(rhs)}"
                                        for lhs, rhs in self.rules.items())


def check_invariance(model: FieldModel, action: CyclicAction) -> None:
    """Check that translating cyclic fields leaves Lagrangian and force unchanged.

    Raises:
        InvarianceError: with the offending terms if a cyclic field occurs undifferentiated.
    """
    chart = model.chart
    action.validate(chart)
    for a in action.cyclic_fields:
        symbol = chart.field(a)
        if offending := [t for t in Add.make_args(model.lagrangian) if t.has(symbol)]:
            raise InvarianceError(a, Add(*offending))
        if offending := [c for c in model.force.coefficients() if c.has(symbol)]:
            raise InvarianceError(a, offending[0])
    logger.debug("Model is invariant under translation of %s", action.cyclic_fields)


def momentum_map(model: FieldModel,
                 action: CyclicAction) -> Mapping[str, DifferentialForm]:
    """Return ``J_a = sum_i p^i_a η_i`` for every cyclic field ``a``."""
    basis = HorizontalBasis.of(model.chart)
    multipliers = legendre_multipliers(model)
    return {a: horizontal_form(basis, [multipliers[a, x] for x in model.chart.base])
            for a in action.cyclic_fields}


def _closedness_rule(mu: MomentumValue, a: str, div: Expr) -> tuple[Basic, Expr] | None:
    chart = mu.chart
    for i in reversed(range(chart.m)):
        derivatives = canonical(mu.component(a, i).diff(chart.coordinate(i))).atoms(Derivative)
        for target in sorted((d for d in derivatives
                              if isinstance(d.expr, AppliedUndef) and div.has(d)), key=str):
            if len(solutions := solve(div, target)) == 1:
                return target, canonical(solutions[0])
    return None


def check_momentum_closed(mu: MomentumValue) -> ClosednessVerdict:
    """Check that every ``μ_a`` is closed, i.e. ``sum_i ∂μ̂^i_a/∂x^i = 0``.

    For components built from undefined parameter functions the divergence is resolved into
    a substitution rule, e.g. ``diff(mu_1(t, x), x) = diff(mu_2(t, x), t)``.

    Raises:
        MomentumNotClosedError: if a divergence does not vanish and cannot be resolved.
    """
    divergences = {a: divergence(values, mu.chart) for a, values in mu.components.items()}
    rules: dict[Basic, Expr] = {}
    for a, div in divergences.items():
        if div == 0:
            continue
        if (rule := _closedness_rule(mu, a, canonical(div.subs(rules)))) is None:
            raise MomentumNotClosedError(a, div)
        rules[rule[0]] = rule[1]
    verdict = ClosednessVerdict(divergences, rules)
    logger.info("Momentum value is %s", verdict)
    return verdict


def momentum_constraint(model: FieldModel, action: CyclicAction,
                        mu: MomentumValue) -> Mapping[tuple[str, str], Expr]:
    """Return the level set equations ``∂L/∂u^a_i - μ̂^i_a = 0`` keyed by field and coordinate."""
    multipliers = legendre_multipliers(model)
    return {(a, x): canonical(multipliers[a, x] - mu.component(a, x))
            for a in action.cyclic_fields for x in model.chart.base}


def check_equivariance(model: FieldModel, action: CyclicAction) -> None:
    """Check that translating the cyclic fields by constants leaves every multiplier unchanged.

    Raises:
        InvarianceError: with the first multiplier that changes.
    """
    chart = model.chart
    shift = {chart.field(a): chart.field(a) + Dummy(f"c_{a}") for a in action.cyclic_fields}
    for (a, x), p in legendre_multipliers(model).items():
        if canonical(p.xreplace(shift)) != p:
            raise InvarianceError(a, f"p^{x}_{a} = {print_expr(p)}")


def noether_identity(model: FieldModel, action: CyclicAction) -> Mapping[str, Expr]:
    """Return per cyclic field the Euler–Lagrange residual minus ``sum_i D_i p^i_a``.

    For invariant models without force acting on the cyclic field every entry is zero, so the
    momentum current is conserved along solutions.
    """
    residuals = euler_lagrange(model)
    multipliers = legendre_multipliers(model)
    return {a: canonical(residuals[a] - divergence([multipliers[a, x] for x in model.chart.base],
                                                   model.chart))
            for a in action.cyclic_fields}
