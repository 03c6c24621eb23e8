from collections.abc import Mapping
from dataclasses import dataclass, field
from logging import getLogger

from sympy import Basic, Derivative, Function, Integer, Symbol

from fieldrouth.base_types import Chart, Expr
from fieldrouth.expr import canonical, print_expr, total_derivative
from fieldrouth.forms import DifferentialForm, HorizontalBasis, coordinate_form
from fieldrouth.model import ELSystem, FieldModel, Force, euler_lagrange, legendre_multipliers
from fieldrouth.symmetry import (ClosednessVerdict, CyclicAction, MomentumValue,
                                 check_invariance, check_momentum_closed)

logger = getLogger(__name__)


class ConnectionValidationError(ValueError):
    def __init__(self, field_name: str, key: str, reason: str) -> None:
        self._field = field_name
        self._key = key
        super().__init__(f"Invalid connection coefficient Gamma^{field_name}_{key}: {reason}",
                         field_name, key, reason)

    @property
    def field(self) -> str:
        return self._field

    @property
    def key(self) -> str:
        return self._key


class ReductionConsistencyError(ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Reduction is inconsistent: {reason}", reason)


@dataclass(frozen=True)
class ConnectionData:
    """A principal connection ``ω^a = du^a - Γ^a_i dx^i - Γ^a_b du^b`` for translations.

    ``gamma`` maps a cyclic field and a base coordinate or non-cyclic field to its coefficient.
    Missing coefficients are zero, so an empty map is the flat connection.

    Raises:
        ConnectionValidationError: if a key is not a base coordinate or non-cyclic field or a
            coefficient depends on a cyclic field or on jets.
    """

    chart: Chart
    action: CyclicAction
    gamma: Mapping[tuple[str, str], Expr] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.action.validate(self.chart)
        non_cyclic = self.action.non_cyclic(self.chart)
        cyclic_symbols = [self.chart.field(a) for a in self.action.cyclic_fields]
        for (a, key), value in self.gamma.items():
            if a not in self.action.cyclic_fields:
                raise ConnectionValidationError(a, key, f"{a} is not a cyclic field")
            if key not in self.chart.base and key not in non_cyclic:
                raise ConnectionValidationError(
                    a, key, "key must be a base coordinate or a non-cyclic field")
            if offending := [s for s in cyclic_symbols if value.has(s)]:
                raise ConnectionValidationError(
                    a, key, f"{print_expr(value)} depends on cyclic field {offending[0]}")
            if self.chart.jet_order(value) > 0:
                raise ConnectionValidationError(a, key, f"{print_expr(value)} depends on jets")

    @staticmethod
    def flat(chart: Chart, action: CyclicAction) -> "ConnectionData":
        return ConnectionData(chart, action)

    @property
    def is_flat(self) -> bool:
        return all(v == 0 for v in self.gamma.values())

    def coefficient(self, a: str, key: str) -> Expr:
        return self.gamma.get((a, key), Integer(0))

    def connection_forms(self) -> Mapping[str, DifferentialForm]:
        return {a: coordinate_form(self.chart, {
            a: Integer(1),
            **{key: -self.coefficient(a, key)
               for key in (*self.chart.base, *self.action.non_cyclic(self.chart))}})
            for a in self.action.cyclic_fields}

    def horizontal_part(self, a: str, coordinate: str) -> Expr:
        """Return ``Γ^a_i + sum_b Γ^a_b u^b_i``, the part of ``u^a_i`` fixed by the connection."""
        return canonical(self.coefficient(a, coordinate) + sum(
            (self.coefficient(a, b) * self.chart.jet(b, (coordinate,))
             for b in self.action.non_cyclic(self.chart)), Integer(0)))


def sigma_name(field_name: str, coordinate: str, aliases: Mapping[str, str] | None = None) -> str:
    name = f"sigma_{field_name}_{coordinate}"
    return (aliases or {}).get(name, name)


def routhian(model: FieldModel, action: CyclicAction, connection: ConnectionData,
             mu: MomentumValue) -> Expr:
    """Return the Routhian ``R_μ`` defined by ``R_μ η = Lη - ε μ ∧ ω`` along prolonged sections.

    In coordinates ``R_μ = L - sum_a,i μ̂^i_a (u^a_i - Γ^a_i - Γ^a_b u^b_i)``.
    """
    chart = model.chart
    basis = HorizontalBasis.of(chart)
    mu = mu.on_chart(chart)
    pairing = DifferentialForm.zero(chart, chart.m)
    for a, omega in connection.connection_forms().items():
        pairing = pairing + mu.as_covector(a).wedge(omega.horizontalize())
    return canonical(model.lagrangian - basis.epsilon * basis.volume_coefficient(pairing))


@dataclass(frozen=True)
class GyroscopicForce:
    """The (m+1)-form ``dω_μ`` and its coefficients as a force on the non-cyclic fields."""

    form: DifferentialForm
    force: Force


def _extract_force(form: DifferentialForm, action: CyclicAction, strict: bool) -> GyroscopicForce:
    chart = form.chart
    non_cyclic = set(action.non_cyclic(chart))
    kept = []
    for key, value in form.terms:
        vertical = [g for g in key if g not in chart.base]
        if all(g in non_cyclic for g in vertical):
            kept.append((key, value))
        elif strict:
            raise ReductionConsistencyError(
                f"gyroscopic form has a component ({print_expr(value)})*{'∧'.join(key)} "
                "along cyclic fields or jets")
    shaped = DifferentialForm.build(chart, form.degree, kept)
    linear: dict[str, Expr] = {}
    pairs: dict[tuple[str, str, str], Expr] = {}
    for key, _ in shaped.terms:
        vertical = [g for g in key if g not in chart.base]
        horizontal = [x for x in key if x in chart.base]
        if len(vertical) == 1:
            linear[vertical[0]] = shaped.coefficient((vertical[0], *chart.base))
        elif len(vertical) == 2:
            j, = [i for i, x in enumerate(chart.base) if x not in horizontal]
            pairs[vertical[0], vertical[1], chart.base[j]] = \
                (-1) ** j * shaped.coefficient((*vertical, *horizontal))
    force = Force.of(linear, pairs)
    if force.as_form(chart) != shaped:
        raise ReductionConsistencyError(f"gyroscopic form {shaped} is not a force form")
    return GyroscopicForce(shaped, force)


def gyroscopic_force(action: CyclicAction, connection: ConnectionData, mu: MomentumValue,
                     verdict: ClosednessVerdict | None = None,
                     strict: bool = True) -> GyroscopicForce:
    """Return ``dω_μ`` with ``ω_μ = ε sum_a μ_a ∧ ω^a`` and its force coefficients.

    Args:
        action: the cyclic fields
        connection: the principal connection
        mu: the momentum value
        verdict: closedness rules imposed on the coefficients of ``dω_μ``. Computed with
            :func:`check_momentum_closed` if not given.
        strict: if ``True`` components along cyclic fields or jets are an error, otherwise
            they are dropped.
    Raises:
        ReductionConsistencyError: if ``dω_μ`` does not have the shape of a force on the
            non-cyclic fields.
    """
    chart = connection.chart
    basis = HorizontalBasis.of(chart)
    mu = mu.on_chart(chart)
    verdict = verdict or check_momentum_closed(mu)
    omega_mu = DifferentialForm.zero(chart, chart.m)
    for a, omega in connection.connection_forms().items():
        omega_mu = omega_mu + mu.as_covector(a).wedge(omega).scale(basis.epsilon)
    gyroscopic = _extract_force(omega_mu.exterior_derivative().map_coefficients(verdict.impose),
                                action, strict)
    logger.debug("Gyroscopic force form: %s", gyroscopic.form)
    return gyroscopic


@dataclass(frozen=True)
class ReducedModel:
    """The reduced field theory on the non-cyclic fields and the fields ``σ^a_i``.

    ``model`` carries the reduced Lagrangian ``R^red`` and the gyroscopic force together with
    the non-cyclic part of the original force. ``sigma`` maps a cyclic field and a base
    coordinate to the name of its reduced field.
    """

    model: FieldModel
    original: FieldModel
    action: CyclicAction
    connection: ConnectionData
    momentum: MomentumValue
    routhian: Expr
    sigma: Mapping[tuple[str, str], str]
    gyroscopic: GyroscopicForce
    verdict: ClosednessVerdict

    @property
    def lagrangian(self) -> Expr:
        return self.model.lagrangian

    def reconstruction_map(self) -> Mapping[Basic, Expr]:
        """Map reduced field symbols to ``σ^a_i = u^a_i - Γ^a_i - Γ^a_b u^b_i``."""
        chart = self.original.chart
        return {Symbol(name): canonical(chart.jet(a, (x,))
                                        - self.connection.horizontal_part(a, x))
                for (a, x), name in self.sigma.items()}


def _reduce(model: FieldModel, action: CyclicAction, connection: ConnectionData,
            mu: MomentumValue, verdict: ClosednessVerdict, aliases: Mapping[str, str] | None,
            strict: bool) -> ReducedModel:
    chart = model.chart
    non_cyclic = action.non_cyclic(chart)
    if model.force.touches(action.cyclic_fields):
        raise ReductionConsistencyError(f"the force acts on cyclic fields {action.cyclic_fields}")
    sigma = {(a, x): sigma_name(a, x, aliases) for a in action.cyclic_fields for x in chart.base}
    r_mu = routhian(model, action, connection, mu)
    substitution = {chart.jet(a, (x,)): Symbol(name) + connection.horizontal_part(a, x)
                    for (a, x), name in sigma.items()}
    reduced_lagrangian = canonical(r_mu.xreplace(substitution))
    cyclic_symbols = {s for a in action.cyclic_fields
                      for s in chart.field_symbols(reduced_lagrangian, a)}
    if cyclic_symbols:
        raise ReductionConsistencyError(
            f"reduced Lagrangian {print_expr(reduced_lagrangian)} depends on cyclic symbols "
            f"{sorted(map(str, cyclic_symbols))}")
    reduced_chart = Chart(chart.base, (*non_cyclic, *sigma.values()), chart.parameters)
    gyroscopic = gyroscopic_force(action, connection, mu, verdict, strict)
    force = model.force.restrict(non_cyclic) + gyroscopic.force
    reduced = FieldModel(reduced_chart, reduced_lagrangian, force)
    return ReducedModel(reduced, model, action, connection, mu, r_mu, sigma, gyroscopic, verdict)


def reduce_model(model: FieldModel, action: CyclicAction, connection: ConnectionData,
                 mu: MomentumValue, aliases: Mapping[str, str] | None = None) -> ReducedModel:
    """Reduce ``model`` by the cyclic translations at momentum value ``mu``.

    Substitutes ``u^a_i = σ^a_i + Γ^a_i + Γ^a_b u^b_i`` into the Routhian and attaches the
    gyroscopic force.

    Args:
        model: the invariant field model
        action: the cyclic fields
        connection: the principal connection used to split ``u^a_i``
        mu: a closed momentum value
        aliases: optional names for the reduced fields keyed by ``sigma_<field>_<coordinate>``
    Raises:
        InvarianceError: if the model is not invariant
        MomentumNotClosedError: if ``mu`` is not closed
        ReductionConsistencyError: if the reduction leaves cyclic symbols behind
    """
    check_invariance(model, action)
    verdict = check_momentum_closed(mu)
    reduced = _reduce(model, action, connection, mu, verdict, aliases, strict=True)
    logger.info("Reduced Lagrangian: %s", print_expr(reduced.lagrangian))
    return reduced


def reduced_euler_lagrange(reduced: ReducedModel) -> ELSystem:
    return euler_lagrange(reduced.model)


def _formal_momentum(chart: Chart, action: CyclicAction) -> MomentumValue:
    coordinates = chart.coordinates()
    return MomentumValue(chart, {a: tuple(Function(f"momentum_{a}_{x}")(*coordinates)
                                          for x in chart.base)
                                 for a in action.cyclic_fields})


def reduction_consistency(model: FieldModel, action: CyclicAction, connection: ConnectionData,
                          mu: MomentumValue) -> Mapping[str, Expr]:
    """Check that reduced solutions project from unreduced ones at the level of equations.

    The reduction is carried out for a formal momentum value whose components are undefined
    functions of the base. In the reduced residual of every non-cyclic field ``σ^a_i`` is
    replaced by ``u^a_i - Γ^a_i - Γ^a_b u^b_i`` and the formal momentum by the Legendre
    multipliers, as the momentum constraint requires. The result must equal the unreduced
    residual. ``mu`` itself is only checked for closedness, as the identity holds for every
    momentum value.

    Returns:
        the canonical remainders per non-cyclic field, all zero.
    Raises:
        ReductionConsistencyError: if a remainder does not vanish.
    """
    check_invariance(model, action)
    check_momentum_closed(mu)
    chart = model.chart
    formal = _formal_momentum(chart, action)
    reduced = _reduce(model, action, connection, formal, ClosednessVerdict({}), None,
                      strict=False)
    reduced_chart = reduced.model.chart
    multipliers = legendre_multipliers(model)
    reconstruction = reduced.reconstruction_map()
    replacements: dict[Basic, Expr] = {}
    for (a, x), name in reduced.sigma.items():
        value = reconstruction[Symbol(name)]
        replacements[Symbol(name)] = value
        for y in chart.base:
            replacements[reduced_chart.jet(name, (y,))] = total_derivative(value, y, chart)
        component = formal.component(a, x)
        for y in chart.base:
            replacements[Derivative(component, chart.coordinate(y))] = \
                total_derivative(multipliers[a, x], y, chart)
        replacements[component] = multipliers[a, x]
    unreduced = euler_lagrange(model)
    remainders = {b: canonical(residual.xreplace(replacements) - unreduced[b])
                  for b, residual in reduced_euler_lagrange(reduced).equations()
                  if b in action.non_cyclic(chart)}
    if nonzero := {b: r for b, r in remainders.items() if r != 0}:
        raise ReductionConsistencyError(", ".join(f"{b}: {print_expr(r)}"
                                                  for b, r in nonzero.items()))
    return remainders
