from hypothesis import given, settings
from hypothesis.strategies import DrawFn, composite, integers, lists, sampled_from
from pytest import FixtureRequest, mark, raises
from sympy import Integer, Symbol, prod

from fieldrouth import (Chart, ConnectionData, ConnectionValidationError, CyclicAction,
                        FieldModel, Force, ModelFile, MomentumValue, ReducedModel,
                        ReductionConsistencyError, canonical, gyroscopic_force, parse_expr,
                        reduce_model, reduced_euler_lagrange, reduction_consistency, routhian,
                        shipped_model, total_derivative)
from fieldrouth.base_types import Expr
from fieldrouth.forms import coordinate_form
from fieldrouth.model_file import parse_model_file
from tests.fieldrouth.assertions import assert_equivalent


def test_flat_reduced_lagrangian(flat_reduced: ReducedModel) -> None:
    assert flat_reduced.model.chart.fields == ("psi", "sigma", "rho")
    assert flat_reduced.sigma == {("phi", "t"): "sigma", ("phi", "x"): "rho"}
    assert_equivalent(flat_reduced.lagrangian,
                      "1/2*sigma*rho + rho^3 + rho*psi_x + 1/2*psi^2"
                      " - mu_2(t, x)*sigma + mu_1(t, x)*rho",
                      flat_reduced.model.chart)


@mark.parametrize("field_name, expected", [
    ("psi", "rho_x - psi"),
    ("sigma", "mu_2(t, x) - 1/2*rho"),
    ("rho", "-1/2*sigma - 3*rho^2 - psi_x - mu_1(t, x)"),
])
def test_flat_reduced_euler_lagrange(flat_reduced: ReducedModel, field_name: str,
                                     expected: str) -> None:
    assert_equivalent(reduced_euler_lagrange(flat_reduced)[field_name], expected,
                      flat_reduced.model.chart)


def test_flat_connection_has_no_gyroscopic_force(flat_reduced: ReducedModel) -> None:
    assert flat_reduced.gyroscopic.form.is_zero
    assert flat_reduced.gyroscopic.force.is_zero


def test_flat_reconstruction_map(flat_reduced: ReducedModel) -> None:
    assert flat_reduced.reconstruction_map() == {Symbol("sigma"): Symbol("phi_t"),
                                                 Symbol("rho"): Symbol("phi_x")}


def test_routhian_with_general_connection(general_file: ModelFile) -> None:
    value = routhian(general_file.model, general_file.action, general_file.connection,
                     general_file.momentum)

    assert_equivalent(value,
                      "1/2*phi_t*phi_x + phi_x^3 + phi_x*psi_x + 1/2*psi^2"
                      " - mu_2(t, x)*(phi_t - Gamma_t(t, x) - Gamma_psi(t, x)*psi_t)"
                      " + mu_1(t, x)*(phi_x - Gamma_x(t, x) - Gamma_psi(t, x)*psi_x)",
                      general_file.chart)


def test_routhian_at_zero_momentum_is_lagrangian(kdv_file: ModelFile,
                                                 general_connection: ConnectionData) -> None:
    zero = MomentumValue.zero(kdv_file.chart, ("phi",))

    for connection in (kdv_file.connection, general_connection):
        assert canonical(routhian(kdv_file.model, kdv_file.action, connection, zero)
                         - kdv_file.model.lagrangian) == 0


def test_gyroscopic_force_of_general_connection(general_file: ModelFile) -> None:
    gyroscopic = gyroscopic_force(general_file.action, general_file.connection,
                                  general_file.momentum)

    assert set(gyroscopic.force.linear) == {"psi"}
    assert not gyroscopic.force.gyroscopic
    assert_equivalent(gyroscopic.force.linear["psi"],
                      "mu_2(t, x)*diff(Gamma_psi(t, x), t) - mu_1(t, x)*diff(Gamma_psi(t, x), x)",
                      general_file.chart)


def test_general_connection_reduces_with_gyroscopic_force(general_file: ModelFile) -> None:
    reduced = reduce_model(general_file.model, general_file.action, general_file.connection,
                           general_file.momentum, general_file.aliases)

    assert not reduced.gyroscopic.form.is_zero
    assert reduced.model.force.linear_term("psi") == reduced.gyroscopic.force.linear["psi"]
    assert_equivalent(reduced.reconstruction_map()[Symbol("sigma")],
                      "phi_t - Gamma_t(t, x) - Gamma_psi(t, x)*psi_t", general_file.chart)


_GENERAL_A = "(sigma + Gamma_t(t, x) + Gamma_psi(t, x)*psi_t)"
_GENERAL_B = "(rho + Gamma_x(t, x) + Gamma_psi(t, x)*psi_x)"


def test_general_reduced_lagrangian(general_file: ModelFile) -> None:
    reduced = reduce_model(general_file.model, general_file.action, general_file.connection,
                           general_file.momentum, general_file.aliases)

    assert_equivalent(reduced.lagrangian,
                      f"1/2*{_GENERAL_A}*{_GENERAL_B} + {_GENERAL_B}^3 + {_GENERAL_B}*psi_x"
                      " + 1/2*psi^2 + mu_1(t, x)*rho - mu_2(t, x)*sigma",
                      reduced.model.chart)


@mark.parametrize("field_name, expected", [
    ("sigma", f"-1/2*({_GENERAL_B} - 2*mu_2(t, x))"),
    ("rho", f"-1/2*({_GENERAL_A} + 6*{_GENERAL_B}^2 + 2*psi_x + 2*mu_1(t, x))"),
])
def test_general_reduced_algebraic_equations(general_file: ModelFile, field_name: str,
                                             expected: str) -> None:
    reduced = reduce_model(general_file.model, general_file.action, general_file.connection,
                           general_file.momentum, general_file.aliases)

    assert_equivalent(reduced_euler_lagrange(reduced)[field_name], expected,
                      reduced.model.chart)


def test_general_reduced_equation_of_psi(general_file: ModelFile) -> None:
    reduced = reduce_model(general_file.model, general_file.action, general_file.connection,
                           general_file.momentum, general_file.aliases)
    chart = reduced.model.chart
    a, b = parse_expr(_GENERAL_A, chart), parse_expr(_GENERAL_B, chart)
    gamma_psi = parse_expr("Gamma_psi(t, x)", chart)
    momentum_t = gamma_psi * b / 2
    momentum_x = gamma_psi * a / 2 + 3 * gamma_psi * b ** 2 + gamma_psi * Symbol("psi_x") + b
    force = parse_expr("mu_2(t, x)*diff(Gamma_psi(t, x), t)"
                       " - mu_1(t, x)*diff(Gamma_psi(t, x), x)", chart)

    expected = (total_derivative(momentum_t, "t", chart)
                + total_derivative(momentum_x, "x", chart) - Symbol("psi") - force)
    assert canonical(reduced_euler_lagrange(reduced)["psi"] - expected) == 0


def test_gyroscopic_force_of_linear_connection(kdv_file: ModelFile) -> None:
    chart = kdv_file.chart
    connection = ConnectionData(chart, kdv_file.action, {("phi", "psi"): Symbol("x")})
    mu = MomentumValue.from_covector(chart, {"phi": coordinate_form(
        chart, {"t": Integer(1), "x": Integer(0)})})

    gyroscopic = gyroscopic_force(kdv_file.action, connection, mu)

    assert gyroscopic.form.coefficient(("t", "x", "psi")) == -1
    assert gyroscopic.force.linear == {"psi": -1}


def test_gyroscopic_force_of_field_dependent_connection(
        field_dependent_file: ModelFile) -> None:
    gyroscopic = gyroscopic_force(field_dependent_file.action, field_dependent_file.connection,
                                  field_dependent_file.momentum)

    assert_equivalent(gyroscopic.form.coefficient(("t", "x", "psi")),
                      "mu_2(t, x)*diff(Gamma_psi(t, x, psi), t)"
                      " - mu_1(t, x)*diff(Gamma_psi(t, x, psi), x)"
                      " + mu_1(t, x)*diff(Gamma_x(t, x, psi), psi)"
                      " - mu_2(t, x)*diff(Gamma_t(t, x, psi), psi)",
                      field_dependent_file.chart)


def test_field_dependent_connection_reduction_is_consistent(
        field_dependent_file: ModelFile) -> None:
    assert reduction_consistency(field_dependent_file.model, field_dependent_file.action,
                                 field_dependent_file.connection,
                                 field_dependent_file.momentum) == {"psi": 0}


_kdv_source = parse_model_file(shipped_model("kdv"))


@settings(max_examples=100, deadline=None)
@given(integers(-5, 5), integers(-5, 5))
def test_constant_momentum_has_no_gyroscopic_force(mu_t: int, mu_x: int) -> None:
    mu = MomentumValue.from_covector(_kdv_source.chart, {"phi": coordinate_form(
        _kdv_source.chart, {"t": Integer(mu_t), "x": Integer(mu_x)})})

    gyroscopic = gyroscopic_force(_kdv_source.action, _kdv_source.connection, mu)

    assert gyroscopic.form.is_zero
    assert gyroscopic.force.is_zero


_invariant_factors = [Symbol(n) for n in ("t", "x", "psi", "phi_t", "phi_x", "psi_t", "psi_x")]


@composite
def invariant_lagrangians(draw: DrawFn) -> Expr:
    coefficients = draw(lists(integers(-3, 3), min_size=1, max_size=4))
    terms = draw(lists(lists(sampled_from(_invariant_factors), min_size=1, max_size=3),
                       min_size=len(coefficients), max_size=len(coefficients)))
    return canonical(sum((c * prod(t) for c, t in zip(coefficients, terms, strict=True)),
                         Integer(0)))


@settings(max_examples=100, deadline=None)
@given(invariant_lagrangians())
def test_routhian_at_zero_momentum_is_any_invariant_lagrangian(lagrangian: Expr) -> None:
    chart, action = _kdv_source.chart, _kdv_source.action
    connection = ConnectionData(chart, action, {("phi", "t"): Symbol("t") * Symbol("x"),
                                                ("phi", "psi"): Symbol("x")})

    assert canonical(routhian(FieldModel(chart, lagrangian), action, connection,
                              MomentumValue.zero(chart, ("phi",))) - lagrangian) == 0


@mark.parametrize("fixture_name", ["kdv_file", "general_file"])
def test_reduction_is_consistent(fixture_name: str, request: FixtureRequest) -> None:
    source: ModelFile = request.getfixturevalue(fixture_name)

    assert reduction_consistency(source.model, source.action, source.connection,
                                 source.momentum) == {"psi": 0}


def test_wave_reduced_lagrangian(wave_file: ModelFile) -> None:
    reduced = reduce_model(wave_file.model, wave_file.action, wave_file.connection,
                           wave_file.momentum, wave_file.aliases)

    assert_equivalent(reduced.lagrangian,
                      "1/2*sigma_phi_t^2 + 1/2*sigma_phi_x^2 + 1/2*psi_t^2 - 1/2*psi_x^2"
                      " - m1*sigma_phi_t - m2*sigma_phi_x", reduced.model.chart)


@mark.parametrize("field_name, expected", [
    ("psi", "psi_tt - psi_xx"),
    ("sigma_phi_t", "m1 - sigma_phi_t"),
    ("sigma_phi_x", "m2 - sigma_phi_x"),
])
def test_wave_reduced_equations(wave_file: ModelFile, field_name: str, expected: str) -> None:
    reduced = reduce_model(wave_file.model, wave_file.action, wave_file.connection,
                           wave_file.momentum, wave_file.aliases)

    assert_equivalent(reduced_euler_lagrange(reduced)[field_name], expected,
                      reduced.model.chart)


def test_wave_reduction_is_consistent(wave_file: ModelFile) -> None:
    assert reduction_consistency(wave_file.model, wave_file.action, wave_file.connection,
                                 wave_file.momentum) == {"psi": 0}


@mark.parametrize("gamma", [{}, {("u", "v"): Symbol("x")}], ids=["flat", "curved"])
def test_coupled_wave_reduction_is_consistent(gamma: dict[tuple[str, str], Symbol]) -> None:
    chart = Chart(("t", "x"), ("u", "v"), ("c",))
    model = FieldModel(chart, parse_expr(
        "1/2*u_t^2 - 1/2*c^2*u_x^2 + u_x*v - 1/2*v^2 - 1/2*v_x^2", chart))
    action = CyclicAction(("u",))

    assert reduction_consistency(model, action, ConnectionData(chart, action, gamma),
                                 MomentumValue.zero(chart, ("u",))) == {"v": 0}


def test_force_on_cyclic_field_cannot_be_reduced(kdv_file: ModelFile) -> None:
    model = FieldModel(kdv_file.chart, kdv_file.model.lagrangian, Force.of({"phi": Symbol("t")}))

    with raises(ReductionConsistencyError, match="cyclic fields"):
        reduce_model(model, kdv_file.action, kdv_file.connection, kdv_file.momentum)


def test_force_on_non_cyclic_field_is_kept(kdv_file: ModelFile) -> None:
    model = FieldModel(kdv_file.chart, kdv_file.model.lagrangian, Force.of({"psi": Symbol("t")}))

    reduced = reduce_model(model, kdv_file.action, kdv_file.connection, kdv_file.momentum,
                           kdv_file.aliases)

    assert_equivalent(reduced_euler_lagrange(reduced)["psi"], "rho_x - psi - t",
                      reduced.model.chart)


@mark.parametrize("gamma, key", [
    ({("phi", "t"): Symbol("phi")}, "t"),
    ({("phi", "y"): Integer(1)}, "y"),
    ({("phi", "psi"): Symbol("psi_x")}, "psi"),
    ({("phi", "phi"): Integer(1)}, "phi"),
])
def test_invalid_connection_fails(kdv_chart: Chart, kdv_action: CyclicAction,
                                  gamma: dict[tuple[str, str], Symbol], key: str) -> None:
    with raises(ConnectionValidationError) as e:
        ConnectionData(kdv_chart, kdv_action, gamma)

    assert e.value.field == "phi"
    assert e.value.key == key


def test_mechanics_routhian() -> None:
    chart = Chart(("t",), ("q", "r"), ("mu",))
    model = FieldModel(chart, parse_expr("1/2*q_t^2 + 1/2*r_t^2 - r^2", chart))
    action = CyclicAction(("q",))
    mu = MomentumValue(chart, {"q": (Symbol("mu"),)})

    reduced = reduce_model(model, action, ConnectionData.flat(chart, action), mu)

    assert_equivalent(reduced.routhian, "1/2*q_t^2 + 1/2*r_t^2 - r^2 - mu*q_t", chart)
    assert_equivalent(reduced_euler_lagrange(reduced)["sigma_q_t"], "mu - sigma_q_t",
                      reduced.model.chart)
    assert_equivalent(reduced_euler_lagrange(reduced)["r"], "r_tt + 2*r", reduced.model.chart)
