from pytest import fixture

from fieldrouth import (Chart, ConnectionData, CyclicAction, FieldModel, ModelFile,
                        MomentumValue, ReducedModel, parse_model_file, reduce_model,
                        shipped_model)

GENERAL_CONNECTION = """
[base]
t, x
[fields]
phi, psi
[parameters]
mu_1, mu_2, Gamma_t, Gamma_x, Gamma_psi
[lagrangian]
1/2*phi_t*phi_x + phi_x^3 + phi_x*psi_x + 1/2*psi^2
[symmetry]
phi
[connection]
phi.t = Gamma_t(t, x)
phi.x = Gamma_x(t, x)
phi.psi = Gamma_psi(t, x)
[momentum]
phi.t = mu_1(t, x)
phi.x = mu_2(t, x)
[reduced-names]
sigma_phi_t = sigma
sigma_phi_x = rho
"""

FIELD_DEPENDENT_CONNECTION = GENERAL_CONNECTION.replace("""
phi.t = Gamma_t(t, x)
phi.x = Gamma_x(t, x)
phi.psi = Gamma_psi(t, x)
""", """
phi.t = Gamma_t(t, x, psi)
phi.x = Gamma_x(t, x, psi)
phi.psi = Gamma_psi(t, x, psi)
""")


@fixture
def kdv_file() -> ModelFile:
    return parse_model_file(shipped_model("kdv"))


@fixture
def kdv_chart(kdv_file: ModelFile) -> Chart:
    return kdv_file.chart


@fixture
def kdv_model(kdv_file: ModelFile) -> FieldModel:
    return kdv_file.model


@fixture
def kdv_action(kdv_file: ModelFile) -> CyclicAction:
    return kdv_file.action


@fixture
def kdv_momentum(kdv_file: ModelFile) -> MomentumValue:
    return kdv_file.momentum


@fixture
def flat_reduced(kdv_file: ModelFile) -> ReducedModel:
    return reduce_model(kdv_file.model, kdv_file.action, kdv_file.connection, kdv_file.momentum,
                        kdv_file.aliases)


@fixture
def general_file() -> ModelFile:
    return parse_model_file(GENERAL_CONNECTION)


@fixture
def general_connection(general_file: ModelFile) -> ConnectionData:
    return general_file.connection


@fixture
def phi_chart() -> Chart:
    return Chart(("t", "x"), ("phi",))


@fixture
def wave_file() -> ModelFile:
    return parse_model_file(shipped_model("wave"))


@fixture
def field_dependent_file() -> ModelFile:
    return parse_model_file(FIELD_DEPENDENT_CONNECTION)
