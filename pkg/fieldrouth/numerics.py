"""Numeric verification of the reduction and reconstruction on sampled sections.

Residuals of symbolic equations are sampled on a :class:`~fieldrouth.grid.Grid` by replacing
every jet symbol and every derivative of a parameter function by finite differences of the
given fields. :func:`verify_kdv_pipeline` runs the whole chain for the soliton of the KdV
model, from the reduced equations over the reconstruction to the unreduced equations and the
momentum constraint, on a grid and on its refinement.
"""
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from logging import getLogger
from math import log2, sqrt

from sympy import Basic, Derivative, Symbol, cancel, diff
from sympy.core.function import AppliedUndef

from fieldrouth.base_types import Chart, Expr, SymbolKind
from fieldrouth.expr import divergence, print_expr
from fieldrouth.grid import (FloatArray, Grid, GridError, GridField, Tolerances,
                             UnresolvableSymbolError, evaluate_on_grid, fd_partial, interior_norms)
from fieldrouth.kdv import soliton, soliton_potential
from fieldrouth.model import ELSystem, euler_lagrange, legendre_multipliers
from fieldrouth.model_file import ModelFile, parse_model_file, shipped_model
from fieldrouth.reconstruct import SampledSection, flat_residual, lift_section, project_section
from fieldrouth.routh import reduce_model, reduced_euler_lagrange, sigma_name
from fieldrouth.symmetry import MomentumValue, momentum_constraint

logger = getLogger(__name__)

Parameters = Mapping[str, GridField | float]

REPORT_HEADER = ("stage", "quantity", "max_norm", "l2_norm", "h", "observed_order")


class StageToleranceError(ValueError):
    def __init__(self, stage: str, quantity: str, norm: float, tolerance: float) -> None:
        self._stage = stage
        self._quantity = quantity
        super().__init__(f"Stage {stage} failed for {quantity}: norm {norm:.6e} exceeds "
                         f"{tolerance:.6e} or does not converge at second order",
                         stage, quantity, norm, tolerance)

    @property
    def stage(self) -> str:
        return self._stage

    @property
    def quantity(self) -> str:
        return self._quantity


@dataclass(frozen=True)
class ResidualNorms:
    max_norm: float
    l2_norm: float


def _derivative(f: GridField, counts: Iterable[tuple[str | int, int]]) -> GridField:
    for axis, order in counts:
        f = fd_partial(f, axis, order)
    return f


def sample_on_section(e: Expr, chart: Chart, grid: Grid, fields: Mapping[str, GridField],
                      parameters: Parameters | None = None) -> GridField:
    """Evaluate ``e`` along a sampled section.

    Fields are taken from ``fields``, jets are finite differences of them. Parameters are
    taken from ``parameters``, either as constants or, for applied parameters, as sampled
    functions whose derivatives are again finite differences.

    Raises:
        UnresolvableSymbolError: if a field or parameter is not given.
    """
    parameters = parameters or {}

    def lookup(source: Mapping[str, GridField | float], name: str) -> GridField | float:
        if name not in source:
            raise UnresolvableSymbolError(name)
        return source[name]

    def sampled(name: str) -> GridField:
        value = lookup(parameters, name)
        if not isinstance(value, GridField):
            raise UnresolvableSymbolError(f"{name}(...)")
        return value

    assignment: dict[Basic, FloatArray | float] = {}
    for s in e.free_symbols:
        info = chart.info(s)
        if info is None or info.kind == SymbolKind.BASE:
            continue
        if info.kind == SymbolKind.PARAMETER:
            value = lookup(parameters, info.name)
            assignment[s] = value.values if isinstance(value, GridField) else value
            continue
        field = lookup(fields, info.field or info.name)
        assert isinstance(field, GridField)
        assignment[s] = _derivative(field, Counter(info.index).items()).values
    for applied in e.atoms(AppliedUndef):
        assignment[applied] = sampled(applied.func.__name__).values
    for derivative in e.atoms(Derivative):
        if not isinstance(derivative.expr, AppliedUndef):
            raise UnresolvableSymbolError(print_expr(derivative))
        counts = [(str(v), int(n)) for v, n in derivative.variable_count]
        assignment[derivative] = _derivative(sampled(derivative.expr.func.__name__),
                                             counts).values
    return GridField(grid, evaluate_on_grid(e, grid, assignment))


def equation_residual_norms(eqs: ELSystem, fields: Mapping[str, GridField], grid: Grid,
                            parameters: Parameters | None = None,
                            margin: int = 2) -> Mapping[str, ResidualNorms]:
    """Return max-norm and L2-norm of every residual over the interior points.

    Raises:
        UnresolvableSymbolError: if a residual references a field or parameter not given.
    """
    norms = {}
    for name, residual in eqs.equations():
        max_norm, l2_norm = interior_norms(sample_on_section(residual, eqs.chart, grid,
                                                             fields, parameters), margin)
        norms[name] = ResidualNorms(max_norm, l2_norm)
    return norms


@dataclass(frozen=True)
class SolitonField:
    """The soliton ``ρ`` with its derivatives in closed form and its potential ``φ``."""

    rho: GridField
    rho_t: GridField
    rho_x: GridField
    rho_xx: GridField
    rho_xxx: GridField
    phi: GridField


def kdv_soliton_field(c: float, x0: float, grid: Grid) -> SolitonField:
    """Sample the soliton of speed ``c`` and its closed form derivatives on a ``(t, x)`` grid."""
    if c <= 0:
        raise GridError(f"the soliton needs a positive speed, got {c}")
    t, x = (Symbol(name) for name in grid.names)
    rho = soliton(c, x0, t, x)

    def sample(e: Expr) -> GridField:
        return GridField(grid, evaluate_on_grid(e, grid, {}))

    return SolitonField(sample(rho), sample(diff(rho, t)), sample(diff(rho, x)),
                        sample(diff(rho, x, 2)), sample(diff(rho, x, 3)),
                        sample(soliton_potential(c, x0, t, x)))


def convergence_order(coarse: float, fine: float, floor: float = 0.0) -> float | None:
    """Return ``log2(coarse / fine)`` or ``None`` if a norm is at or below ``floor``."""
    if coarse <= floor or fine <= floor:
        logger.warning("Skipping convergence measurement for norms %.3e and %.3e", coarse, fine)
        return None
    return log2(coarse / fine)


@dataclass(frozen=True)
class ReportRow:
    stage: str
    quantity: str
    max_norm: float
    l2_norm: float
    h: float
    observed_order: float | None
    tolerance: float
    passed: bool

    def to_csv(self) -> str:
        order = "" if self.observed_order is None else f"{self.observed_order:.4f}"
        return ",".join((self.stage, self.quantity, f"{self.max_norm:.6e}",
                         f"{self.l2_norm:.6e}", f"{self.h:.6e}", order))


@dataclass(frozen=True)
class Report:
    rows: tuple[ReportRow, ...]

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def failures(self) -> tuple[ReportRow, ...]:
        return tuple(row for row in self.rows if not row.passed)

    def to_csv(self) -> str:
        return "\n".join((",".join(REPORT_HEADER), *(row.to_csv() for row in self.rows))) + "\n"


@dataclass(frozen=True)
class _Sample:
    """A residual of a stage on one grid. ``exact`` residuals carry no discretization error."""

    stage: str
    quantity: str
    residual: GridField
    exact: bool


def _momentum_parameters(momentum: MomentumValue, a: str,
                         values: Mapping[str, GridField]) -> dict[str, GridField]:
    """Solve ``μ̂^i_a = values[x^i]`` for the parameter function in every component."""
    result = {}
    for coordinate, value in values.items():
        component = momentum.component(a, coordinate)
        functions = component.atoms(AppliedUndef)
        if len(functions) != 1:
            raise UnresolvableSymbolError(print_expr(component))
        function, = functions
        coefficient = cancel(component / function)
        if not coefficient.is_number or coefficient == 0:
            raise UnresolvableSymbolError(print_expr(component))
        result[function.func.__name__] = GridField(value.grid,
                                                   value.values / float(coefficient))
    return result


def _has_derivatives(e: Expr, chart: Chart) -> bool:
    return chart.jet_order(e) > 0 or bool(e.atoms(Derivative))


def _pipeline_samples(c: float, x0: float, grid: Grid, source: ModelFile,
                      tolerances: Tolerances) -> tuple[list[_Sample], float]:
    chart = source.chart
    action = source.action
    a, = action.cyclic_fields
    b, = action.non_cyclic(chart)
    t, x = chart.base
    connection = source.flat().connection
    reduced = reduce_model(source.model, action, connection, source.momentum, source.aliases)
    sigma, rho = (sigma_name(a, coordinate, source.aliases) for coordinate in chart.base)

    wave = kdv_soliton_field(c, x0, grid)
    rho_f = wave.rho
    psi_f = wave.rho_x
    sigma_f = GridField(grid, c * rho_f.values - 6 * rho_f.values ** 2 - 2 * wave.rho_xx.values)
    momentum = _momentum_parameters(source.momentum, a, {
        t: GridField(grid, rho_f.values / 2), x: GridField(grid, c * rho_f.values / 2)})
    samples = [
        _Sample("soliton", "kdv_exact", GridField(grid, wave.rho_t.values + 6 * rho_f.values
                                                  * wave.rho_x.values + wave.rho_xxx.values),
                True),
        _Sample("soliton", "kdv_fd", GridField(grid, fd_partial(rho_f, t).values + 6 * rho_f.values
                                               * fd_partial(rho_f, x).values
                                               + fd_partial(rho_f, x, 3).values), False)]

    reduced_fields = {b: psi_f, sigma: sigma_f, rho: rho_f}
    for name, residual in reduced_euler_lagrange(reduced).equations():
        samples.append(_Sample("reduced", name, sample_on_section(
            residual, reduced.model.chart, grid, reduced_fields, momentum),
                               not _has_derivatives(residual, reduced.model.chart)))

    section = SampledSection(grid, reduced_fields)
    for (_, xi, xj), residual in flat_residual(section, connection, source.aliases).items():
        samples.append(_Sample("flat", f"{a}_{xi}_{xj}", residual, False))

    lifted = lift_section(section, connection, {a: float(wave.phi.values[0, 0])},
                          aliases=source.aliases, tolerances=tolerances)
    samples.append(_Sample("lift", a, lifted[a] - wave.phi, False))
    for name, projected in project_section(lifted, section, connection, source.aliases).items():
        samples.append(_Sample("lift", f"projected_{name}", projected - reduced_fields[name],
                               False))

    unreduced_fields = {a: lifted[a], b: psi_f}
    unreduced: dict[str, GridField] = {}
    for name, residual in euler_lagrange(source.model).equations():
        unreduced[name] = sample_on_section(residual, chart, grid, unreduced_fields)
        samples.append(_Sample("unreduced", name, unreduced[name], False))

    for (field, coordinate), constraint in momentum_constraint(source.model, action,
                                                               source.momentum).items():
        samples.append(_Sample("momentum", f"p_{field}_{coordinate}", sample_on_section(
            constraint, chart, grid, unreduced_fields, momentum), False))
    multipliers = legendre_multipliers(source.model)
    current = sample_on_section(divergence([multipliers[a, coordinate]
                                            for coordinate in chart.base], chart),
                                chart, grid, unreduced_fields)
    samples.append(_Sample("momentum", "divergence", current, False))
    samples.append(_Sample("momentum", f"divergence_minus_el_{a}", current - unreduced[a], True))
    return samples, max(f.max_abs() for f in reduced_fields.values())


def verify_kdv_pipeline(c: float, grid: Grid, tolerances: Tolerances | None = None,
                        x0: float = 0.0, strict: bool = True,
                        source: ModelFile | None = None) -> Report:
    """Run the reduction and reconstruction of the KdV model for the soliton of speed ``c``.

    The stages are run on ``grid`` and on its refinement:

    - ``soliton``: the KdV residual of the soliton with closed form and finite difference
      derivatives
    - ``reduced``: the reduced equations of the flat reduction for ``ρ`` the soliton,
      ``ψ = ρ_x``, ``σ = cρ - 6ρ² - 2ρ_xx`` and the momentum ``μ_2 = ρ/2``, ``μ_1 = -cρ/2``
    - ``flat``: the integrability residual ``∂σ/∂x - ∂ρ/∂t``
    - ``lift``: the distance of the reconstructed ``φ`` to ``√c tanh(√c(x - ct - x0)/2)`` and
      the projection of ``φ`` back onto ``(σ, ρ)``
    - ``unreduced``: the Euler–Lagrange residuals of ``(φ, ψ)``
    - ``momentum``: the momentum constraint, the divergence of the momentum current and its
      difference to the Euler–Lagrange residual of the cyclic field

    Residuals without finite differences pass if they stay at round-off. All others pass if
    they stay below the stage tolerance on both grids and converge at the order accepted by
    ``tolerances``.

    Args:
        c: the wave speed
        grid: a grid over the base ``(t, x)`` of the model
        tolerances: the acceptance thresholds
        x0: the position of the soliton at ``t = 0``
        strict: if a failing stage raises or is only recorded in the report
        source: the model, the shipped ``kdv`` model by default
    Raises:
        GridError: if the grid does not match the base of the model or does not resolve
            the soliton.
        StageToleranceError: if ``strict`` and a stage fails.
        FlatConditionError: if the sampled reduced section cannot be reconstructed.
    """
    tolerances = tolerances or Tolerances()
    source = source or parse_model_file(shipped_model("kdv"))
    if grid.names != source.chart.base:
        raise GridError(f"grid axes {grid.names} do not match the base {source.chart.base}")
    if any(axis.points < 5 for axis in grid.axes):
        raise GridError(f"the pipeline needs at least 5 points per axis, got {grid.shape}")
    if c <= 0 or grid.spacing(1) > 2 / sqrt(c) / 8:
        raise GridError(f"spacing {grid.spacing(1):.4g} does not resolve the soliton with c={c}")
    refined = grid.refine()
    coarse, scale = _pipeline_samples(c, x0, grid, source, tolerances)
    fine, _ = _pipeline_samples(c, x0, refined, source, tolerances)
    rows = []
    for on_coarse, on_fine in zip(coarse, fine, strict=True):
        assert (on_coarse.stage, on_coarse.quantity) == (on_fine.stage, on_fine.quantity)
        coarse_norms = interior_norms(on_coarse.residual)
        fine_norms = interior_norms(on_fine.residual)
        if on_coarse.exact:
            order = None
            tolerance = fine_tolerance = tolerances.roundoff
            converges = True
        else:
            order = convergence_order(coarse_norms[0], fine_norms[0], tolerances.roundoff)
            tolerance = tolerances.stage(grid.h, scale)
            fine_tolerance = tolerances.stage(refined.h, scale)
            converges = order is None or tolerances.accepts_order(order)
        passed_coarse = coarse_norms[0] <= tolerance and converges
        passed_fine = fine_norms[0] <= fine_tolerance and converges
        rows.append(ReportRow(on_coarse.stage, on_coarse.quantity, *coarse_norms, grid.h, None,
                              tolerance, passed_coarse))
        rows.append(ReportRow(on_fine.stage, on_fine.quantity, *fine_norms, refined.h, order,
                              fine_tolerance, passed_fine))
        for row in rows[-2:]:
            logger.info("%s %s: max %.3e, l2 %.3e, h %.3e, order %s", row.stage, row.quantity,
                        row.max_norm, row.l2_norm, row.h, row.observed_order)
            if strict and not row.passed:
                raise StageToleranceError(row.stage, row.quantity, row.max_norm, row.tolerance)
    return Report(tuple(rows))
