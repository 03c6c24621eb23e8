from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from logging import getLogger

import numpy as np
from scipy.integrate import cumulative_trapezoid
from sympy import Basic, Symbol, diff

from fieldrouth.base_types import Expr
from fieldrouth.grid import (FloatArray, Grid, GridField, Tolerances, evaluate_on_grid,
                             fd_partial, interior_norms)
from fieldrouth.routh import ConnectionData, sigma_name

logger = getLogger(__name__)

ResidualKey = tuple[str, str, str]


class FlatConditionError(ValueError):
    def __init__(self, max_residual: float, tolerance: float) -> None:
        self._max_residual = max_residual
        self._tolerance = tolerance
        super().__init__(f"Reduced section violates the flat condition: max residual "
                         f"{max_residual:.6e} exceeds {tolerance:.6e}", max_residual, tolerance)

    @property
    def max_residual(self) -> float:
        return self._max_residual

    @property
    def tolerance(self) -> float:
        return self._tolerance


class GridTooCoarseError(ValueError):
    def __init__(self, axis: str, points: int) -> None:
        super().__init__(f"Axis {axis} has {points} points, finite differences need at least 3",
                         axis, points)


class ReducedSectionData(ABC):
    """A section of the reduced theory over a rectangular grid.

    Provides the non-cyclic fields ``u^b`` and the reduced fields ``σ^a_i`` by name together
    with their first derivatives.
    """

    @property
    @abstractmethod
    def grid(self) -> Grid:
        """The grid the section is sampled on."""

    @abstractmethod
    def values(self) -> Mapping[str, GridField]:
        """The sampled fields by name."""

    @abstractmethod
    def derivative(self, name: str, axis: str) -> GridField:
        """The first derivative of a field along an axis."""

    def potential(self, connection: ConnectionData, a: str, coordinate: str,
                  sigma: str) -> GridField:
        """Return ``A^a_j = σ^a_j + Γ^a_j + sum_b Γ^a_b ∂u^b/∂x^j`` along the section."""
        values = self.values()
        assignment: dict[Basic, FloatArray | float] = {
            Symbol(name): field.values for name, field in values.items()}
        result = values[sigma].values + evaluate_on_grid(connection.coefficient(a, coordinate),
                                                         self.grid, assignment)
        for b in connection.action.non_cyclic(connection.chart):
            if (gamma := connection.coefficient(a, b)) != 0:
                result = result + (evaluate_on_grid(gamma, self.grid, assignment)
                                   * self.derivative(b, coordinate).values)
        return GridField(self.grid, result)

    def residual(self, connection: ConnectionData,
                 sigma: Mapping[tuple[str, str], str]) -> Mapping[ResidualKey, GridField]:
        """Return ``∂_j A^a_i - ∂_i A^a_j`` for every cyclic ``a`` and ``i < j``.

        Raises:
            GridTooCoarseError: if an axis has fewer than 3 points.
        """
        for axis in self.grid.axes:
            if axis.points < 3:
                raise GridTooCoarseError(axis.name, axis.points)
        base = connection.chart.base
        result = {}
        for a in connection.action.cyclic_fields:
            potentials = {x: self.potential(connection, a, x, sigma[a, x]) for x in base}
            for i, xi in enumerate(base):
                for xj in base[i + 1:]:
                    result[a, xi, xj] = (fd_partial(potentials[xi], xj)
                                         - fd_partial(potentials[xj], xi))
        return result


@dataclass(frozen=True)
class SampledSection(ReducedSectionData):
    """A reduced section given by samples. Derivatives are taken by finite differences."""

    sampled_grid: Grid
    fields: Mapping[str, GridField]

    @property
    def grid(self) -> Grid:
        return self.sampled_grid

    def values(self) -> Mapping[str, GridField]:
        return self.fields

    def derivative(self, name: str, axis: str) -> GridField:
        return fd_partial(self.fields[name], axis)


@dataclass(frozen=True)
class ClosedFormSection(ReducedSectionData):
    """A reduced section given by expressions in the base coordinates.

    Values and derivatives are sampled from exact expressions. The integrability residual is
    derived symbolically, so it carries no discretization error.
    """

    sampled_grid: Grid
    expressions: Mapping[str, Expr]

    @property
    def grid(self) -> Grid:
        return self.sampled_grid

    def values(self) -> Mapping[str, GridField]:
        return {name: GridField(self.grid, evaluate_on_grid(e, self.grid, {}))
                for name, e in self.expressions.items()}

    def derivative(self, name: str, axis: str) -> GridField:
        return GridField(self.grid, evaluate_on_grid(diff(self.expressions[name], Symbol(axis)),
                                                     self.grid, {}))

    def symbolic_potential(self, connection: ConnectionData, a: str, coordinate: str,
                           sigma: str) -> Expr:
        on_section = {Symbol(name): e for name, e in self.expressions.items()}
        potential: Expr = self.expressions[sigma] + connection.coefficient(a, coordinate) \
            .xreplace(on_section)
        for b in connection.action.non_cyclic(connection.chart):
            potential += (connection.coefficient(a, b).xreplace(on_section)
                          * diff(self.expressions[b], Symbol(coordinate)))
        return potential

    def residual(self, connection: ConnectionData,
                 sigma: Mapping[tuple[str, str], str]) -> Mapping[ResidualKey, GridField]:
        base = connection.chart.base
        result = {}
        for a in connection.action.cyclic_fields:
            potentials = {x: self.symbolic_potential(connection, a, x, sigma[a, x]) for x in base}
            for i, xi in enumerate(base):
                for xj in base[i + 1:]:
                    curl = diff(potentials[xi], Symbol(xj)) - diff(potentials[xj], Symbol(xi))
                    result[a, xi, xj] = GridField(self.grid,
                                                  evaluate_on_grid(curl, self.grid, {}))
        return result


def _sigma_names(connection: ConnectionData,
                 aliases: Mapping[str, str] | None) -> Mapping[tuple[str, str], str]:
    return {(a, x): sigma_name(a, x, aliases)
            for a in connection.action.cyclic_fields for x in connection.chart.base}


def flat_residual(data: ReducedSectionData, connection: ConnectionData,
                  aliases: Mapping[str, str] | None = None) -> Mapping[ResidualKey, GridField]:
    """Return the integrability residual ``∂_j A^a_i - ∂_i A^a_j`` per cyclic field and ``i < j``.

    For the flat connection and base ``(t, x)`` this is ``∂σ/∂x - ∂ρ/∂t``. The section
    satisfies the flat condition if all residuals vanish.

    Args:
        data: the reduced section
        connection: the principal connection
        aliases: names of the reduced fields keyed by ``sigma_<field>_<coordinate>``
    """
    return data.residual(connection, _sigma_names(connection, aliases))


def _scale(data: ReducedSectionData) -> float:
    return max((f.max_abs() for f in data.values().values()), default=1.0)


def max_flat_residual(data: ReducedSectionData, connection: ConnectionData,
                      aliases: Mapping[str, str] | None = None) -> float:
    """Return the largest residual away from the one-sided stencils at the edges."""
    margin = 2 if min(data.grid.shape) > 4 else 0
    return max((interior_norms(r, margin)[0]
                for r in flat_residual(data, connection, aliases).values()), default=0.0)


def _path_integral(potentials: Sequence[FloatArray], grid: Grid, base_index: Sequence[int],
                   order: Sequence[int]) -> FloatArray:
    total = np.zeros(grid.shape)
    for step, k in enumerate(order):
        values = potentials[k]
        for later in order[step + 1:]:
            values = np.take(values, [base_index[later]], axis=later)
        integral = cumulative_trapezoid(values, dx=grid.spacing(k), axis=k, initial=0)
        total = total + (integral - np.take(integral, [base_index[k]], axis=k))
    return total


def lift_section(data: ReducedSectionData, connection: ConnectionData,
                 initial_values: Mapping[str, float], base_index: Sequence[int] | None = None,
                 order: Sequence[int] | None = None, aliases: Mapping[str, str] | None = None,
                 tolerances: Tolerances | None = None) -> Mapping[str, GridField]:
    """Reconstruct the cyclic fields of a flat reduced section by quadrature.

    ``φ^a(x) = φ^a(x_0) + ∫ A^a_j dx^j`` along the axis-parallel path from the grid point
    ``x_0`` to ``x`` that first moves along the axis ``order[0]``, then ``order[1]`` and so on,
    using the composite trapezoidal rule.

    Args:
        data: the reduced section
        connection: the principal connection
        initial_values: ``φ^a(x_0)`` per cyclic field
        base_index: the grid index of ``x_0``, the first grid point by default
        order: the order of the axes along the path, ascending by default
        aliases: names of the reduced fields keyed by ``sigma_<field>_<coordinate>``
        tolerances: the flat condition tolerance
    Returns:
        the sampled cyclic fields.
    Raises:
        FlatConditionError: if the integrability residual exceeds the tolerance. The section
            then does not lift to a section of the unreduced theory.
    """
    grid = data.grid
    tolerances = tolerances or Tolerances()
    dimension = len(grid.axes)
    base_index = tuple(base_index) if base_index is not None else (0,) * dimension
    order = tuple(order) if order is not None else tuple(range(dimension))
    if sorted(order) != list(range(dimension)):
        raise ValueError(f"{order} is not an ordering of the axes 0..{dimension - 1}")
    tolerance = tolerances.flat(grid.h, _scale(data))
    if dimension > 1 and (residual := max_flat_residual(data, connection, aliases)) > tolerance:
        raise FlatConditionError(residual, tolerance)
    sigma = _sigma_names(connection, aliases)
    lifted = {}
    for a in connection.action.cyclic_fields:
        potentials = [data.potential(connection, a, x, sigma[a, x]).values
                      for x in connection.chart.base]
        lifted[a] = GridField(grid, initial_values.get(a, 0.0)
                              + _path_integral(potentials, grid, base_index, order))
    logger.info("Lifted %s along axis order %s", sorted(lifted), order)
    return lifted


def project_section(lifted: Mapping[str, GridField], data: ReducedSectionData,
                    connection: ConnectionData,
                    aliases: Mapping[str, str] | None = None) -> Mapping[str, GridField]:
    """Recompute ``σ^a_j = ∂φ^a/∂x^j - Γ^a_j - Γ^a_b ∂u^b/∂x^j`` from lifted cyclic fields."""
    sigma = _sigma_names(connection, aliases)
    projected = {}
    for a, phi in lifted.items():
        for x in connection.chart.base:
            offset = data.potential(connection, a, x, sigma[a, x]) - data.values()[sigma[a, x]]
            projected[sigma[a, x]] = fd_partial(phi, x) - offset
    return projected
