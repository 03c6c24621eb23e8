from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from math import isfinite, prod

import numpy as np
from numpy.typing import NDArray
from sympy import Basic, Derivative, Dummy, Symbol
from sympy.core.function import AppliedUndef

from fieldrouth.base_types import Expr
from fieldrouth.expr import lambdify_expr, print_expr

FloatArray = NDArray[np.float64]

# offsets and coefficients per derivative order
_CENTERED: Mapping[int, tuple[tuple[int, ...], tuple[float, ...]]] = {
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}
_FORWARD: Mapping[int, tuple[float, ...]] = {
    2: (2.0, -5.0, 4.0, -1.0),
    3: (-2.5, 9.0, -12.0, 7.0, -1.5),
}


class GridError(ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Invalid grid: {reason}", reason)


class UnresolvableSymbolError(ValueError):
    def __init__(self, name: str) -> None:
        self._name = name
        super().__init__(f"Cannot resolve {name} on the grid", name)

    @property
    def name(self) -> str:
        return self._name


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    points: int


@dataclass(frozen=True)
class Grid:
    """A uniform rectangular grid over the base, one axis per base coordinate.

    On a periodic grid the upper bound of every axis is identified with the lower one and not
    sampled.
    """

    axes: tuple[Axis, ...]
    periodic: bool = False

    def __post_init__(self) -> None:
        if not self.axes:
            raise GridError("at least one axis is required")
        for axis in self.axes:
            if not (isfinite(axis.min) and isfinite(axis.max) and axis.min < axis.max):
                raise GridError(f"axis {axis.name} needs finite bounds with min < max")
            if axis.points < 2:
                raise GridError(f"axis {axis.name} needs at least 2 points, got {axis.points}")

    @staticmethod
    def of(**bounds: tuple[float, float, int]) -> "Grid":
        """Return a non-periodic grid, e.g. ``Grid.of(t=(0, 10, 256), x=(-20, 20, 512))``."""
        return Grid(tuple(Axis(name, float(lo), float(hi), n)
                          for name, (lo, hi, n) in bounds.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(axis.name for axis in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(axis.points for axis in self.axes)

    def axis_index(self, axis: int | str) -> int:
        if isinstance(axis, int):
            if 0 <= axis < len(self.axes):
                return axis
            raise GridError(f"axis index {axis} out of range")
        if axis not in self.names:
            raise GridError(f"{axis} is not an axis of {self.names}")
        return self.names.index(axis)

    def spacing(self, axis: int | str) -> float:
        a = self.axes[self.axis_index(axis)]
        return (a.max - a.min) / (a.points if self.periodic else a.points - 1)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(self.spacing(i) for i in range(len(self.axes)))

    @property
    def h(self) -> float:
        return max(self.spacings)

    def coordinates(self, axis: int | str) -> FloatArray:
        a = self.axes[self.axis_index(axis)]
        return np.linspace(a.min, a.max, a.points, endpoint=not self.periodic)

    @cached_property
    def mesh(self) -> tuple[FloatArray, ...]:
        return tuple(np.meshgrid(*(self.coordinates(i) for i in range(len(self.axes))),
                                 indexing="ij"))

    def interior(self, margin: int = 2) -> tuple[slice, ...]:
        """Return the index of the points at least ``margin`` points away from every edge."""
        if self.periodic:
            return tuple(slice(None) for _ in self.axes)
        if any(axis.points <= 2 * margin for axis in self.axes):
            raise GridError(f"no interior with margin {margin} in {self.shape}")
        return tuple(slice(margin, axis.points - margin) for axis in self.axes)

    def refine(self) -> "Grid":
        """Return the grid with every spacing halved."""
        return Grid(tuple(Axis(a.name, a.min, a.max, 2 * a.points if self.periodic
                               else 2 * a.points - 1) for a in self.axes), self.periodic)


@dataclass(frozen=True)
class GridField:
    """Real values sampled on every point of a grid, row-major with one array axis per grid axis."""

    grid: Grid
    values: FloatArray = field(repr=False)

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.shape:
            raise GridError(f"values of shape {self.values.shape} do not match grid "
                            f"{self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise GridError("values must be finite")

    @staticmethod
    def constant(grid: Grid, value: float) -> "GridField":
        return GridField(grid, np.full(grid.shape, float(value)))

    def __add__(self, other: "GridField") -> "GridField":
        return GridField(self.grid, self.values + other.values)

    def __sub__(self, other: "GridField") -> "GridField":
        return GridField(self.grid, self.values - other.values)

    def max_abs(self, index: tuple[slice, ...] | None = None) -> float:
        values = self.values if index is None else self.values[index]
        return float(np.max(np.abs(values))) if values.size else 0.0


def _shift(values: FloatArray, offset: int, axis: int) -> FloatArray:
    """Return ``g`` with ``g[i] = values[i + offset]`` along ``axis``, wrapping around."""
    return np.roll(values, -offset, axis=axis)


def _one_sided(values: FloatArray, coefficients: Sequence[float], axis: int,
               position: int, direction: int) -> FloatArray:
    taken = [np.take(values, [position + direction * k], axis=axis)
             for k in range(len(coefficients))]
    return sum((c * v for c, v in zip(coefficients, taken, strict=True)),
               np.zeros_like(taken[0]))


def fd_partial(f: GridField, axis: int | str, order: int = 1) -> GridField:
    """Return the finite difference approximation of a partial derivative of order 1 to 3.

    Centered stencils of second order accuracy are used in the interior. At the edges of a
    non-periodic grid one-sided stencils of the same accuracy replace them.

    Raises:
        GridError: if ``order`` is not supported or the axis has too few points for it.
    """
    grid = f.grid
    index = grid.axis_index(axis)
    points = grid.axes[index].points
    h = grid.spacing(index)
    if order not in (1, 2, 3):
        raise GridError(f"derivatives of order {order} are not supported")
    if points < order + 2:
        raise GridError(f"order {order} derivatives need {order + 2} points along "
                        f"{grid.axes[index].name}, got {points}")
    if order == 1:
        if grid.periodic:
            return GridField(grid, (_shift(f.values, 1, index) - _shift(f.values, -1, index))
                             / (2 * h))
        return GridField(grid, np.gradient(f.values, h, axis=index, edge_order=2))
    offsets, coefficients = _CENTERED[order]
    result = sum((c * _shift(f.values, k, index) for k, c in zip(offsets, coefficients,
                                                                 strict=True)),
                 np.zeros(grid.shape))
    if not grid.periodic:
        edge = max(offsets)
        forward = _FORWARD[order]
        backward = tuple((-1) ** order * c for c in forward)
        slicer: list[slice | int] = [slice(None)] * len(grid.axes)
        for p in range(edge):
            slicer[index] = slice(p, p + 1)
            result[tuple(slicer)] = _one_sided(f.values, forward, index, p, 1)
            q = points - 1 - p
            slicer[index] = slice(q, q + 1)
            result[tuple(slicer)] = _one_sided(f.values, backward, index, q, -1)
    return GridField(grid, result / h ** order)


@dataclass(frozen=True)
class Tolerances:
    """Acceptance thresholds of the numeric checks.

    A finite difference limited quantity passes if its max-norm is at most
    ``stage_factor * h² * scale`` and its observed convergence order lies in ``order_window``.
    Quantities exact up to round-off must stay below ``roundoff``. A reduced section is flat if
    its integrability residual is at most ``flat_factor * h² * scale``.
    """

    stage_factor: float = 50.0
    order_window: tuple[float, float] = (1.8, 2.2)
    roundoff: float = 1e-10
    flat_factor: float = 10.0

    def stage(self, h: float, scale: float = 1.0) -> float:
        return self.stage_factor * h ** 2 * max(scale, 1.0)

    def flat(self, h: float, scale: float = 1.0) -> float:
        return self.flat_factor * h ** 2 * max(scale, 1.0)

    def accepts_order(self, order: float) -> bool:
        return self.order_window[0] <= order <= self.order_window[1]


def evaluate_on_grid(e: Expr, grid: Grid, values: Mapping[Basic, FloatArray | float]) -> FloatArray:
    """Evaluate ``e`` at every grid point.

    Base coordinates named like the grid axes are resolved to the grid coordinates, every other
    symbol, applied function or derivative must be given in ``values``.

    Raises:
        UnresolvableSymbolError: if ``e`` contains anything not resolvable.
    """
    resolved: dict[Basic, FloatArray | float] = {Symbol(name): coordinates for name, coordinates
                                                 in zip(grid.names, grid.mesh, strict=True)}
    resolved.update(values)
    dummies = {key: Dummy() for key in resolved}
    replaced = e.xreplace(dummies)
    if unresolved := replaced.free_symbols - set(dummies.values()):
        raise UnresolvableSymbolError(", ".join(sorted(map(str, unresolved))))
    if leftover := replaced.atoms(AppliedUndef, Derivative):
        restore = {dummy: key for key, dummy in dummies.items()}
        raise UnresolvableSymbolError(", ".join(sorted(print_expr(a.xreplace(restore))
                                                       for a in leftover)))
    arguments = list(dummies)
    compiled = lambdify_expr([dummies[key] for key in arguments], replaced)
    result = np.asarray(compiled(*(resolved[key] for key in arguments)), dtype=np.float64)
    return np.broadcast_to(result, grid.shape).copy()


def interior_norms(f: GridField, margin: int = 2) -> tuple[float, float]:
    """Return max-norm and grid L2-norm over the interior points."""
    grid = f.grid
    values = f.values[grid.interior(margin)]
    l2 = float(np.sqrt(prod(grid.spacings) * np.sum(values ** 2)))
    return float(np.max(np.abs(values))) if values.size else 0.0, l2
