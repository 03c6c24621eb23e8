"""Command line interface.

Symbolic results go to standard output in canonical print form, diagnostics and log messages
to standard error. The exit status is 0 on success, 1 if the input is invalid and 2 if a
numeric check exceeds its tolerance.
"""
import sys
from argparse import ArgumentParser, Namespace
from collections.abc import Callable, Mapping, Sequence
from io import StringIO
from logging import DEBUG, INFO, WARNING, basicConfig, getLogger
from pathlib import Path

import numpy as np

from fieldrouth.base_types import Expr
from fieldrouth.expr import print_expr
from fieldrouth.grid import Axis, Grid, GridField, Tolerances
from fieldrouth.kdv import derive_kdv
from fieldrouth.model import euler_lagrange, legendre_multipliers
from fieldrouth.model_file import ModelFile, parse_model_file, shipped_model, shipped_models
from fieldrouth.numerics import StageToleranceError, verify_kdv_pipeline
from fieldrouth.reconstruct import (FlatConditionError, SampledSection, lift_section,
                                    max_flat_residual)
from fieldrouth.routh import reduce_model, reduced_euler_lagrange, sigma_name
from fieldrouth.symmetry import check_momentum_closed, momentum_constraint, momentum_map

logger = getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TOLERANCE = 2


def _read_model(name: str) -> ModelFile:
    """Read a model file by path, falling back to the shipped model of that name."""
    path = Path(name)
    if path.is_file():
        return parse_model_file(path.read_text(encoding="utf-8"))
    return parse_model_file(shipped_model(path.name.removesuffix(".model")))


def _print_equations(title: str, equations: Sequence[tuple[str, Expr]]) -> None:
    print(f"{title}:")
    for name, residual in equations:
        print(f"  {name}: {print_expr(residual)} = 0")


def derive(arguments: Namespace) -> int:
    source = _read_model(arguments.model)
    _print_equations("Euler-Lagrange equations", list(euler_lagrange(source.model).equations()))
    print("Legendre multipliers:")
    for (a, x), p in legendre_multipliers(source.model).items():
        print(f"  p_{a}_{x} = {print_expr(p)}")
    return EXIT_OK


def momentum(arguments: Namespace) -> int:
    source = _read_model(arguments.model)
    chart = source.chart
    print("Momentum map:")
    for a, current in momentum_map(source.model, source.action).items():
        print(f"  J_{a} = {current}")
    print("Momentum value:")
    for a in source.action.cyclic_fields:
        if chart.m == 2:
            print(f"  mu_{a} = {source.momentum.as_covector(a)}")
        for x in chart.base:
            print(f"  mu_{a}.eta.{x} = {print_expr(source.momentum.component(a, x))}")
    _print_equations("Momentum constraint", [
        (f"{a}.{x}", constraint) for (a, x), constraint
        in momentum_constraint(source.model, source.action, source.momentum).items()])
    print(f"Closedness: {check_momentum_closed(source.momentum)}")
    return EXIT_OK


def reduce(arguments: Namespace) -> int:
    source = _read_model(arguments.model)
    if arguments.flat:
        source = source.flat()
    reduced = reduce_model(source.model, source.action, source.connection, source.momentum,
                           source.aliases)
    print(f"Routhian:\n  R = {print_expr(reduced.routhian)}")
    print(f"Reduced Lagrangian:\n  R_red = {print_expr(reduced.lagrangian)}")
    print(f"Gyroscopic force:\n  d(omega_mu) = {reduced.gyroscopic.form}")
    _print_equations("Reduced Euler-Lagrange equations",
                     list(reduced_euler_lagrange(reduced).equations()))
    if arguments.eliminate:
        print(f"Elimination:\n{derive_kdv(reduced)}")
    return EXIT_OK


def _read_section(text: str, base: Sequence[str],
                  names: Sequence[str]) -> tuple[Grid, dict[str, GridField]]:
    """Read a rectangular grid section from CSV rows in row-major order."""
    header = [column.strip() for column in text.splitlines()[0].split(",")]
    if missing := [name for name in (*base, *names) if name not in header]:
        raise ValueError(f"Missing columns {missing} in the data header {header}")
    data = np.atleast_2d(np.loadtxt(StringIO(text), delimiter=",", skiprows=1))
    axes = []
    for name in base:
        values = np.unique(data[:, header.index(name)])
        if values.size < 2 or not np.allclose(np.diff(values), values[1] - values[0]):
            raise ValueError(f"Column {name} does not sample a uniform axis")
        axes.append(Axis(name, float(values[0]), float(values[-1]), int(values.size)))
    grid = Grid(tuple(axes))
    if data.shape[0] != np.prod(grid.shape):
        raise ValueError(f"Expected {np.prod(grid.shape)} rows for the grid {grid.shape}, "
                         f"got {data.shape[0]}")
    return grid, {name: GridField(grid, data[:, header.index(name)].reshape(grid.shape))
                  for name in names}


def _write_section(grid: Grid, fields: Mapping[str, GridField]) -> str:
    columns = [*grid.mesh, *(f.values for f in fields.values())]
    lines = [",".join((*grid.names, *fields))]
    lines.extend(",".join(f"{v:.12e}" for v in row)
                 for row in zip(*(c.ravel() for c in columns), strict=True))
    return "\n".join(lines) + "\n"


def reconstruct(arguments: Namespace) -> int:
    source = _read_model(arguments.model)
    chart = source.chart
    sigma = [sigma_name(a, x, source.aliases)
             for a in source.action.cyclic_fields for x in chart.base]
    grid, fields = _read_section(Path(arguments.data).read_text(encoding="utf-8"), chart.base,
                                 (*source.action.non_cyclic(chart), *sigma))
    section = SampledSection(grid, fields)
    print(f"Flat residual: {max_flat_residual(section, source.connection, source.aliases):.6e}")
    lifted = lift_section(section, source.connection, {}, aliases=source.aliases,
                          tolerances=Tolerances(flat_factor=arguments.tol))
    output = _write_section(grid, lifted)
    if arguments.out:
        Path(arguments.out).write_text(output, encoding="utf-8")
    else:
        print(output, end="")
    return EXIT_OK


def verify_kdv(arguments: Namespace) -> int:
    grid = Grid((Axis("t", 0.0, arguments.tmax, arguments.nt),
                 Axis("x", arguments.xmin, arguments.xmax, arguments.nx)))
    report = verify_kdv_pipeline(arguments.c, grid, Tolerances(stage_factor=arguments.tol),
                                 x0=arguments.x0, strict=False,
                                 source=_read_model(arguments.model))
    Path(arguments.out).write_text(report.to_csv(), encoding="utf-8")
    for row in report.failures():
        print(f"Stage {row.stage} failed for {row.quantity}: max norm {row.max_norm:.6e}, "
              f"tolerance {row.tolerance:.6e}, order {row.observed_order}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_TOLERANCE


def shipped(arguments: Namespace) -> int:
    print(shipped_model(arguments.name), end="")
    return EXIT_OK


def parse_args(argv: Sequence[str] | None = None) -> Namespace:
    parser = ArgumentParser(prog="fieldrouth",
                            description="Routh reduction of first order field theories")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress to standard error, twice for details")
    commands = parser.add_subparsers(dest="command", required=True)

    command = commands.add_parser("derive", help="print Euler-Lagrange equations")
    command.add_argument("model", help="model file or name of a shipped model")
    command.set_defaults(run=derive)

    command = commands.add_parser("momentum", help="print momentum map and constraint")
    command.add_argument("model", help="model file or name of a shipped model")
    command.set_defaults(run=momentum)

    command = commands.add_parser("reduce", help="print the Routhian and the reduced equations")
    command.add_argument("model", help="model file or name of a shipped model")
    command.add_argument("--flat", action="store_true", help="use the flat connection")
    command.add_argument("--eliminate", action="store_true",
                         help="eliminate all reduced fields but one (KdV model)")
    command.set_defaults(run=reduce)

    command = commands.add_parser("reconstruct",
                                  help="lift a sampled reduced section to the cyclic fields")
    command.add_argument("model", help="model file or name of a shipped model")
    command.add_argument("--data", required=True, help="CSV with the sampled reduced section")
    command.add_argument("--out", help="CSV to write the lifted cyclic fields to")
    command.add_argument("--tol", type=float, default=Tolerances().flat_factor,
                         help="flat condition tolerance factor of h²")
    command.set_defaults(run=reconstruct)

    command = commands.add_parser("verify-kdv", help="verify reduction and reconstruction "
                                                     "numerically along the KdV soliton")
    command.add_argument("--c", type=float, default=1.0, help="soliton speed")
    command.add_argument("--x0", type=float, default=0.0, help="soliton position at t=0")
    command.add_argument("--nx", type=int, default=512, help="points along x")
    command.add_argument("--nt", type=int, default=256, help="points along t")
    command.add_argument("--xmin", type=float, default=-20.0)
    command.add_argument("--xmax", type=float, default=20.0)
    command.add_argument("--tmax", type=float, default=10.0)
    command.add_argument("--tol", type=float, default=Tolerances().stage_factor,
                         help="stage tolerance factor of h²")
    command.add_argument("--model", default="kdv", help="model file or name of a shipped model")
    command.add_argument("--out", required=True, help="CSV report to write")
    command.set_defaults(run=verify_kdv)

    command = commands.add_parser("shipped", help="print a shipped model file")
    command.add_argument("name", choices=shipped_models())
    command.set_defaults(run=shipped)
    return parser.parse_args(argv)


def run_command(argv: Sequence[str] | None = None) -> int:
    """Run the subcommand given by ``argv`` and return the exit status."""
    arguments = parse_args(argv)
    basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                level={0: WARNING, 1: INFO}.get(arguments.verbose, DEBUG))
    run: Callable[[Namespace], int] = arguments.run
    logger.info("Running %s", arguments.command)
    try:
        return run(arguments)
    except (StageToleranceError, FlatConditionError) as e:
        print(e.args[0], file=sys.stderr)
        return EXIT_TOLERANCE
    except ValueError as e:
        print(e.args[0] if e.args else e, file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(e, file=sys.stderr)
        return EXIT_INVALID


def main() -> int:
    return run_command()


if __name__ == "__main__":
    sys.exit(main())
