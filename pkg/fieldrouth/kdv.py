"""The Korteweg–de Vries equation as the reduced theory of a cyclic field model.

The reduced system of the model ``L = ½φ_tφ_x + φ_x³ + φ_xψ_x + ½ψ²`` with cyclic ``φ`` and the
flat connection determines ``ψ``, one momentum component and ``σ`` algebraically in terms of
``ρ``. Imposing the integrability condition ``∂σ/∂x = ∂ρ/∂t`` leaves a single equation for
``ρ``, which is a multiple of ``ρ_t + 6ρρ_x + ρ_xxx``.
"""
from dataclasses import dataclass
from logging import getLogger

from sympy import Basic, Rational, Symbol, cancel, diff, sech, solve, sqrt, tanh
from sympy.core.function import AppliedUndef

from fieldrouth.base_types import Expr
from fieldrouth.expr import canonical, on_section, print_expr, section_function
from fieldrouth.routh import ReducedModel, reduced_euler_lagrange

logger = getLogger(__name__)


class KdVDerivationError(ValueError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Cannot derive the KdV equation: {reason}", reason)


def soliton(c: Expr | float, x0: Expr | float = 0, t: Symbol = Symbol("t"),
            x: Symbol = Symbol("x")) -> Expr:
    """Return the traveling wave ``(c/2) sech²(√c (x - c t - x0)/2)``."""
    c = Rational(c) if isinstance(c, int) else c
    wave: Expr = c / 2 * sech(sqrt(c) * (x - c * t - x0) / 2) ** 2
    return wave


def soliton_potential(c: Expr | float, x0: Expr | float = 0, t: Symbol = Symbol("t"),
                      x: Symbol = Symbol("x")) -> Expr:
    """Return ``√c tanh(√c (x - c t - x0)/2)``, whose x-derivative is the soliton."""
    c = Rational(c) if isinstance(c, int) else c
    potential: Expr = sqrt(c) * tanh(sqrt(c) * (x - c * t - x0) / 2)
    return potential


def kdv_residual(rho: Expr, t: Symbol = Symbol("t"), x: Symbol = Symbol("x")) -> Expr:
    """Return ``ρ_t + 6ρρ_x + ρ_xxx`` for an expression or undefined function ``rho``."""
    return canonical(diff(rho, t) + 6 * rho * diff(rho, x) + diff(rho, x, 3))


@dataclass(frozen=True)
class KdVDerivation:
    """The steps of the elimination, all on sections.

    ``rho`` is the undefined function standing for the reduced field, ``psi``, ``momentum``
    and ``sigma`` the solved expressions, ``equation`` the remaining equation for ``rho`` and
    ``factor`` the constant it differs from the KdV residual by.
    """

    rho: Expr
    psi: tuple[Expr, Expr]
    momentum: tuple[Expr, Expr]
    sigma: tuple[Expr, Expr]
    equation: Expr
    factor: Expr

    def __str__(self) -> str:
        return "\n".join(f"{print_expr(lhs)} = {print_expr(rhs)}"
                         for lhs, rhs in (self.psi, self.momentum, self.sigma,
                                          (self.equation, 0)))


def _solve_for(equation: Expr, unknown: Basic, what: str) -> Expr:
    solutions = solve(equation, unknown)
    if len(solutions) != 1:
        raise KdVDerivationError(f"the {what} equation {print_expr(equation)} "
                                 f"does not determine {print_expr(unknown)}")
    return canonical(solutions[0])


def derive_kdv(reduced: ReducedModel) -> KdVDerivation:
    """Eliminate all reduced fields but ``ρ`` from the flat reduced system.

    The non-cyclic field is solved from its own equation, the momentum component paired with
    ``σ`` from the ``σ`` equation and ``σ`` from the ``ρ`` equation. The integrability
    condition ``∂σ/∂x - ∂ρ/∂t = 0`` with the closedness of the momentum value then is an
    equation for ``ρ`` only.

    Raises:
        KdVDerivationError: if the model does not have two base coordinates, one cyclic and
            one non-cyclic field and a flat connection, or an equation cannot be solved.
    """
    chart = reduced.model.chart
    original = reduced.original.chart
    if chart.m != 2 or len(reduced.action.cyclic_fields) != 1 or not reduced.connection.is_flat:
        raise KdVDerivationError("requires two base coordinates, one cyclic field "
                                 "and the flat connection")
    non_cyclic = reduced.action.non_cyclic(original)
    if len(non_cyclic) != 1:
        raise KdVDerivationError(f"requires exactly one non-cyclic field, got {non_cyclic}")
    a = reduced.action.cyclic_fields[0]
    b = non_cyclic[0]
    t, x = chart.coordinates()
    sigma_name, rho_name = (reduced.sigma[a, c] for c in chart.base)
    equations = {name: on_section(residual, chart)
                 for name, residual in reduced_euler_lagrange(reduced).equations()}
    psi_f, sigma_f, rho_f = (section_function(chart, name) for name in (b, sigma_name, rho_name))

    psi = _solve_for(equations[b], psi_f, b)
    momentum_functions = [f for f in equations[sigma_name].atoms(AppliedUndef)
                          if f.func.__name__ in chart.parameters]
    if len(momentum_functions) != 1:
        raise KdVDerivationError(f"the {sigma_name} equation must contain exactly one momentum "
                                 f"function, got {sorted(map(str, momentum_functions))}")
    momentum_f, = momentum_functions
    momentum = _solve_for(equations[sigma_name], momentum_f, sigma_name)
    sigma = _solve_for(canonical(equations[rho_name].subs(psi_f, psi).doit()), sigma_f, rho_name)

    integrability = diff(sigma, x) - diff(rho_f, t)
    closed = reduced.verdict.impose(canonical(integrability))
    equation = canonical(closed.subs(momentum_f, momentum).doit())
    logger.info("Equation for %s: %s = 0", rho_name, print_expr(equation))
    factor = cancel(equation / kdv_residual(rho_f, t, x))
    if factor.free_symbols or factor == 0:
        raise KdVDerivationError(f"{print_expr(equation)} is not a multiple of the KdV residual")
    return KdVDerivation(rho_f, (psi_f, psi), (momentum_f, momentum), (sigma_f, sigma),
                         equation, factor)
