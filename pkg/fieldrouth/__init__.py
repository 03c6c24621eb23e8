# Purpose of this file is re-export symbols at package level
# so unused import are expected
# pylint: disable=C0414
from .base_types import Chart as Chart  # noqa: W0611
from .base_types import ChartError as ChartError  # noqa: W0611
from .base_types import Expr as Expr  # noqa: W0611
from .base_types import JetOrderError as JetOrderError  # noqa: W0611
from .base_types import SymbolInfo as SymbolInfo  # noqa: W0611
from .base_types import SymbolKind as SymbolKind  # noqa: W0611
from .expr import EvaluationError as EvaluationError  # noqa: W0611
from .expr import ExprSyntaxError as ExprSyntaxError  # noqa: W0611
from .expr import UnknownIdentifierError as UnknownIdentifierError  # noqa: W0611
from .expr import canonical as canonical  # noqa: W0611
from .expr import divergence as divergence  # noqa: W0611
from .expr import evaluate as evaluate  # noqa: W0611
from .expr import parse_expr as parse_expr  # noqa: W0611
from .expr import print_expr as print_expr  # noqa: W0611
from .expr import total_derivative as total_derivative  # noqa: W0611
from .forms import DifferentialForm as DifferentialForm  # noqa: W0611
from .forms import FormError as FormError  # noqa: W0611
from .forms import HorizontalBasis as HorizontalBasis  # noqa: W0611
from .grid import Axis as Axis  # noqa: W0611
from .grid import Grid as Grid  # noqa: W0611
from .grid import GridError as GridError  # noqa: W0611
from .grid import GridField as GridField  # noqa: W0611
from .grid import Tolerances as Tolerances  # noqa: W0611
from .grid import UnresolvableSymbolError as UnresolvableSymbolError  # noqa: W0611
from .grid import fd_partial as fd_partial  # noqa: W0611
from .kdv import KdVDerivation as KdVDerivation  # noqa: W0611
from .kdv import KdVDerivationError as KdVDerivationError  # noqa: W0611
from .kdv import derive_kdv as derive_kdv  # noqa: W0611
from .kdv import kdv_residual as kdv_residual  # noqa: W0611
from .kdv import soliton as soliton  # noqa: W0611
from .model import ELSystem as ELSystem  # noqa: W0611
from .model import FieldModel as FieldModel  # noqa: W0611
from .model import Force as Force  # noqa: W0611
from .model import ImplicitELSystem as ImplicitELSystem  # noqa: W0611
from .model import ModelValidationError as ModelValidationError  # noqa: W0611
from .model import cartan_form as cartan_form  # noqa: W0611
from .model import euler_lagrange as euler_lagrange  # noqa: W0611
from .model import implicit_euler_lagrange as implicit_euler_lagrange  # noqa: W0611
from .model import legendre_multipliers as legendre_multipliers  # noqa: W0611
from .model_file import ModelFile as ModelFile  # noqa: W0611
from .model_file import ModelFileError as ModelFileError  # noqa: W0611
from .model_file import ModelLocation as ModelLocation  # noqa: W0611
from .model_file import parse_model_file as parse_model_file  # noqa: W0611
from .model_file import shipped_model as shipped_model  # noqa: W0611
from .numerics import Report as Report  # noqa: W0611
from .numerics import ReportRow as ReportRow  # noqa: W0611
from .numerics import StageToleranceError as StageToleranceError  # noqa: W0611
from .numerics import equation_residual_norms as equation_residual_norms  # noqa: W0611
from .numerics import kdv_soliton_field as kdv_soliton_field  # noqa: W0611
from .numerics import verify_kdv_pipeline as verify_kdv_pipeline  # noqa: W0611
from .reconstruct import ClosedFormSection as ClosedFormSection  # noqa: W0611
from .reconstruct import FlatConditionError as FlatConditionError  # noqa: W0611
from .reconstruct import GridTooCoarseError as GridTooCoarseError  # noqa: W0611
from .reconstruct import SampledSection as SampledSection  # noqa: W0611
from .reconstruct import flat_residual as flat_residual  # noqa: W0611
from .reconstruct import lift_section as lift_section  # noqa: W0611
from .reconstruct import project_section as project_section  # noqa: W0611
from .routh import ConnectionData as ConnectionData  # noqa: W0611

# isort: off
from .routh import (ConnectionValidationError  # noqa: W0611
                    as ConnectionValidationError)
from .routh import (ReductionConsistencyError  # noqa: W0611
                    as ReductionConsistencyError)
# isort: on
from .routh import ReducedModel as ReducedModel  # noqa: W0611
from .routh import gyroscopic_force as gyroscopic_force  # noqa: W0611
from .routh import reduce_model as reduce_model  # noqa: W0611
from .routh import reduced_euler_lagrange as reduced_euler_lagrange  # noqa: W0611
from .routh import reduction_consistency as reduction_consistency  # noqa: W0611
from .routh import routhian as routhian  # noqa: W0611
from .symmetry import ClosednessVerdict as ClosednessVerdict  # noqa: W0611
from .symmetry import CyclicAction as CyclicAction  # noqa: W0611
from .symmetry import InvarianceError as InvarianceError  # noqa: W0611
from .symmetry import MomentumNotClosedError as MomentumNotClosedError  # noqa: W0611
from .symmetry import MomentumValue as MomentumValue  # noqa: W0611
from .symmetry import check_invariance as check_invariance  # noqa: W0611
from .symmetry import check_momentum_closed as check_momentum_closed  # noqa: W0611
from .symmetry import momentum_constraint as momentum_constraint  # noqa: W0611
from .symmetry import momentum_map as momentum_map  # noqa: W0611
from .symmetry import noether_identity as noether_identity  # noqa: W0611

_FUNCTIONS = ["canonical", "divergence", "evaluate", "parse_expr", "print_expr",
              "total_derivative", "fd_partial", "derive_kdv", "kdv_residual", "soliton",
              "cartan_form", "euler_lagrange", "implicit_euler_lagrange", "legendre_multipliers",
              "parse_model_file", "shipped_model", "equation_residual_norms", "kdv_soliton_field",
              "verify_kdv_pipeline", "flat_residual", "lift_section", "project_section",
              "gyroscopic_force", "reduce_model", "reduced_euler_lagrange",
              "reduction_consistency", "routhian", "check_invariance", "check_momentum_closed",
              "momentum_constraint", "momentum_map", "noether_identity"]

__all__ = [symbol for symbol in dir() if symbol and symbol[0].isupper()] + _FUNCTIONS
