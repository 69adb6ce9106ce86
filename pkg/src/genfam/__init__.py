"""Critical sets, family Hessians and generated Lagrangian sets of function families."""

from .autodiff import DomainError, Jet2, jet2_eval, mixed_second
from .catalog import instantiate, oracle_constitutive
from .expr import ExprError, parse
from .family import Covector, FamilySpec, Fibration, NotCriticalError, kappa, residual
from .hessian import classify_family, family_hessian, hessian_kernel
from .solver import CriticalPoint, SolveConfig, continue_branch, multistart, newton_solve

__version__ = "0.1.0"
