"""Extended Hamiltonians with high-degree first integrals, their
coupling-constant metamorphosis, and desk-scale verification tools."""

from .symexpr import (
    Expr,
    Symbol,
    SymbolTable,
    coordinate,
    differentiate,
    evaluate,
    momentum,
    momentum_degree,
    normalize,
    parameter,
    parse,
    render,
    substitute,
)
from .mechanics import CanonicalChart, PhasePoint, apply_vector_field, poisson_bracket
from .extension import (
    ExtendedSystem,
    ExtensionParams,
    SeedSystem,
    StructuralFunctions,
    check_seed,
    extend,
    first_integral,
    g_recursion,
    mu_nu,
    table1,
    w_apply,
)
from .ccm import (
    CcmInput,
    CcmSystem,
    RescaledOperator,
    ccm,
    ccm_compatible,
    ccm_extension,
    rescaled_operator,
)
from . import catalog, verify

__version__ = "0.1.0"
