"""Symbolic-numeric construction and verification of Lagrangians for
one-dimensional second-order dynamics."""

from .errors import (
    BadExponentError,
    BracketError,
    BuilderError,
    ConstructionVerificationError,
    DegenerateLagrangianError,
    EmptyDomainError,
    EvalDomainError,
    ExpressionError,
    ExprSyntaxError,
    InadmissibleCoefficientsError,
    InapplicableFamilyError,
    IntegrationError,
    LagrangeForgeError,
    NonDifferentiableError,
    NonMonotoneError,
    NotInvariantError,
    OverflowGuardError,
    QuadratureDepthError,
    QuadratureError,
    SpecValidationError,
    StepUnderflowError,
    SubstitutionError,
    UnknownIdentifierError,
    ZeroCrossingError,
)
from .expressions import (
    Abs,
    Add,
    Antideriv,
    Const,
    Cos,
    Div,
    Exp,
    Expr,
    Ln,
    Mul,
    Neg,
    Pow,
    Sin,
    Sqrt,
    Sub,
    Var,
    as_expr,
    canonical,
    differentiate,
    differentiate_with_notes,
    format_expression,
    free_vars,
    parse_expression,
    simplify,
    substitute,
)
from .evaluation import (
    Jet2,
    clear_antideriv_cache,
    compile_callable,
    definite_integral,
    eval_jet2,
    evaluate,
)
from .normal_form import equivalent_expressions, normal_form
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig, integrate_adaptive
from .lagrangian import (
    EPS_REG,
    DomainBox,
    Lagrangian,
    OdeSpec,
    SingularStratum,
    VerificationReport,
    assert_invariant,
    energy_expression,
    euler_lagrange_residual,
    hamiltonian_value,
    implied_acceleration,
    invariant_drift,
    invert_momentum,
    legendre_momentum,
    pairwise_acceleration_gap,
    total_derivative_gauge,
    verify_lagrangian,
)
from .dynamics import (
    IntegratorConfig,
    Trajectory,
    integrate_ode,
    monitor_quantity,
)
from .constructors import (
    BuilderOptions,
    MultiSuite,
    StandardCoeffs,
    a_from_bc,
    build_composed_invariant,
    compose_invariant,
    build_exponential_family,
    build_generalized_kinetic,
    build_monomial,
    build_power_damping,
    build_radical,
    build_radical_equal,
    build_radical_linear,
    build_reciprocal,
    build_reciprocal_autonomous,
    build_reciprocal_linear,
    build_reciprocal_nu2,
    build_standard,
    c_from_ab,
    log_velocity_lagrangian,
    multi_lagrangian_suite,
    n_parameter_lagrangian,
    standard_hamiltonian,
)

__version__ = "0.1.0"
