"""Numerical lab for critical Lane-Emden type problems on the unit ball:
radial shooting, energy functionals and Talenti bubbles, a mountain-pass
level solver, Pohozaev nonexistence certificates, and a phase-diagram
scanner.
"""

from .errors import (
    AccuracyError,
    ConsistencyError,
    CritballError,
    DiagnosticsError,
    DivergenceError,
    DomainError,
    FormatError,
)
from .problem import (
    AssumptionReport,
    CoefficientModel,
    NonlinearityModel,
    ProblemSpec,
    critical_exponent,
    eval_rhs,
    f4_threshold,
    lambda_star,
    validate_assumptions,
)
from .shooting import (
    DirichletSearch,
    RadialProfile,
    ShootingOutcome,
    find_dirichlet_solution,
    integrate_ivp,
    residual_check,
    shoot,
)

__version__ = "0.1.0"
