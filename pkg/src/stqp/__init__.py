"""Random standard quadratic programs over the simplex.

Generation of random symmetric instances, a certified sparse global solver
based on pruned support enumeration, the closed-form tail bounds for the
optimal support size, and Monte Carlo verification experiments.
"""

from .distributions import (
    DistributionSpec,
    LeftEdgeParams,
    OrderStatSample,
    Role,
    TailParams,
    cdf,
    density,
    dominated_variation_beta,
    log_cdf,
    log_density,
    quantile,
    s_statistic,
    sample,
    sample_order_stats,
    sf,
)
from .errors import (
    CostGuardError,
    DegenerateInstanceError,
    DomainError,
    NumericalFailureError,
    StqpError,
    UnsupportedFamilyError,
)
from .instance import Instance, Model, generate, read_instance, relabel_by_diagonal, write_instance
from .solver import (
    FaceSolveResult,
    Solution,
    brute_force_oracle,
    check_first_order,
    check_row_mean_condition,
    check_second_order,
    face_solve,
    solve_global,
)

__version__ = "0.1.0"
