"""shapecalc: shape calculus on level-set domains in the plane.

Boundaries of admissible domains {g < 0} are traced as closed orbits of the
Hamiltonian flow of g; perturbing the level function by lam*h induces a
boundary velocity field W solving a linearized system along the orbit.  The
non-smooth state equation is solved by boundary-fitted finite differences, the
state's directional derivative by the same stencil with Dirichlet data
-grad y . W, and difference-quotient studies verify the convergence claims
numerically.  Shape functionals and their directional derivatives close the
loop with primal first-order optimality checks.
"""

from .expressions import (AdmissibilityReport, HoldAll, NonSmoothPointError, ParseError,
                          ShapeFunction, check_admissible, constant, linear_combination,
                          parse)
from .grid import DiscreteField, DomainMask, Grid, Quadrature, classify, extend_zero
from .nonlinearity import Nonlinearity, cubic, linear, pwl, relu, zero
from .tracing import (BoundaryPartition, Curve, NoIntersectionError, ProjectionError,
                      TooManyComponentsError, TraceError, classify_boundary,
                      find_components, hausdorff, pick_initial_points, project, trace,
                      trace_at_times, trace_components)
from .velocity import (LipschitzEstimate, VelocityField, flow_consistency,
                       lipschitz_estimate, local_opt_radius, solve_w,
                       transversality_residual)
from .elliptic import NonconvergenceError, SolveLog, discretize, solve_semilinear, solve_state
from .sensitivity import BoundaryData, boundary_data, solve_derivative
from .quotient import (CommonDomain, QuotientStudy, boundary_sup, common_domain,
                       estimate_order, evaluate_gates, norm_table, quotient)
from .functionals import (DistributedIntegrand, ObjectiveSpec, OptimalityReport, Region,
                          box_region, check_FE, curve_integral, direction_family,
                          dirderiv_distributed, dirderiv_tracking, disk_region,
                          objective_value, optimality_check)
from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .instances import ANNULUS, BUNDLED, DISK, NONSMOOTH

__version__ = "0.1.0"
