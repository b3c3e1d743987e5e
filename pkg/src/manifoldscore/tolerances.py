"""Repo-wide numerical tolerances.

All analytic manifolds in this package are exactly representable, so these
constants reflect floating-point accumulation only.  Kept in one record so
tests, invariant suites and library code agree on every threshold.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    orthonormal: float = 1e-12          # frame columns, basis matrices
    on_manifold: float = 1e-9           # membership checks
    chart_center_on_manifold: float = 1e-12
    partition_sum: float = 1e-10        # sum of bump functions
    round_trip: float = 1e-9            # log(exp) and exp(log)
    exp_arc_length: float = 1e-10       # geodesic speed of the exponential map
    projection_tie: float = 1e-12       # nearest-atom ties on point sets
    reach_boundary: float = 1e-9        # strict-inequality margin at alpha_t * tau
    residual_orthogonality: float = 1e-8
    jacobian_identity: float = 1e-4     # finite-difference projection Jacobian
    jacobian_fd_step: float = 1e-5
    mass_sum: float = 1e-8              # local-measure masses
    density_normalization: float = 1e-6
    quadrature_refinement: float = 1e-4  # relative change between levels
    weight_simplex: float = 1e-10
    decomposition_exactness: float = 1e-8
    switch_partition: float = 1e-12
    log_underflow: float = -745.0       # exp() underflow floor for float64
    gradient_check_rel: float = 1e-4
    gradient_fd_step: float = 1e-5


TOL = Tolerances()
