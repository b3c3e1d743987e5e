"""Exception types shared across the package."""


class ManifoldScoreError(Exception):
    """Base class for all package errors."""


class OutsideReach(ManifoldScoreError):
    """Point is outside the unique-projection tube of the (scaled) manifold."""


class AmbiguousProjection(ManifoldScoreError):
    """Nearest-point search found a tie (finite point sets)."""


class NotOnManifold(ManifoldScoreError):
    """An operation required a point on the manifold and got one off it."""


class BeyondInjectivityRadius(ManifoldScoreError):
    """Tangent vector or point pair exceeds the exponential-map domain."""


class CutLocus(ManifoldScoreError):
    """Log map requested at (numerically) antipodal points."""


class InvalidRadius(ManifoldScoreError):
    """Chart radius outside (0, pi * reach) or too coarse a covering grid."""


class EmptyChart(ManifoldScoreError):
    """Chart carries (numerically) zero data mass."""


class QuadratureDivergence(ManifoldScoreError):
    """Quadrature refinement did not stabilize within tolerance."""


class UnderflowSignal(ManifoldScoreError):
    """Marginal density underflowed; the point is outside usable support."""

    def __init__(self, log_density: float):
        super().__init__(f"log marginal density {log_density:.3f} below underflow floor")
        self.log_density = log_density


class WrongManifoldKind(ManifoldScoreError):
    """Operation requires a specific manifold kind (e.g. linear subspace)."""


class BadThresholds(ManifoldScoreError):
    """Time-switch thresholds must satisfy t_large < t_small."""


class NegativeTime(ManifoldScoreError):
    """Diffusion time must be nonnegative."""


class DivergenceDetected(ManifoldScoreError):
    """Training loss became non-finite."""


class TrajectoryAbort(ManifoldScoreError):
    """Too many backward trajectories aborted on score failures."""


class SizeMismatch(ManifoldScoreError):
    """Point clouds must have equal size for the exact W1 solver."""


class TooLarge(ManifoldScoreError):
    """Cloud exceeds the exact-solver size cap; use the sliced estimator."""


class ConfigError(ManifoldScoreError):
    """Experiment configuration failed schema validation."""
