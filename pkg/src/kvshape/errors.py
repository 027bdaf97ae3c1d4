"""Exception types for the shape-inversion toolkit.

Every guard in the library raises one of these with a stable, documented
message prefix, so callers (and the CLI) can match on either the type or the
text. The prefix strings are part of the public contract and must not change.
"""


class ToolkitError(Exception):
    """Base class for all toolkit-specific failures."""


class DegenerateShapeError(ToolkitError):
    """Radial map touches or crosses zero: the curve is not a simple closed
    boundary. Message prefix: ``degenerate shape``."""


class MarginViolationError(ToolkitError):
    """Curve leaves the admissible band inside the outer domain.
    Message prefix: ``violates d0 margin``."""


class SingularEvaluationError(ToolkitError):
    """Kernel evaluated at coincident points. Message prefix:
    ``singular evaluation``."""


class DisjointBoundariesError(ToolkitError):
    """Two curves intersect or nearly touch where a smooth-kernel quadrature
    was requested. Message prefix: ``boundaries must be disjoint``."""


class IllConditionedSystemError(ToolkitError):
    """Block integral system is numerically singular (condition above 1e12).
    Message prefix: ``integral system ill-conditioned``."""


class CapacityDegeneracyError(ToolkitError):
    """Single-layer operator on the inclusion is near-singular because the
    boundary sits near unit logarithmic capacity. Message prefix:
    ``capacity degeneracy: rescale geometry``."""


class IncompatibleDataError(ToolkitError):
    """Neumann data violates the divergence-theorem solvability condition.
    Message prefix: ``Neumann data incompatible``."""


class NearSingularEvaluationError(ToolkitError):
    """Interior evaluation requested too close to a boundary. Message prefix:
    ``near-singular evaluation refused``."""


class NotCriticalError(ToolkitError):
    """Critical-point Hessian requested for data that do not make the shape a
    critical configuration. Message prefix: ``not a critical configuration``."""


class InadmissibleStepError(ToolkitError):
    """Shape update leaves the admissible set. Message prefix:
    ``step leaves admissible set``."""


class LineSearchError(ToolkitError):
    """Backtracking found no admissible decreasing step. Message prefix:
    ``line search failed``."""


class ConfigError(ToolkitError):
    """Run configuration invalid; the message names the offending key."""
