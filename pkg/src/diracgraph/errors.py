"""Exception hierarchy shared by every module of the package."""


class DiracGraphError(Exception):
    """Base class for all package errors."""


# graph / mesh
class GraphError(DiracGraphError):
    pass


class InvalidGraphSpec(GraphError):
    pass


class EmptyCompactCore(GraphError):
    pass


class Disconnected(GraphError):
    pass


class DanglingEndpoint(GraphError):
    pass


class SpacingTooCoarse(GraphError):
    pass


# operators / spectral
class RankDeficiency(DiracGraphError):
    pass


class DimensionMismatch(DiracGraphError, ValueError):
    pass


class EigFailure(DiracGraphError):
    pass


# solvers
class DomainError(DiracGraphError, ValueError):
    pass


class NoDecay(DiracGraphError):
    """Solution carries too much mass near the artificial truncation ends."""


class FlowStagnation(DiracGraphError):
    pass


class ConcavityLoss(DiracGraphError):
    pass


class NewtonDivergence(DiracGraphError):
    pass


class GapViolation(DiracGraphError):
    """Multiplier left the admissible window [0, mc^2)."""


class BoundViolated(DiracGraphError):
    pass


# harness
class ConfigError(DiracGraphError):
    pass


class EmptySweep(ConfigError):
    pass


class InsufficientData(DiracGraphError, ValueError):
    pass


class IoError(DiracGraphError, OSError):
    pass
