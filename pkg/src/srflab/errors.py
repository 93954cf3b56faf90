"""Exception hierarchy for the Sasaki-Ricci flow laboratory."""


class SrflabError(Exception):
    """Base class for all laboratory errors."""


# geometry construction
class NonPositiveMetric(SrflabError):
    def __init__(self, msg, point=None, eigenvalue=None):
        super().__init__(msg)
        self.point = point
        self.eigenvalue = eigenvalue


class GridTooCoarse(SrflabError):
    pass


class SingularMetric(SrflabError):
    pass


class VectorNotInD(SrflabError):
    pass


class NonPositiveParameter(SrflabError):
    pass


# flow engine
class SolverDiverged(SrflabError):
    pass


class IncompatibleClass(SrflabError):
    pass


class MetricDegenerated(SrflabError):
    pass


class StepRejected(SrflabError):
    def __init__(self, msg, suggested_dt=None):
        super().__init__(msg)
        self.suggested_dt = suggested_dt


class InsufficientCheckpoints(SrflabError):
    pass


class LowerBoundViolated(SrflabError):
    pass


# hodge
class DegreeOverflow(SrflabError):
    pass


class DegreeUnderflow(SrflabError):
    pass


class NonPeriodicChart(SrflabError):
    pass


# entropy
class ConstraintUnsatisfiable(SrflabError):
    pass


class MaxIterations(SrflabError):
    pass


class NegativeMinimizer(SrflabError):
    pass


class NonPositiveTau(SrflabError):
    pass


class TrajectoryGap(SrflabError):
    pass


class NegativeEvolution(SrflabError):
    pass


# quotient
class ShootingNoConverge(SrflabError):
    pass


# positivity
class ZeroVector(SrflabError):
    pass


class FrameDegenerate(SrflabError):
    pass


# cli
class ConfigInvalid(SrflabError):
    pass


class RunFailed(SrflabError):
    pass


class SchemaMismatch(SrflabError):
    pass
