"""Exception hierarchy.

Every numerical failure derives from :class:`NumericalFailure` so the CLI can
map it to exit code 3; malformed input raises :class:`ConfigError` (exit 2).
"""


class MJSpectraError(Exception):
    pass


class ConfigError(MJSpectraError, ValueError):
    pass


class NumericalFailure(MJSpectraError):
    pass


# hamiltonian_models
class ChartViolation(NumericalFailure, ValueError):
    pass


class Degenerate(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class OutOfRange(NumericalFailure, ValueError):
    def __init__(self, msg, node=None):
        super().__init__(msg)
        self.node = node


class EnergyTooLow(NumericalFailure, ValueError):
    pass


# flow
class StepUnderflow(NumericalFailure):
    pass


class EmptyTrajectory(NumericalFailure, ValueError):
    pass


class NoCrossing(NumericalFailure):
    pass


class Tangency(NumericalFailure):
    pass


class TooFewSamples(NumericalFailure, ValueError):
    pass


class NotPeriodic(NumericalFailure):
    pass


class IllConditioned(NumericalFailure):
    pass


# action_angle
class EmptyTorus(NumericalFailure, ValueError):
    pass


class SingularJacobian(NumericalFailure):
    pass


class ClassificationChange(NumericalFailure):
    pass


# mj_correspondence
class NotOnSurface(NumericalFailure, ValueError):
    pass


class NotParallel(NumericalFailure):
    pass


class SmallDivisor(NumericalFailure):
    pass


class ResidualTooLarge(NumericalFailure):
    pass


# bsm_quantize / spectral_oracle
class WindowEmpty(NumericalFailure):
    pass


class NotPositive(NumericalFailure):
    pass


class NotConverged(NumericalFailure):
    pass


class TooFewEigenvalues(NumericalFailure, ValueError):
    pass


# larmor / katok
class NotRational(NumericalFailure, ValueError):
    pass


class DegenerateCritical(NumericalFailure):
    pass


class NotClosed(NumericalFailure):
    pass
