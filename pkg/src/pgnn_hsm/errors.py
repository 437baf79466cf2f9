"""Exception types.

``ConfigError`` maps to CLI exit code 1; every ``NumericalError`` maps to 2.
"""


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    hint = ""


class NonFiniteState(NumericalError):
    hint = "lower the gains or raise simulation.substeps"


class RankDeficient(NumericalError):
    hint = "the trace does not excite acceleration and velocity independently; collect data with motion"


class DivergedLoss(NumericalError):
    hint = "reduce train.learning_rate"


class TraceTooShort(ValueError):
    pass


class LookaheadUnavailable(ValueError):
    pass


class InvalidLimits(ConfigError):
    pass


class EmptyTrace(ValueError):
    pass
