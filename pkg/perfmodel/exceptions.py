"""
Exception hierarchy for the performance model.
"""


class PerfModelError(Exception):
    """Base class for every error raised by the performance model."""


# CTMC core
class UnknownState(PerfModelError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"state {label!r} is not in the state space")


class NonPositiveRate(PerfModelError):
    def __init__(self, source, target, rate):
        self.rate = rate
        super().__init__(f"transition {source!r} -> {target!r} has non-positive rate {rate!r}")


class SelfLoop(PerfModelError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"self transition on state {label!r}")


class SingularOrReducible(PerfModelError):
    """No unique stationary distribution could be computed."""


class NotConverged(PerfModelError):
    """An iterative procedure exhausted its budget."""


class CapacityOverflow(PerfModelError):
    def __init__(self, count, limit):
        self.count = count
        self.limit = limit
        super().__init__(f"model needs {count} states, limit is {limit}")


# Coupling
class NonPositiveDelay(PerfModelError):
    def __init__(self, delay):
        self.delay = delay
        super().__init__(f"total macro delay must be positive, got {delay!r}")


class CouplingNotConverged(NotConverged):
    def __init__(self, solution):
        self.solution = solution
        super().__init__(
            f"fixed point not reached after {solution.outer_iterations} outer iterations"
        )


# Reports
class ConfigMismatch(PerfModelError):
    def __init__(self, left, right):
        super().__init__(f"reports come from different configs ({left[:12]} vs {right[:12]})")


# Simulation
class InvalidConfig(PerfModelError):
    """Simulation parameters are unusable."""


class SimulationInvariantError(PerfModelError):
    """A capacity or conservation invariant broke during simulation."""


# Configuration files
class ParseError(PerfModelError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnitError(PerfModelError):
    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")


class ValidationError(PerfModelError):
    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
