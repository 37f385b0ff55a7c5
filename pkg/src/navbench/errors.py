"""Exception types shared across the benchmark toolkit."""


class BenchError(Exception):
    """Base class for all toolkit errors."""


class ParseError(BenchError):
    """A text input (grid, scene, config, suite) failed to parse."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        super().__init__(prefix + message)


class ValidationError(BenchError):
    """A loaded object violates one of its invariants."""


class OutOfBoundsError(BenchError):
    """A world-coordinate query fell outside the grid."""


class NoPathError(BenchError):
    """The global planner could not connect start and goal."""


class PlanInputError(BenchError):
    """A planning request violated a precondition."""
