"""Exception hierarchy.

Each family maps to a distinct process exit code used by the command line
driver: usage problems exit with 2, violated hypotheses with 3 and numerical
failures with 4.
"""


class FracNehariError(Exception):
    exit_code = 1


class UsageError(FracNehariError, ValueError):
    exit_code = 2


class ConfigError(UsageError):
    """Malformed or invalid run configuration."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class HypothesisError(FracNehariError, ValueError):
    exit_code = 3


class NumericalError(FracNehariError, RuntimeError):
    exit_code = 4

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        super().__init__(message)


class BranchUnavailableError(NumericalError):
    """The fibering map of a direction has no root on the requested branch."""
