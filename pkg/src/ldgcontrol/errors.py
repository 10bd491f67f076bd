"""Exception hierarchy shared by the solver, optimizer and command line."""


class LdgError(Exception):
    """Base class; ``code`` is the process exit status used by the CLI."""

    code = 1


class PreconditionError(LdgError, ValueError):
    code = 2


class ConfigError(LdgError, ValueError):
    code = 3


class LinearSolveError(LdgError, RuntimeError):
    code = 4

    def __init__(self, message, step=None, iterations=None, indefinite=False):
        super().__init__(message)
        self.step = step
        self.iterations = iterations
        self.indefinite = indefinite


class NewtonError(LdgError, RuntimeError):
    code = 5

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual
