"""Exception types shared across the package."""


class BlowflowError(Exception):
    """Base class for all package-specific failures."""


class DomainError(BlowflowError, ValueError):
    """A parameter lies outside the mathematical domain of the operation.

    Raised for dimensions outside 3..6, arguments on a Gamma pole, and
    similar hard domain violations.
    """


class PreconditionError(BlowflowError, ValueError):
    """An operation's documented precondition was violated by the caller."""


class SearchError(BlowflowError, RuntimeError):
    """A bracketing or iterative search failed to converge.

    Carries a ``history`` attribute with the bracket/iterate trail for
    diagnosis.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else []


class RangeError(SearchError):
    """A scanned range was too small to certify the requested result.

    ``required`` suggests how far the range must extend.
    """

    def __init__(self, message, required=None, history=None):
        super().__init__(message, history)
        self.required = required


class FitError(BlowflowError, RuntimeError):
    """A least-squares fit left residuals above the documented threshold."""

    def __init__(self, message, residual=None, threshold=None):
        super().__init__(message)
        self.residual = residual
        self.threshold = threshold


class MeshError(BlowflowError, RuntimeError):
    """Fatal mesh failure (tangling) in the moving-mesh solver.

    ``state`` holds a dump of the offending simulator state.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
