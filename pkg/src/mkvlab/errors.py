"""Exception types shared across the package."""


class MkvlabError(Exception):
    """Base class for all package errors."""


class EmptyMeasureError(MkvlabError):
    """Raised when a functional is evaluated against an empty measure."""


class KernelOverflowError(MkvlabError):
    """Raised when an interaction kernel returns a non-finite value."""


class BlowUpError(MkvlabError):
    """Raised when a particle update produces a non-finite state."""


class DomainExitError(MkvlabError):
    """Raised when a path leaves the transform field's safe margin."""


class ScenarioError(MkvlabError):
    """Raised on scenario-file parse or schema violations."""


class UnknownKernelError(MkvlabError):
    """Raised when a kernel name is not in the builtin registry."""


class LadderError(MkvlabError):
    """Raised when an experiment ladder has too few rungs."""


class OracleError(MkvlabError):
    """Raised when a scenario has no registered closed-form moment oracle."""
