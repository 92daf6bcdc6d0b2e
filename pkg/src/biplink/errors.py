"""Exception hierarchy shared by all biplink modules."""


class BiplinkError(Exception):
    """Base class for data-level failures (CLI exit code 2)."""


class InvalidNodeError(BiplinkError, IndexError):
    pass


class WrongSideError(BiplinkError, ValueError):
    pass


class EmptyGraphError(BiplinkError, ValueError):
    pass


class FormatError(BiplinkError, ValueError):
    pass


class CompositionError(BiplinkError, ValueError):
    pass


class PreconditionError(BiplinkError, ValueError):
    pass


class InfeasibleSplitError(BiplinkError, ValueError):
    pass


class StalePartitionError(BiplinkError, KeyError):
    pass


class UnknownIdError(BiplinkError, LookupError):
    pass


class DegreeCapError(BiplinkError, RuntimeError):
    pass
