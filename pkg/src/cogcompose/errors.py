"""Exception types raised across the package."""


class CompositionError(Exception):
    """Base class for every error raised by cogcompose."""


class IntersectionViolation(CompositionError):
    """An abstract service's conditions are not the intersection of its realizers'."""


class DuplicateId(CompositionError):
    pass


class UnknownStimulusClass(CompositionError):
    pass


class LengthMismatch(CompositionError, ValueError):
    pass


class NoReachableRealizer(CompositionError):
    """No concrete service can currently be bound; the composition must replan."""

    def __init__(self, service_id: str, message: str = ""):
        self.service_id = service_id
        super().__init__(message or f"no reachable realizer for {service_id!r}")


class ConstraintViolation(CompositionError, ValueError):
    pass


class GoalNotSatisfied(CompositionError):
    pass


class NoCMCapableDevice(CompositionError):
    pass


class GroupOrphaned(CompositionError):
    pass


class CrossSessionDenied(CompositionError):
    pass


class ConfigInvalid(CompositionError, ValueError):
    pass
