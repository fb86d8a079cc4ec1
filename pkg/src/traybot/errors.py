"""Exception types shared across the stack."""


class TraybotError(Exception):
    """Base class for all stack-specific errors."""


class InvalidGeometryError(TraybotError):
    """World or manway geometry violates a structural invariant."""


class ConfigError(TraybotError):
    """A configuration file failed to load or validate."""


class PlannerStuckError(TraybotError):
    """Foothold replanning could not produce a safe placement."""


class StitchError(TraybotError):
    """Contact-plan stitching hit a pin conflict."""


class IkFailureError(TraybotError):
    """Inverse kinematics failed to converge within the iteration cap."""
