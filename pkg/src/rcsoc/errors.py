"""Exception types shared across the package."""


class RcsocError(Exception):
    """Base class for all package-specific errors."""


class BasisMismatchError(RcsocError, ValueError):
    """A field or coefficient table does not match the plane-wave basis."""


class CavitySolveError(RcsocError, RuntimeError):
    """The 4x4 cavity steady-state system could not be solved."""


class NotConvergedError(RcsocError, RuntimeError):
    """An operation requires a converged steady state but got a bad one."""


class NodalSpinError(RcsocError, RuntimeError):
    """The transverse spin vanishes on an extended region; the spin angle
    (and hence the winding number) is undefined there."""


class StepTooLargeError(RcsocError, RuntimeError):
    """A real-time integration step violated the norm-drift bound even
    after adaptive refinement."""


class SpecMismatchError(RcsocError, ValueError):
    """A sweep checkpoint does not belong to the requested sweep spec."""
