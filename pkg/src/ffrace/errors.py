"""Exception hierarchy shared by the library and the CLI."""


class FFRaceError(Exception):
    """Base class for library errors."""


class PreconditionError(FFRaceError, ValueError):
    """An argument violates a documented precondition."""


class PolySyntaxError(PreconditionError):
    """Polynomial text does not follow the grammar."""


class CapExceededError(FFRaceError):
    """A configured size cap (phi, degree, draws) would be exceeded."""


class NumericalError(FFRaceError):
    """A numerical kernel failed to meet its residual tolerance."""


class DegenerateSpectrumError(NumericalError):
    """The spectrum cannot support the requested density computation."""
