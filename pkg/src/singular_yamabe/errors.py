"""Exception hierarchy shared by the library and the command line."""


class ParameterError(ValueError):
    """Input outside the admissible range of an operation (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """An integration, quadrature or root-finding step did not succeed (exit 1)."""


class NoFowlerMatch(Exception):
    """Sampled data is not asymptotic to any Fowler solution (exit 3).

    Raised when the radial Pohozaev invariant of the data is zero or lies
    outside the energy range of the periodic orbits, which is what happens
    for removable singularities.
    """
