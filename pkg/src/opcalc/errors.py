"""Exception hierarchy shared by all opcalc modules.

Three families matter to callers (and to the CLI exit codes):

* ``FunctionSpecError`` -- a function-spec string or parameter set does not
  parse or is invalid (CLI exit 2).
* ``PreconditionError`` -- the mathematics refuses: spectra overlap, a point
  sits in a spectrum, a method's hypothesis fails (CLI exit 3).
* ``NumericalError`` -- an iteration or quadrature did not reach its target
  (CLI exit 4).
"""


class OpcalcError(Exception):
    """Base class for every error raised by opcalc."""


class FunctionSpecError(OpcalcError):
    """A function specification is malformed or names an unknown object."""


class UnknownBuiltin(FunctionSpecError):
    pass


class UnknownKernel(FunctionSpecError):
    pass


class InvalidParams(FunctionSpecError):
    pass


class PreconditionError(OpcalcError):
    """A mathematical precondition of the requested operation fails."""


class ShapeMismatch(PreconditionError):
    pass


class SingularResolvent(PreconditionError):
    """lambda*I - A is numerically singular: lambda lies in or near sigma(A)."""


class SingularPencil(PreconditionError):
    pass


class CannotSeparate(PreconditionError):
    """No contour can wind around one set while excluding the other."""


class SpectraOverlap(PreconditionError):
    pass


class ProductSpectrumHitsOne(PreconditionError):
    pass


class NuInSpectrum(PreconditionError):
    pass


class NotApplicable(PreconditionError):
    pass


class MethodNotApplicable(PreconditionError):
    pass


class NotASolution(PreconditionError):
    pass


class DegenerateDifferential(PreconditionError):
    pass


class NumericalError(OpcalcError):
    """An algorithm ran but failed to reach its accuracy or iteration target."""


class NoConvergence(NumericalError):
    pass


class QuadratureStall(NumericalError):
    """Node cap reached before the error estimate met the tolerance."""


class NewtonStall(NumericalError):
    pass


class DivergenceDetected(NumericalError):
    pass


class CertificationError(NumericalError):
    """A solver's own residual check failed after the fact."""
