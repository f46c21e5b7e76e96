"""Exception hierarchy shared by every tsce module."""


class TsceError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(TsceError):
    """A file or byte stream does not match its documented layout."""


class ParseError(TsceError):
    """A cell that should be numeric could not be parsed."""


class LabelError(TsceError):
    """A label outside the training alphabet was encountered."""


class ShapeError(TsceError):
    """Tensor shapes are inconsistent with a layer or model contract."""


class DomainError(TsceError):
    """An argument is outside the mathematical domain of an operation."""


class NumericsError(TsceError):
    """A numeric invariant was violated (NaN/Inf where finite is required)."""


class StateError(TsceError):
    """A cache or mutable state object was used out of sequence."""


class SpecError(TsceError):
    """A structural precondition on a model/ensemble/table was violated."""


class UnsupportedError(TsceError):
    """The requested operation is not defined for this model kind."""
