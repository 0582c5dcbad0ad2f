"""Exception hierarchy shared across the package."""


class CuspSpectraError(Exception):
    """Base class for all package errors."""


class DomainError(CuspSpectraError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class UnsupportedError(DomainError):
    """The operation is undefined for this input shape (e.g. too few fibers)."""


class NumericalError(CuspSpectraError, RuntimeError):
    """A numerical routine failed to meet its accuracy contract."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = dict(diagnostics)


class TailClassificationError(NumericalError):
    """A declared potential tail failed pointwise verification."""


class RefinementError(NumericalError):
    """The band scan detected an inconsistency; rerun with a smaller resolution."""
