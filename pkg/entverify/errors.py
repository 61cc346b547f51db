"""Exception hierarchy shared by the services, serialization and CLI layers."""


class EntVerifyError(ValueError):
    """Base class for every input or consistency error raised by entverify."""


class ShapeMismatchError(EntVerifyError):
    def __init__(self, message, wire=None):
        super().__init__(message)
        self.wire = wire


class RegionMismatchError(EntVerifyError):
    pass


class DimensionError(EntVerifyError):
    pass


class DimensionMismatchError(EntVerifyError):
    pass


class ConventionError(EntVerifyError):
    pass


class NotCompletelyPositiveError(EntVerifyError):
    def __init__(self, message, block=None, eigenvalue=None):
        super().__init__(message)
        self.block = block
        self.eigenvalue = eigenvalue


class NormalizationError(EntVerifyError):
    pass


class ZeroStateError(EntVerifyError):
    pass


class NonMinimalDilationError(EntVerifyError):
    pass


class InconsistentDilationError(EntVerifyError):
    pass


class InvalidUEBError(EntVerifyError):
    pass


class InvalidBijectionError(EntVerifyError):
    pass


class InvalidCertificateError(EntVerifyError):
    pass


class SchemaError(EntVerifyError):
    """Raised when a JSON document does not match the expected schema.

    ``pointer`` is a JSON pointer (RFC 6901) to the offending value.
    """

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class NotAnIsometryError(EntVerifyError):
    pass
