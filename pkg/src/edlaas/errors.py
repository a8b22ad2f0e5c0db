"""Exception hierarchy shared across the package."""


class EdlaasError(Exception):
    """Base class for every error raised by this package."""


class ParameterMismatchError(EdlaasError, ValueError):
    """Operands were built for different moduli, degrees or parameter sets."""


class UnsupportedModulusError(EdlaasError, ValueError):
    """The modulus is not an NTT-friendly prime for the requested degree."""


class InvalidParamsError(EdlaasError, ValueError):
    pass


class EncodingOverflowError(EdlaasError, ValueError):
    """Scaled coefficients do not fit the modulus of the requested level."""


class NeedsRelinearizationError(EdlaasError):
    pass


class LevelMismatchError(EdlaasError):
    """Operands sit at different levels; align them with mod_switch_to first."""


class ScaleMismatchError(EdlaasError):
    pass


class OutOfLevelsError(EdlaasError):
    """The modulus chain is exhausted; there is no bootstrapping to recover."""

    def __init__(self, message: str, node: str | None = None):
        self.node = node
        if node is not None:
            message = f"{message} (at node {node!r})"
        super().__init__(message)


class DepthBudgetError(OutOfLevelsError):
    """Static precheck: the graph needs more levels than the input provides."""


class InvalidSwitchError(EdlaasError, ValueError):
    pass


class UnsupportedOnEncryptedError(EdlaasError, TypeError):
    pass


class TrainingStateError(EdlaasError):
    pass


class NonFiniteError(EdlaasError, FloatingPointError):
    pass


class ModelFileError(EdlaasError):
    pass


class WireError(EdlaasError, ValueError):
    """Base for frame decoding failures; no partial object is ever returned."""


class ChecksumError(WireError):
    pass


class VersionError(WireError):
    pass


class FrameFormatError(WireError):
    pass


class SecretKeyPolicyError(WireError):
    """A secret key showed up where only transmission data is allowed."""


class MissingKeyError(EdlaasError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "missing key"


class DecryptionCheckError(EdlaasError):
    """The sentinel slot did not decrypt to its known value."""


class WrangleError(EdlaasError, ValueError):
    pass


class ApiError(EdlaasError):
    """Non-success HTTP response, carrying the server's body verbatim."""

    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"HTTP {status}: {body}")
