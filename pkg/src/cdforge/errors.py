"""Exception types shared across the package."""


class ForgeError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(ForgeError):
    """A setting or input violates a precondition (bad vocab size, empty corpus, ...)."""


class ContractError(ForgeError):
    """A value broke an internal contract (mismatched vocabularies, invalid distribution)."""


class RegistryError(ForgeError):
    """A checkpoint lookup failed (unknown family or step)."""


class PairingError(ForgeError):
    """Outcome matrices are misaligned and cannot be compared pairwise."""


class TokenDecodeError(ForgeError):
    """decode() was handed an id outside the vocabulary."""


class PipelineStageError(ForgeError):
    """A pipeline stage failed; carries the stage name and completed-stage manifest."""

    def __init__(self, stage: str, completed: list, cause: BaseException):
        super().__init__(f"stage '{stage}' failed after completing {completed}: {cause}")
        self.stage = stage
        self.completed = completed
        self.cause = cause
