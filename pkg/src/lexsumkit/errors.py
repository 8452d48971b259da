"""Exception types shared across the toolkit.

The CLI catches :class:`ToolkitError` to produce machine-readable error
reports; plain ``ValueError`` is reserved for programmer errors (violated
call preconditions).
"""


class ToolkitError(Exception):
    """Base class for recoverable, user-facing failures."""


class DatasetFormatError(ToolkitError):
    """A dataset or corpus file violates the expected JSON-Lines schema."""


class ProviderError(ToolkitError):
    """An embedding/NER/NLI backend failed or answered out of contract."""


class SentinelMismatchError(ToolkitError):
    """A denoising sample's input and target sentinels are inconsistent."""


class PoolExhaustedError(ToolkitError):
    """A pre-training pool ran out of windows before its sample quota."""

    def __init__(self, message: str, shortfall: int):
        super().__init__(message)
        self.shortfall = shortfall
