"""Exception hierarchy shared across the engine."""


class DialogKGError(Exception):
    """Base class for every error raised by this package."""


class EmptyLabel(DialogKGError, ValueError):
    """A node label was empty after trimming."""


class NodeNotFound(DialogKGError, KeyError):
    """A node key was requested that does not exist in the graph."""


class ConfigError(DialogKGError, ValueError):
    """Invalid configuration value, file, or provider setup."""


class ProviderError(DialogKGError):
    """An embedding provider failed. Retriable.

    Attributes:
        text: the input string whose embedding was requested.
    """

    retriable = True

    def __init__(self, message: str, text: str | None = None):
        super().__init__(message)
        self.text = text


class ExtractionParseError(DialogKGError):
    """Extractor output could not be parsed as a JSON array."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class EmptySession(DialogKGError, ValueError):
    """Aggregation was requested over zero turns."""


class EvaluationError(DialogKGError):
    """A turn could not be scored; carries whatever was completed so far."""

    def __init__(self, message: str, turn: int | None = None, partial=None):
        super().__init__(message)
        self.turn = turn
        self.partial = partial
