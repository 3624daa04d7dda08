"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


class ContractError(EngineError):
    """A precondition or invariant was violated by the caller."""


class IndexOrderError(ContractError):
    """A turn was appended out of order."""


class BudgetError(EngineError):
    """The prompt cannot fit the history budget even after full eviction."""


class MediaError(EngineError):
    """An audio or camera resource could not be resolved."""


class ProtocolError(EngineError):
    """A backend payload or request violated the wire contract."""


class ScriptExhaustedError(ProtocolError):
    """A mock script ran out of entries (or no entry matched)."""


class StageTimeoutError(EngineError):
    """A pipeline stage exceeded its configured timeout."""

    def __init__(self, stage: str, message: str | None = None):
        super().__init__(message or f"stage '{stage}' timed out")
        self.stage = stage


class TurnAbortedError(EngineError):
    """A turn was abandoned mid-flight; the session is Faulted until reset."""

    def __init__(self, stage: str, message: str | None = None):
        super().__init__(message or f"turn aborted in stage '{stage}'")
        self.stage = stage


class NoDataError(EngineError):
    """A summary was requested from an empty recorder."""


class SuiteError(EngineError):
    """A scenario suite file failed to parse or validate."""


class ConfigError(EngineError):
    """A session or server configuration is invalid."""


class SessionNotFoundError(EngineError):
    """The session id is unknown to this server."""


class SessionBusyError(EngineError):
    """The session already has a turn in flight."""
