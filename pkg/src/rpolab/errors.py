class ConfigError(ValueError):
    """Invalid configuration detected before any training work starts."""


class UsageError(RuntimeError):
    """An API was driven outside its contract (e.g. stepping a finished episode)."""


class InternalError(RuntimeError):
    """Internal bookkeeping is inconsistent (e.g. a stale forward cache)."""


class TrainingDiverged(RuntimeError):
    """A non-finite loss or ratio was produced during an update.

    Carries a ``diagnostics`` dict with the offending scalars so the run
    can be dumped and inspected.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
