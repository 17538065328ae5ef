"""Exception types shared across the package."""


class TablescoutError(Exception):
    """Base class for all package errors."""


class EmptyCorpus(TablescoutError):
    """No table could be loaded from the corpus root."""


class MalformedGraph(TablescoutError):
    """A join graph file could not be parsed into an edge list."""


class EncoderFailure(TablescoutError):
    """An encoder backend returned an error or malformed vectors."""


class DimensionMismatch(TablescoutError):
    """A query vector does not match the index dimensionality."""


class IndexFormatError(TablescoutError):
    """A header index file is corrupt or has an unsupported version."""


class UnparseableOutput(TablescoutError):
    """An LLM parse response did not follow the two-line contract."""


class LlmFailure(TablescoutError):
    """A remote LLM call failed after all retries."""


class UnknownHeader(TablescoutError):
    """A header name is absent from the corpus statistics."""


class GroupExplosion(TablescoutError):
    """Connected-subgraph enumeration exceeded the configured cap."""

    def __init__(self, cap: int):
        super().__init__(f"candidate group enumeration exceeded cap of {cap}")
        self.cap = cap


class InvalidSql(TablescoutError):
    """Generated SQL failed the identifier allowlist validation."""


class EngineError(TablescoutError):
    """The SQL engine rejected or failed to execute a statement."""


class MissingQuestion(TablescoutError):
    """Predictions and truth do not cover the same question ids."""


class ConfigError(TablescoutError):
    """Engine configuration is missing, malformed, or inconsistent."""
