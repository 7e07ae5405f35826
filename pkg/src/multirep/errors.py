"""Exception hierarchy shared across the engine.

Every error carries a stable short code so the CLI can print
machine-greppable messages (``E_DIM_MISMATCH: ...``).
"""


class MultirepError(Exception):
    code = "E_GENERIC"

    def __str__(self) -> str:
        return f"{self.code}: {super().__str__()}"


class UnknownTemplate(MultirepError):
    code = "E_UNKNOWN_TEMPLATE"


class TooLong(MultirepError):
    code = "E_TOO_LONG"


class DimensionMismatch(MultirepError):
    code = "E_DIM_MISMATCH"


class BadSchedule(MultirepError):
    code = "E_BAD_SCHEDULE"


class MissingLogits(MultirepError):
    code = "E_MISSING_LOGITS"


class FilterMismatch(MultirepError):
    code = "E_FILTER_MISMATCH"


class QueryIdMismatch(MultirepError):
    code = "E_QUERY_ID_MISMATCH"


class DuplicateDoc(MultirepError):
    code = "E_DUPLICATE_DOC"


class EmptyIndex(MultirepError):
    code = "E_EMPTY_INDEX"


class TooFewRows(MultirepError):
    code = "E_TOO_FEW_ROWS"


class MissingIndex(MultirepError):
    code = "E_MISSING_INDEX"


class BadIndex(MultirepError):
    code = "E_BAD_INDEX"


class EmptyBatch(MultirepError):
    code = "E_EMPTY_BATCH"


class LengthMismatch(MultirepError):
    code = "E_LENGTH_MISMATCH"


class IncompleteGrid(MultirepError):
    code = "E_INCOMPLETE_GRID"


class BadFormat(MultirepError):
    code = "E_BAD_FORMAT"


class BadConfig(MultirepError):
    code = "E_BAD_CONFIG"
