"""Exception hierarchy shared by all fieldalign modules.

Every error carries the name of the module it originated in, so the CLI and
the review service can report provenance, plus a process exit code class
(3 = data/configuration problem, 4 = numeric or infeasibility problem).
"""

from __future__ import annotations


class FieldAlignError(Exception):
    """Base class for all errors raised by this package."""

    module = "core"
    exit_code = 3

    def __init__(self, message: str, *, module: str | None = None):
        super().__init__(message)
        if module is not None:
            self.module = module


class TableLoadError(FieldAlignError):
    module = "ingest"


class TableParseError(TableLoadError):
    """Malformed data row. ``row`` is the 1-based physical line number."""

    def __init__(self, message: str, *, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


class EmptySampleError(FieldAlignError):
    module = "ingest"


class UnknownColumnError(FieldAlignError):
    module = "ingest"


class ConfigurationError(FieldAlignError):
    module = "core"


class DegenerateTrainingError(FieldAlignError):
    module = "classify"


class DivergenceError(FieldAlignError):
    """Training objective became non-finite. ``pass_number`` is 1-based."""

    module = "classify"
    exit_code = 4

    def __init__(self, message: str, *, pass_number: int):
        super().__init__(f"pass {pass_number}: {message}")
        self.pass_number = pass_number


class UnknownLabelError(FieldAlignError):
    module = "evaluate"


class DivisionGuardError(FieldAlignError):
    module = "align"
    exit_code = 4


class InfeasibleMatchingError(FieldAlignError):
    module = "evaluate"
    exit_code = 4


class SessionError(FieldAlignError):
    module = "service"


class SessionNotFoundError(SessionError):
    pass


class DecisionConflictError(SessionError):
    """A one-to-one accept collided with an existing accept."""

    def __init__(self, message: str, *, holding_row: str):
        super().__init__(message)
        self.holding_row = holding_row


class UploadTooLargeError(SessionError):
    def __init__(self, message: str, *, limit: int):
        super().__init__(message)
        self.limit = limit
