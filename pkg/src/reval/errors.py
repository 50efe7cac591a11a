"""Exception hierarchy shared across the package."""

from __future__ import annotations


class RevalError(Exception):
    """Base class for all package errors."""


# --- report parsing ---------------------------------------------------------

class EmptyInput(RevalError):
    """Report markdown was blank or whitespace-only."""


class MalformedUrl(RevalError):
    """Input is not an absolute http(s) URL."""


class UnknownSuffix(RevalError):
    """Host has no registrable domain (bare IP, localhost, suffix-only host)."""

    def __init__(self, host: str):
        super().__init__(f"no registrable domain for host: {host}")
        self.host = host


# --- gateway ----------------------------------------------------------------

class SchemaViolation(RevalError):
    """Provider output failed schema validation after all repair attempts."""


class BackendUnavailable(RevalError):
    """No live backend configured or the provider is unreachable."""


class FixtureMiss(RevalError):
    """Replay mode found no recording for the request."""

    def __init__(self, digest: str):
        super().__init__(f"no fixture recorded for request digest {digest}")
        self.digest = digest


class AttemptsExhausted(RevalError):
    """Repair loop ran out of attempts."""


# --- evidence ---------------------------------------------------------------

class RateLimited(RevalError):
    """Search backend rate limit persisted through retries."""


# --- protocol ---------------------------------------------------------------

class BudgetExhausted(RevalError):
    """Agent step budget hit before the minimum item count was reached."""


class PlanToolMismatch(RevalError):
    """A validation plan references a tool outside the selected roster."""


class SchemaVersionMismatch(RevalError):
    """Stored artifact carries an unsupported version tag."""


class CorruptFile(RevalError):
    """Stored artifact failed to parse."""


# --- workflow / adaptive ----------------------------------------------------

class EmptyReport(RevalError):
    """Report has no usable body text."""


# --- scoring ----------------------------------------------------------------

class PreconditionViolation(RevalError):
    """A scoring function was called with inconsistent inputs."""


class EmptyChecklist(RevalError):
    """KIC scoring requires at least one checklist item."""


class EmptyResults(RevalError):
    """RQ scoring requires at least one item result."""


class EmptyTaskSet(RevalError):
    """Aggregation requires at least one scorecard."""


# --- harness ----------------------------------------------------------------

class FormatError(RevalError):
    """Pair file violates the documented format."""

    def __init__(self, message: str, index: int | None = None):
        if index is not None:
            message = f"entry {index}: {message}"
        super().__init__(message)
        self.index = index


class DegenerateBaseline(RevalError):
    """Matched-pair comparison with a zero sound-report score."""


# --- cli --------------------------------------------------------------------

class MissingProtocol(RevalError):
    """Adaptive metrics requested without a protocol file for the task."""
