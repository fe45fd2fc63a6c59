"""Exception types shared across the platform.

Every error the HTTP layer turns into a structured response lives here so
handlers can map exception class -> status code in one place.
"""
from __future__ import annotations


class ToxiscopeError(Exception):
    """Base class for all platform errors."""


# --- store ---------------------------------------------------------------

class NoTextColumn(ToxiscopeError):
    """Uploaded header has no recognizable text column."""


class ParseError(ToxiscopeError):
    def __init__(self, row: int, reason: str = "malformed row"):
        self.row = row
        self.reason = reason
        super().__init__(f"row {row}: {reason}")


class NotFound(ToxiscopeError):
    """Dataset, conversation, job or session does not exist."""


class WrongLayout(ToxiscopeError):
    """Operation requires the other dataset layout."""


class BuiltinProtected(ToxiscopeError):
    """Builtin benchmark datasets cannot be deleted."""


# --- classify ------------------------------------------------------------

class BackendUnavailable(ToxiscopeError):
    """Classifier backend unknown or unreachable."""


class SchemaMismatch(ToxiscopeError):
    pass


class MissingMember(ToxiscopeError):
    """Ensemble input does not cover exactly the configured members."""


class KOutOfRange(ToxiscopeError):
    pass


class LengthMismatch(ToxiscopeError):
    pass


class UnknownLabel(ToxiscopeError):
    pass


class UnparseableVerdict(ToxiscopeError):
    """LM verification reply had no AGREE/DISAGREE token, even after retry."""


# --- lm gateway ----------------------------------------------------------

class LmUnavailable(ToxiscopeError):
    """Provider unreachable, or kept failing after bounded retries."""


class ContextTooLong(ToxiscopeError):
    pass


class StreamInterrupted(ToxiscopeError):
    """Stream dropped before completion; partial text is retained."""

    def __init__(self, partial_text: str):
        self.partial_text = partial_text
        super().__init__(f"stream interrupted after {len(partial_text)} chars")


class CapabilityMissing(ToxiscopeError):
    """Provider does not advertise the requested capability."""

    def __init__(self, provider_id: str, capability: str):
        self.provider_id = provider_id
        self.capability = capability
        super().__init__(f"provider {provider_id!r} lacks capability {capability!r}")


class LogprobsUnsupported(CapabilityMissing):
    def __init__(self, provider_id: str):
        super().__init__(provider_id, "logprobs")


# --- attribution / chunking ----------------------------------------------

class EmptyConversation(ToxiscopeError):
    pass


class EmptyScores(ToxiscopeError):
    pass


# --- summarize / persona / assistant --------------------------------------

class MissingPlaceholder(ToxiscopeError):
    def __init__(self, placeholder: str):
        self.placeholder = placeholder
        super().__init__(f"template lacks required placeholder {placeholder!r}")


class EmptySummary(ToxiscopeError):
    pass


class ParseFailure(ToxiscopeError):
    """Persona reply did not match the mandated response format."""


class UnknownTemplate(ToxiscopeError):
    pass


class MissingBinding(ToxiscopeError):
    def __init__(self, binding: str):
        self.binding = binding
        super().__init__(f"missing required binding {binding!r}")


# --- jobs / api ------------------------------------------------------------

class ValidationError(ToxiscopeError):
    pass


class QueueFull(ToxiscopeError):
    pass


class AlreadyTerminal(ToxiscopeError):
    """Job already finished; cannot cancel."""


class JobCancelled(ToxiscopeError):
    """Raised inside job runners when cancellation is observed."""
