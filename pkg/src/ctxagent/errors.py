"""Exception hierarchy for the agent runtime.

Domain failures that the agent loop must survive (bad tool arguments,
malformed tool-call syntax) are *not* raised across module boundaries; they
become error observations. The exceptions here mark contract violations and
infrastructure faults.
"""


class CtxAgentError(Exception):
    """Base class for all runtime errors."""

    code = "internal_error"


# --- schema ---------------------------------------------------------------

class MissingField(CtxAgentError):
    code = "missing_field"

    def __init__(self, field: str):
        super().__init__(f"schema is missing required field: {field}")
        self.field = field


class MalformedParameters(CtxAgentError):
    code = "malformed_parameters"


class DuplicateToolId(CtxAgentError):
    code = "duplicate_tool_id"


# --- memory ---------------------------------------------------------------

class NonMonotoneTurn(CtxAgentError):
    code = "non_monotone_turn"


class EmptyOutput(CtxAgentError):
    """State-tracker backend produced whitespace-only output.

    Distinct from the explicit no-update sentinel: an empty completion means
    the backend misbehaved, not that there was nothing to record.
    """

    code = "empty_tracker_output"


# --- kv cache -------------------------------------------------------------

class AlreadyPrimed(CtxAgentError):
    code = "already_primed"


class NotPrimed(CtxAgentError):
    code = "not_primed"


# --- backend --------------------------------------------------------------

class BackendFailure(CtxAgentError):
    code = "backend_failure"


class ScriptExhausted(BackendFailure):
    code = "script_exhausted"


class ChannelMismatch(BackendFailure):
    code = "channel_mismatch"


# --- dispatch / tools -----------------------------------------------------

class UnknownTool(CtxAgentError):
    code = "unknown_tool"


class MalformedToolCall(CtxAgentError):
    """Tool-call tag present but its JSON payload does not parse."""

    code = "malformed_tool_call"


class SelectLoopDetected(CtxAgentError):
    code = "select_loop"


class TurnBudgetExceeded(CtxAgentError):
    code = "turn_budget_exceeded"


# --- service --------------------------------------------------------------

class RegistryNotFound(CtxAgentError):
    code = "registry_not_found"


class CapacityExceeded(CtxAgentError):
    code = "capacity_exceeded"


class SessionNotFound(CtxAgentError):
    code = "session_not_found"


class SessionClosed(CtxAgentError):
    code = "session_closed"


class UnknownFacet(CtxAgentError):
    code = "unknown_facet"
