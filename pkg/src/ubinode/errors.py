"""Exception hierarchy.

Every error raised on purpose by this package derives from ``UbinodeError``;
contract violations on plain values also derive from ``ValueError`` so callers
that only know the builtin still catch them.
"""


class UbinodeError(Exception):
    pass


# core model
class CatalogError(UbinodeError, ValueError):
    pass


class GrantError(UbinodeError, ValueError):
    pass


class UnknownFeatureError(GrantError):
    pass


class BitstringError(UbinodeError, ValueError):
    pass


class LengthMismatchError(UbinodeError, ValueError):
    pass


# collection
class LateEventError(UbinodeError, ValueError):
    """Event addressed to a window the collector already closed."""


class WindowOrderError(UbinodeError, ValueError):
    """Event addressed to a window the collector has not reached yet."""


class WrongNodeError(UbinodeError, ValueError):
    pass


# node agents and alarms
class AgentStateError(UbinodeError, RuntimeError):
    pass


class IsolatedNodeError(UbinodeError, RuntimeError):
    pass


class TopologyViolationError(UbinodeError, ValueError):
    pass


class ContractViolationError(UbinodeError, ValueError):
    pass


# topology / simulation
class TopologyError(UbinodeError, ValueError):
    pass


class ConfigError(UbinodeError, ValueError):
    pass


class TraceError(UbinodeError, ValueError):
    pass


# scenario documents
class ScenarioError(UbinodeError):
    category = "scenario"


class ScenarioParseError(ScenarioError):
    category = "parse"

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class UnresolvedReferenceError(ScenarioError):
    category = "unresolved_reference"


class InvariantViolationError(ScenarioError):
    category = "invariant_violation"


class ExportError(UbinodeError):
    pass


class UnknownFormatError(ExportError, ValueError):
    pass
