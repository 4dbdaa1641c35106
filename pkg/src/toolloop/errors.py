"""Exception types shared across the package."""


class ToolloopError(Exception):
    """Base class for all package errors."""


class AlternationViolation(ToolloopError):
    """A segment was appended out of action/observation order."""


class AmbiguousStopToken(ToolloopError):
    """A stop string is a suffix of another registered stop string."""


class DuplicateToolId(ToolloopError):
    """Two plugins were registered under the same tool id."""


class UnknownTool(ToolloopError):
    """A tool id has no registered plugin."""


class UnknownEnv(ToolloopError):
    """An env update referenced a trajectory whose state was deleted."""


class MaskMismatch(ToolloopError):
    """Token, logprob, and mask lists disagree in length."""


class GroupTooSmall(ToolloopError):
    """Advantage normalization needs at least two rewards per group."""


class ConfigError(ToolloopError):
    """A config file failed validation; the message names the offending key or path."""


class ServerUnreachable(ToolloopError):
    """The tool server endpoint could not be reached."""


class EpisodeLogError(ToolloopError):
    """An episode log line failed to parse; the message names the line number."""
