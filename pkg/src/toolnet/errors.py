"""Exception hierarchy.

Everything a caller can fix by changing its input derives from
:class:`ValidationError`; the CLI maps those to exit code 2.
"""


class ToolNetError(Exception):
    """Base class for all library errors."""


class ValidationError(ToolNetError, ValueError):
    """Input violates a documented precondition."""


class DuplicateToolId(ValidationError):
    pass


class ReservedToolId(ValidationError):
    pass


class EmptyToolSet(ValidationError):
    pass


class UnknownNode(ValidationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EndHasNoSuccessors(ValidationError):
    pass


class MalformedGraph(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class UnknownToolInCorpus(ValidationError):
    pass


class NonPositiveAlpha(ValidationError):
    pass


class UnknownToolInReport(ValidationError):
    pass


class ScoreOutOfRange(ValidationError):
    pass


class NoActiveTools(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class SpecMismatch(ValidationError):
    pass


class PolicyChoseUnavailableTool(ToolNetError):
    """A policy returned a tool that was not among the offered options."""


class EnvironmentFault(ToolNetError):
    """Raised by an environment when a tool call fails.

    The session loop turns it into an ``ERROR: ...`` observation.
    """
