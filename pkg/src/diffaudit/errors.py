"""Exception hierarchy. Each class carries the CLI exit code for its error family."""


class AuditError(Exception):
    exit_code = 1


class InvalidInputError(AuditError, ValueError):
    exit_code = 5


class MissingFieldError(InvalidInputError):
    def __init__(self, field, source=None):
        self.field = field
        where = f" in {source}" if source else ""
        super().__init__(f"missing mapped field {field!r}{where}")


class InconsistencyError(AuditError):
    exit_code = 5


class ShortfallError(InvalidInputError):
    """Not enough examples in a pool to draw a balanced sample."""


class ConfigurationError(AuditError):
    exit_code = 3


class DependencyError(AuditError):
    """A stage was run before the stage producing its inputs."""

    exit_code = 4

    def __init__(self, path, stage=None):
        self.path = str(path)
        hint = f" (run `{stage}` first)" if stage else ""
        super().__init__(f"required input {self.path} does not exist{hint}")


class ReplayMissError(AuditError):
    exit_code = 6

    def __init__(self, call_key, role):
        self.call_key = call_key
        self.role = role
        super().__init__(f"no recorded fixture for role {role!r}, call_key {call_key}")


class TransportError(AuditError):
    exit_code = 7

    def __init__(self, message, attempts=()):
        self.attempts = list(attempts)
        super().__init__(message)


class StageError(AuditError):
    exit_code = 8
