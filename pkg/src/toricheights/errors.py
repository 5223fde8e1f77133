class PreconditionError(ValueError):
    """An operation was called outside its domain.

    ``code`` is a short machine-readable tag such as ``"NOT_IN_LATTICE"``.
    """

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class SpecParseError(ValueError):
    """A fan-spec document could not be parsed."""


class InvariantError(RuntimeError):
    """An internal consistency check failed."""
