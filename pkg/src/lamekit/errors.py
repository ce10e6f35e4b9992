"""Exception types shared across modules."""


class ParameterError(ValueError):
    """Lame constants or configuration values outside the admissible range."""


class SchemaError(ValueError):
    """A serialised object does not match its schema.

    ``pointer`` is a JSON pointer to the offending entry.
    """

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"


class NumericalError(RuntimeError):
    """A numerical procedure failed to reach its accuracy target."""
