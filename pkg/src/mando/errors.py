"""Exception hierarchy shared across the package."""


class MandoError(Exception):
    """Base class for all errors raised by mando."""


class GraphError(MandoError):
    pass


class DuplicateNode(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class UnknownEndpoint(GraphError):
    pass


class MissingEntryPoint(GraphError):
    pass


class LexError(MandoError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ParseError(MandoError):
    def __init__(self, line: int, expected: str):
        super().__init__(f"line {line}: expected {expected}")
        self.line = line
        self.expected = expected


class SchemaError(MandoError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class UnknownMetapath(MandoError):
    pass


class TooManyTypes(MandoError):
    pass


class UnknownType(MandoError):
    pass


class CheckpointError(MandoError):
    pass


class LengthMismatch(MandoError):
    pass


class StratumTooSmall(MandoError):
    pass


class ManifestError(MandoError):
    pass
