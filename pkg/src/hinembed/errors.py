"""Exception types raised across the package."""


class HinEmbedError(Exception):
    """Base class for all package errors."""


class SchemaError(HinEmbedError, ValueError):
    pass


class GraphError(HinEmbedError, ValueError):
    pass


class MetagraphError(HinEmbedError, ValueError):
    """Invalid metagraph text or structure.

    ``line`` and ``column`` are 1-based and refer to the DSL source when the
    error comes from parsing; both are ``None`` for structural errors found
    after parsing.
    """

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)


class WalkError(HinEmbedError, ValueError):
    pass


class TrainingError(HinEmbedError, RuntimeError):
    pass


class EvaluationError(HinEmbedError, ValueError):
    pass
