"""Exception hierarchy.

``DataError`` subclasses describe bad input (traces, samples, configs) and map
to CLI exit code 2; everything else under ``TmrmError`` is a library-level
failure.
"""


class TmrmError(Exception):
    pass


class DataError(TmrmError):
    pass


class TraceFormatError(DataError):
    """A trace file line failed to parse or violates the schema."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TraceTooShortError(DataError):
    def __init__(self, trace_index, length):
        self.trace_index = trace_index
        self.length = length
        super().__init__(
            f"trace {trace_index} has {length} step(s); at least 2 are needed "
            "to know a successor observation"
        )


class InconsistentSamplesError(DataError):
    """Two samples disagree on the output of one alpha-input at one beta-prefix."""

    def __init__(self, sample_indices, prefix, alpha, outputs):
        self.sample_indices = tuple(sample_indices)
        self.prefix = tuple(prefix)
        self.alpha = alpha
        self.outputs = tuple(outputs)
        super().__init__(
            f"samples {self.sample_indices[0]} and {self.sample_indices[1]} give "
            f"different outputs {self.outputs[0]!r} / {self.outputs[1]!r} for "
            f"{alpha!r} after beta-prefix of length {len(self.prefix)}"
        )


class UnknownSymbolError(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownStateError(TmrmError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UndefinedStepError(TmrmError):
    """A run hit a missing transition or output."""

    def __init__(self, message, position=None):
        self.position = position
        super().__init__(message)


class ReductionConflictError(TmrmError):
    pass


class GenerationError(TmrmError):
    pass


class BudgetExceededError(TmrmError):
    pass


class ConfigError(DataError):
    pass
