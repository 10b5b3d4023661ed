"""Exception hierarchy shared across the pipeline.

Grouped by how the CLI maps them to exit codes: config errors exit 2,
data errors exit 3, schema errors exit 4, anything else exit 1.
"""


class TakeoverError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(TakeoverError):
    """Invalid configuration, spec, or command-line input."""


class InvalidSpec(ConfigError):
    pass


class DataError(TakeoverError):
    """Input data violates a precondition of an operation."""


class DegenerateSeries(DataError):
    pass


class InvalidCutoff(ConfigError):
    pass


class TooFewBeats(DataError):
    pass


class InsufficientHistory(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class AllMissingColumn(DataError):
    pass


class DegenerateColumn(DataError):
    pass


class NegativeTime(DataError):
    pass


class NegativeDeviation(DataError):
    pass


class TooFewMinoritySamples(DataError):
    pass


class TooFewGroups(DataError):
    pass


class EmptyPartition(DataError):
    pass


class EmptyPredictions(DataError):
    pass


class SingleClassData(DataError):
    pass


class SingleClassPresent(DataError):
    pass


class SchemaError(TakeoverError):
    """Input does not match the expected schema."""


class UnknownChannel(SchemaError):
    pass


class UnknownCategory(SchemaError):
    pass


class DimensionMismatch(SchemaError):
    pass


class ShapeMismatch(SchemaError):
    pass


class SchemaMismatch(SchemaError):
    pass


class IoFailure(TakeoverError):
    pass
