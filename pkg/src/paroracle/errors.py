"""Exception hierarchy shared by every module of the oracle."""

from __future__ import annotations


class OracleError(Exception):
    """Base class for all errors raised by paroracle."""


class ParseError(OracleError):
    """Malformed input file; carries the 1-based line and offending field."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(OracleError):
    """Input parsed fine but violates a descriptor invariant."""


class NonPositiveOutput(ValidationError):
    """Convolution arithmetic produced an output extent below 1."""


class TierExhausted(OracleError):
    """Communicator is larger than the largest network tier."""


class InsufficientSamples(OracleError):
    pass


class DegenerateFit(OracleError):
    """Benchmark features are collinear or the fit is not physical."""


class SplitTooFine(OracleError):
    """A spatial shard is narrower than the halo it has to provide."""


class MissingTiming(OracleError):
    pass


class ZeroMeasured(OracleError):
    pass
