"""Exception hierarchy shared across the harness."""


class EhrBenchError(Exception):
    """Base class for all harness errors."""


# --- data loading / validation ---

class SchemaMismatch(EhrBenchError):
    """Input file columns do not match the declared schema."""


class ParseError(EhrBenchError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvariantViolation(EhrBenchError):
    """A record violates a structural invariant (which record, which rule)."""


class OrdinalTimestamps(EhrBenchError):
    """Window aggregation requested on an index-only (ordinal) cohort."""


class DegenerateClass(EhrBenchError):
    """A label class has fewer members than the number of requested splits."""


class InsufficientClass(EhrBenchError):
    """Not enough records of a class to satisfy the requested subset."""


class MissingGroupStats(EhrBenchError):
    """In-context example synthesis lacks statistics for an outcome group."""


class UnknownSample(EhrBenchError):
    """Requested sample_id is not in the cohort."""


# --- gateway ---

class GatewayError(EhrBenchError):
    def __init__(self, message, sample_id=None):
        if sample_id is not None:
            message = f"sample {sample_id}: {message}"
        super().__init__(message)
        self.sample_id = sample_id


class EndpointUnreachable(GatewayError):
    pass


class AuthFailure(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class DimensionMismatch(EhrBenchError):
    """Embedding endpoint returned ragged vectors."""


class EmptyInput(EhrBenchError):
    pass


# --- metrics ---

class SingleClass(EhrBenchError):
    """Both label classes are required but only one is present."""


class NoPositives(EhrBenchError):
    pass


class ConstantInput(EhrBenchError):
    pass


class ZeroVector(EhrBenchError):
    pass


class OutOfRange(EhrBenchError):
    pass


# --- ICD hierarchy ---

class LayoutError(EhrBenchError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateCode(EhrBenchError):
    pass


class UnknownCode(EhrBenchError):
    pass


class TooFewItems(EhrBenchError):
    pass
