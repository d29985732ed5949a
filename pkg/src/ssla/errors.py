"""Exception hierarchy for the SSLA toolkit.

Every protocol-facing error carries a stable machine-readable ``code`` so
transports and logs can name the failure without parsing message text.
The code registry is documented in docs/formats.md and must never change
meaning between releases.
"""


class SslaError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


# --- vocabulary / expression errors -------------------------------------

class ExpressionSyntaxError(SslaError):
    """Malformed security expression text."""

    code = "expression_syntax"


class DimensionOrderError(ExpressionSyntaxError):
    """Compound expression segments are not in strictly increasing dimension order."""

    code = "dimension_order"


class FormatError(SslaError):
    """A dictionary, table, or config document does not match its schema."""

    code = "format"


class DuplicateOidError(FormatError):
    """The same OID appears twice in one dictionary."""

    code = "duplicate_oid"


class DimensionMismatchError(FormatError):
    """An OID's dimension does not match the dictionary or table column it sits in."""

    code = "dimension_mismatch"


class UnknownOidError(SslaError):
    """An expression references an OID that no dictionary defines."""

    code = "unknown_oid"


# --- crypto errors -------------------------------------------------------

class MalformedKeyError(SslaError):
    code = "malformed_key"


class UnsupportedAlgorithmError(SslaError):
    code = "unsupported_algorithm"


# --- protocol errors ------------------------------------------------------

class ProtocolError(SslaError):
    """A negotiation message was rejected. State is never changed by a rejection."""

    code = "protocol"


class MalformedDocument(ProtocolError):
    code = "malformed_document"


class UnsupportedVersion(ProtocolError):
    code = "unsupported_version"


class InvalidSignature(ProtocolError):
    code = "invalid_signature"


class InvalidPow(ProtocolError):
    code = "invalid_pow"


class ReplayedNonce(ProtocolError):
    code = "replayed_nonce"


class StaleTimestamp(ProtocolError):
    code = "stale_timestamp"


class StateViolation(ProtocolError):
    code = "state_violation"


class UnknownNegotiation(ProtocolError):
    code = "unknown_negotiation"


class MismatchedEmbedding(ProtocolError):
    code = "mismatched_embedding"


class ConfigError(SslaError):
    code = "config"
