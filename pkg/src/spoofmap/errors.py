"""Exception types shared across the toolkit."""


class SpoofmapError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(SpoofmapError, ValueError):
    """Input data violates a precondition (empty signal, bad shape, ...)."""


class ColaConfigError(SpoofmapError, ValueError):
    """STFT configuration cannot be inverted by overlap-add."""


class AlignmentAmbiguousError(SpoofmapError, ValueError):
    """Both energy contours are constant; no shift can be estimated."""


class HmapFormatError(SpoofmapError, ValueError):
    """Malformed HMAP file; the message names the offending field."""


class ProtocolError(SpoofmapError, RuntimeError):
    """Scorer wire-protocol violation; the message quotes the bad line."""


class ScorerUnavailableError(SpoofmapError, RuntimeError):
    """Scorer process could not be started or never completed a handshake."""
