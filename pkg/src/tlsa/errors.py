"""Exception types raised by the alignment engine."""


class TlsaError(Exception):
    """Base class for all engine errors."""


class ConfigError(TlsaError):
    pass


# --- embedding / corpus ---

class MalformedHeader(TlsaError):
    pass


class DimensionMismatch(TlsaError):
    pass


class DuplicateId(TlsaError):
    pass


class NonFiniteValue(TlsaError):
    pass


class ZeroNormRow(TlsaError):
    pass


# --- lexicon ---

class MalformedLine(TlsaError):
    pass


class EmptyDatabase(TlsaError):
    pass


# --- align ---

class DimMismatch(TlsaError):
    pass


class TooFewScores(TlsaError):
    pass


# --- refine ---

class EmptyBank(TlsaError):
    pass


# --- classifier ---

class LabelCollision(TlsaError):
    pass


# --- selftrain ---

class ShapeMismatch(TlsaError):
    pass


# --- metrics ---

class NoPrivateSamples(TlsaError):
    pass


class MissingTruth(TlsaError):
    pass


class EmptyEval(TlsaError):
    pass
