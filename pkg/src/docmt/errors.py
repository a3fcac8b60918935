"""Exception types raised across the toolkit."""


class DocMTError(Exception):
    """Base class for all toolkit errors."""


class MissingExternalCount(DocMTError, KeyError):
    pass


class EmptyCorpus(DocMTError, ValueError):
    pass


class ZeroHypothesisLength(DocMTError, ValueError):
    pass


class MissingScore(DocMTError, KeyError):
    pass


class InsufficientData(DocMTError, ValueError):
    pass


class InsufficientVariance(InsufficientData):
    pass


class InvalidLength(DocMTError, ValueError):
    pass


class LengthExceedsModelMax(InvalidLength):
    pass


class InsufficientSamples(DocMTError, ValueError):
    pass


class UnitMismatch(DocMTError, ValueError):
    pass


class IncompleteBucket(DocMTError, ValueError):
    pass


class EmptyGroup(DocMTError, ValueError):
    pass


class FormatError(DocMTError, ValueError):
    """Malformed input file; carries the offending path and line number."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:{lineno}: " if lineno is not None else f"{path}: "
        super().__init__(where + message)


class BoundaryError(FormatError):
    """A sentence line appears before any document boundary marker."""
