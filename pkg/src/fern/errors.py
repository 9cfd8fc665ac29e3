"""Exception hierarchy shared by every fern module."""


class FernError(Exception):
    """Base class for domain errors raised by fern."""


class DimensionError(FernError, ValueError):
    pass


class NonFiniteError(FernError, ValueError):
    pass


class ZeroVectorError(FernError, ValueError):
    pass


class DegenerateHyperplane(FernError, ValueError):
    """The two support vectors coincide, so no bisector exists."""


class EmptyIndexError(FernError, LookupError):
    pass


class EmptyStoreError(FernError, LookupError):
    pass


class FormatError(FernError, ValueError):
    """A file or byte stream does not follow the expected layout."""


class ArgumentError(FernError, ValueError):
    pass


class IoError(FernError, OSError):
    pass
