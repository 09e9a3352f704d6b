"""Exception types raised across the package."""


class PreloadError(Exception):
    """Base class for all package errors."""


class EmptyFeed(PreloadError):
    pass


class InvalidPlan(PreloadError):
    pass


class StaleChunk(InvalidPlan):
    """A plan step references a chunk that is already playing or played."""


class SpaceTooLarge(PreloadError):
    def __init__(self, size, limit):
        super().__init__(f"search space {size:,} exceeds enumeration limit {limit:,}")
        self.size = size
        self.limit = limit


class InfeasibleAllPruned(PreloadError):
    """Every first decision causes a compute stall.

    ``fallback`` carries the lowest-bitrate in-order plan callers should use.
    """

    def __init__(self, fallback):
        super().__init__("all candidate decisions pruned by compute-stall rule")
        self.fallback = fallback


class TraceMismatch(PreloadError):
    pass


class ParseError(PreloadError):
    def __init__(self, message, *, path=None, line=None, field=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ": ".join([", ".join(where)]) + ": " if where else ""
        super().__init__(prefix + message)
        self.path = path
        self.line = line
        self.field = field


class InvalidManifest(PreloadError):
    def __init__(self, violations):
        super().__init__("invalid manifest:\n  " + "\n  ".join(violations))
        self.violations = list(violations)
