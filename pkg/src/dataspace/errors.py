class DataspaceError(ValueError):
    """Base class for every error raised by this package."""


class IngestError(DataspaceError):
    """A dataset, schema or predictions source could not be read.

    ``source`` and ``line`` locate the offending input when known.
    """

    def __init__(self, message, source=None, line=None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class JoinError(DataspaceError):
    pass


class TopologyError(DataspaceError):
    pass


class RestrictionError(DataspaceError):
    pass


class StatisticError(DataspaceError):
    pass
