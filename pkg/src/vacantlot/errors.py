"""Exception hierarchy shared across the package.

Data problems (anything traceable to an input file or dataset) derive from
:class:`DataError`; the CLI maps those to exit code 2.
"""


class VacantLotError(Exception):
    """Base class for every error raised by this package."""


class DataError(VacantLotError):
    pass


class ParseError(DataError):
    def __init__(self, line, reason, path=None):
        self.line = line
        self.reason = reason
        self.path = path
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line}: {reason}")


class RangeError(ParseError):
    pass


class DuplicateId(ParseError):
    pass


class SchemaError(DataError):
    pass


class UnknownCategory(DataError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown zoning category {name!r}")


class MissingLayer(DataError):
    def __init__(self, kind, path=None):
        self.kind = kind
        self.path = path
        if path is None:
            super().__init__(f"layer {kind!r} is empty or missing")
        else:
            super().__init__(f"layer {kind!r}: file not found: {path}")


class EmptyLayer(DataError):
    pass


class MissingConversionLabels(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class TooFewPerClass(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class InvalidFractions(DataError):
    pass


class DegenerateTraining(VacantLotError):
    pass


class NonFiniteLoss(VacantLotError):
    pass


class ConfigError(VacantLotError):
    pass
