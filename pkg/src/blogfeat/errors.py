"""Exception hierarchy.

Each family carries the process exit code the CLI maps it to:
1 usage error, 2 data error, 3 numerical error.
"""


class BlogFeatError(Exception):
    exit_code = 1


class UsageError(BlogFeatError, ValueError):
    exit_code = 1


class DataError(BlogFeatError, ValueError):
    exit_code = 2


class NumericalError(BlogFeatError, ArithmeticError):
    exit_code = 3


# -- usage ---------------------------------------------------------------

class BadK(UsageError):
    pass


class BadB(UsageError):
    pass


class BadKMax(UsageError):
    pass


class BadRatios(UsageError):
    pass


class ConfigError(UsageError):
    pass


# -- data ----------------------------------------------------------------

class RaggedRow(DataError):
    def __init__(self, row, expected, found):
        self.row = row
        super().__init__(f"RaggedRow(row={row}): expected {expected} columns, found {found}")


class UnparseableCell(DataError):
    def __init__(self, row, column, text):
        self.row = row
        self.column = column
        super().__init__(f"UnparseableCell(row={row}, column={column}): {text!r}")


class SchemaMismatch(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class EmptySeries(DataError):
    pass


class MissingBaseline(DataError):
    pass


# -- numerical -----------------------------------------------------------

class NonFinite(NumericalError):
    pass


class ZeroVariance(NumericalError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"ZeroVariance(column={column})")


class DegenerateData(NumericalError):
    pass


class DivergenceDetected(NumericalError):
    pass
