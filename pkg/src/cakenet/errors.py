"""Exception types shared by every stage of the pipeline.

Each error carries a short ``code`` used by the command line front end as the
``ERRCODE:`` prefix, and an ``exit_code`` that groups failures into data
problems (2), training divergence (3) and I/O trouble (4).
"""


class CakeNetError(Exception):
    code = "CakeNetError"
    exit_code = 2


class DataError(CakeNetError, ValueError):
    """Bad input data, bad configuration or a violated precondition."""

    code = "DataError"


class MissingColumn(DataError):
    code = "MissingColumn"

    def __init__(self, column):
        self.column = column
        super().__init__(f"required column {column!r} is missing from the header")


class NonNumericCell(DataError):
    code = "NonNumericCell"

    def __init__(self, row, col, value):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"row {row}, column {col!r}: cannot parse {value!r} as a finite number")


class EmptyFile(DataError):
    code = "EmptyFile"


class InvalidRecord(DataError):
    code = "InvalidRecord"


class InvalidDesign(DataError):
    code = "InvalidDesign"


class DegenerateSplit(DataError):
    code = "DegenerateSplit"


class TooFewRows(DataError):
    code = "TooFewRows"


class SchemaMismatch(DataError):
    code = "SchemaMismatch"


class DegenerateTarget(DataError):
    code = "DegenerateTarget"


class BadArchitecture(DataError):
    code = "BadArchitecture"


class DimensionMismatch(DataError):
    code = "DimensionMismatch"


class EmptyBatch(DataError):
    code = "EmptyBatch"


class InvalidConfig(DataError):
    code = "InvalidConfig"


class SchemaVersionMismatch(DataError):
    code = "SchemaVersionMismatch"


class CorruptModel(DataError):
    code = "CorruptModel"


class LengthMismatch(DataError):
    code = "LengthMismatch"


class EmptyInput(DataError):
    code = "EmptyInput"


class ConstantActual(DataError):
    code = "ConstantActual"


class AllZeroScores(DataError):
    code = "AllZeroScores"


class NonFiniteLoss(CakeNetError, ArithmeticError):
    """Training produced a NaN or infinite loss."""

    code = "NonFiniteLoss"
    exit_code = 3

    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")
