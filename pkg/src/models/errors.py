from typing import Optional


class RegressionError(Exception):
    """Base class for every error raised by fhe-regress."""
    pass


class DimensionError(RegressionError, ValueError):
    """Empty or mismatched shapes."""
    pass


class DomainError(RegressionError, ValueError):
    """Argument outside the mathematical domain of an operation."""
    pass


class ConfigurationError(RegressionError, ValueError):
    """Invalid or incomplete configuration."""
    pass


class CapacityError(RegressionError):
    """A grid does not fit into the slots of one ciphertext."""
    pass


class DepthError(RegressionError):
    """A level-consuming operation was applied to an exhausted ciphertext."""

    def __init__(self, label: str, level: int):
        self.label = label
        self.level = level
        super().__init__(f"Multiplicative depth exhausted at '{label}' (level {level})")


class DataError(RegressionError):
    """Base class for data ingestion errors."""
    pass


class ParseError(DataError):
    """A cell could not be parsed as a number."""

    def __init__(self, row: int, column: int, value: Optional[str]):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"Non-numeric cell at row {row}, column {column}: {value!r}")


class SchemaError(DataError):
    """Columns do not match what the operation expects."""
    pass


class SizeError(DataError):
    """Too few rows for the requested operation."""
    pass
