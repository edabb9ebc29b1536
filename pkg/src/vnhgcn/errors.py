"""Exception hierarchy.

Each family carries the process exit code the CLI reports for it.
"""


class VNHGCNError(Exception):
    exit_code = 1


class ConfigError(VNHGCNError, ValueError):
    exit_code = 1


class DataError(VNHGCNError):
    exit_code = 2


class StructuralError(DataError):
    """Graph structure is malformed (bad endpoint, missing inverse, ...)."""


class ShapeError(VNHGCNError, ValueError):
    exit_code = 2


class NumericError(VNHGCNError, ArithmeticError):
    exit_code = 3


class TrainingError(NumericError):
    pass


class EvalError(VNHGCNError):
    exit_code = 1
