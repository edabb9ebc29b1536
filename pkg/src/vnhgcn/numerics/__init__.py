from vnhgcn.numerics.kernels import BACKEND
from vnhgcn.numerics.tape import Tape, Var, log_softmax_rows, softmax_rows

__all__ = ["BACKEND", "Tape", "Var", "log_softmax_rows", "softmax_rows"]
