import sys
import typing as t

import numpy as np

if sys.version_info < (3, 10):
    import typing_extensions as te
else:
    te = t


class RfdlError(Exception):
    """Base class for errors raised by rfdl.

    :attr:`exit_code` is used by the command line interface."""

    exit_code = 1


class ConfigError(RfdlError):
    exit_code = 2


class InvalidParameterError(ConfigError, ValueError):
    pass


class DataError(RfdlError):
    exit_code = 3


class EmptyMatrixError(DataError, ValueError):
    def __init__(self, path: str) -> None:
        super().__init__(f"Matrix file '{path}' is empty.")


class MatrixFormatError(DataError, ValueError):
    pass


class DimensionMismatchError(DataError, ValueError):
    def __init__(self, what: str, expected: int, actual: int) -> None:
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected dimension {expected}, got {actual}.")


class InsufficientSamplesError(DataError, ValueError):
    pass


class LabelDomainError(DataError, ValueError):
    pass


class DivergenceError(RfdlError, ArithmeticError):
    exit_code = 4

    def __init__(self, iteration: int, variable: str, reason: str) -> None:
        self.iteration = iteration
        self.variable = variable
        super().__init__(
            f"Solver diverged at iteration {iteration}: {variable} {reason}."
        )


class DegenerateDictionaryError(RfdlError, ArithmeticError):
    exit_code = 4

    def __init__(self, column: int, total: float) -> None:
        self.column = column
        super().__init__(
            f"Dictionary column {column} sums to {total:.3g}; "
            + "cannot rescale it to sum to one."
        )


class SingularSystemError(RfdlError, ArithmeticError):
    exit_code = 4

    def __init__(self, what: str, hint: str = "") -> None:
        super().__init__(f"The linear system for {what} is singular." + hint)


class NonConvergenceError(RfdlError):
    exit_code = 5


class MissingClassifierError(RfdlError, ValueError):
    def __init__(self) -> None:
        super().__init__(
            "Model has no classifier (train with 'djrfdl' or fit a post-hoc classifier)."
        )


class EmptyFileError(Exception):
    pass


class ExceptionCount(Exception):
    def __init__(self, count: int):
        self.count = count
        super().__init__()


T = t.TypeVar("T")
P = te.ParamSpec("P")
R = t.TypeVar("R")


def silent_exec(
    func: t.Callable[P, t.Any], *params: P.args, **kwargs: P.kwargs
) -> None:
    """Execute `func`, ignoring any exceptions.

    :returns: `None`
    """
    try:
        func(*params, **kwargs)
    except Exception:
        pass


def check_finite(name: str, value: t.Any, iteration: int, limit: float) -> None:
    """Raise :class:`DivergenceError` if `value` holds a non-finite entry or
    one whose magnitude exceeds `limit`."""
    arr = np.asarray(value)
    if not np.all(np.isfinite(arr)):
        raise DivergenceError(iteration, name, "became non-finite")
    if arr.size and float(np.max(np.abs(arr))) > limit:
        raise DivergenceError(iteration, name, f"exceeded magnitude {limit:g}")
