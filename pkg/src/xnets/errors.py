"""Exception hierarchy shared by every module.

Each error carries the process exit code the CLI should use for it.
"""


class XNetError(Exception):
    exit_code = 1


class GraphError(XNetError, ValueError):
    """A graph could not be built from the given parameters."""


class InvalidDegreeError(GraphError):
    pass


class InvalidSizeError(GraphError):
    pass


class InvalidGeneratorError(GraphError):
    pass


class InvalidGroupingError(GraphError):
    pass


class TooLargeError(XNetError, ValueError):
    """A dense or exhaustive computation would exceed its size guard."""


class InvalidSpecError(XNetError, ValueError):
    pass


class InvalidSubsetError(XNetError, ValueError):
    pass


class ShapeError(XNetError, ValueError):
    pass


class NumericError(XNetError, ArithmeticError):
    pass


class InvalidArchError(XNetError, ValueError):
    pass


class DivergenceError(XNetError, ArithmeticError):
    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


class DatasetError(XNetError):
    exit_code = 2


class CorruptFileError(DatasetError, ValueError):
    pass


class DatasetNotFoundError(DatasetError, FileNotFoundError):
    pass
