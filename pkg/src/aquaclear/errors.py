"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: I/O and file-format
problems exit 1, usage/config problems exit 2, numeric divergence exits 3.
"""


class ShapeError(ValueError):
    """Image or tensor dimensions violate an operation's contract."""


class ParameterError(ValueError):
    """A numeric parameter is out of its documented range."""


class FormatError(ValueError):
    """A file's content does not match a supported format."""


class ConfigError(ValueError):
    """A configuration document is malformed; message names the field path."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""


class DivergenceError(NumericError):
    """Training produced a non-finite loss."""

    def __init__(self, iteration: int, loss: float):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at iteration {iteration}")
