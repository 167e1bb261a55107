"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data (files, ids, shapes).

    The CLI maps this to exit code 1, as opposed to usage errors (exit 2).
    """


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int):
        super().__init__(f"non-finite loss at training step {step}")
        self.step = step
