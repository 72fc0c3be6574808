"""Exception types shared across the package."""


class OutOfRangeError(ValueError):
    """A query fell outside the domain of a tabulated model."""


class SpecError(ValueError):
    """A design spec failed to parse or validate.

    ``problems`` holds one message per violated constraint.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NonFiniteGradientError(FloatingPointError):
    """Raised when an optimizer step receives a NaN or infinite gradient."""

    def __init__(self, iteration, indices):
        self.iteration = iteration
        self.indices = list(indices)
        super().__init__(
            f"non-finite gradient at iteration {iteration} "
            f"(parameter indices {self.indices[:10]})"
        )
