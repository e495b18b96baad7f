"""Exception types shared by the analytical and simulation modules."""


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


class NormalizationFailure(ArithmeticError):
    """A tabulated density failed its integral-equals-one gate."""

    def __init__(self, message: str, integral: float):
        super().__init__(message)
        self.integral = integral


class DegenerateWindow(RuntimeError):
    """A simulation window yielded no usable cell within the resample budget."""

    def __init__(self, message: str, resamples: int):
        super().__init__(message)
        self.resamples = resamples
