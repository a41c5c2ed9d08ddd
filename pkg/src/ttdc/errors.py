"""Exception types shared across the package."""


class DomainError(ValueError):
    """A continuous coordinate lies outside its grid (no extrapolation)."""


class ShapeError(ValueError):
    """Weight vectors, distributions or models have incompatible shapes."""


class FullyContractedError(Exception):
    """Every dimension of a tensor train was fixed; the result is a scalar.

    The scalar is available as :attr:`value`.
    """

    def __init__(self, value: float):
        super().__init__(f"all dimensions contracted, scalar value {value!r}")
        self.value = float(value)


class CrossEvaluationError(ArithmeticError):
    """The black-box function returned a non-finite value."""

    def __init__(self, index, value):
        super().__init__(f"non-finite value {value!r} at index {tuple(int(i) for i in index)}")
        self.index = tuple(int(i) for i in index)
        self.value = value


class DegenerateDistributionError(ArithmeticError):
    """All sampling weights vanish; nothing can be drawn."""


class CapacityError(MemoryError):
    """A dense intermediate would exceed the configured capacity."""


class InvalidShapeError(ValueError):
    """A radial shape has a nonpositive radius somewhere."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``line`` points into the file when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
