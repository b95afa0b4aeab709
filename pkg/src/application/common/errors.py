"""Exception hierarchy shared by every layer.

Everything derives from ``NeustromError`` (itself a ``ValueError``), so callers
that only care about "bad input or bad numerics" can catch one type. The CLI
maps the config errors to exit code 2 and everything else to exit code 3.
"""


class NeustromError(ValueError):
    pass


class ShapeError(NeustromError):
    def __init__(self, primitive: str, *shapes: tuple[int, ...], detail: str = ""):
        self.primitive = primitive
        self.shapes = shapes
        shown = ", ".join(str(tuple(s)) for s in shapes)
        msg = f"{primitive}: incompatible shapes {shown}"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class GradientError(NeustromError):
    pass


class ParameterKeyError(NeustromError):
    pass


class KernelUnderflowError(NeustromError):
    def __init__(self, index: int, mass: float):
        self.index = index
        self.mass = mass
        super().__init__(f"Kernel row {index} has mass {mass:.3e} below the underflow floor")


class NumericalError(NeustromError):
    def __init__(self, message: str, condition_number: float | None = None):
        self.condition_number = condition_number
        if condition_number is not None:
            message = f"{message} (condition number {condition_number:.3e})"
        super().__init__(message)


class ClusteringError(NeustromError):
    pass


class LabelError(NeustromError):
    pass


class EmptyTrajectoryError(NeustromError):
    pass


class IdxFormatError(NeustromError):
    pass


class IdxMagicError(IdxFormatError):
    pass


class IdxTypeError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"IDX payload truncated: expected {expected} bytes, got {actual}")


class CheckpointFormatError(NeustromError):
    pass


class ConfigParseError(NeustromError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class ConfigValidationError(NeustromError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("Invalid experiment config:\n" + "\n".join(f"  - {e}" for e in errors))
