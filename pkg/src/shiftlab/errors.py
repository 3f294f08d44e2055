"""Exception hierarchy shared by every shiftlab module.

The CLI maps these onto its exit-code convention:
1 = usage / bad argument, 2 = data or parse error, 3 = numeric or
degenerate-geometry error.
"""


class ShiftLabError(Exception):
    """Base class for all shiftlab errors."""


class UsageError(ShiftLabError):
    """Bad command line or config usage."""


class InvalidArgumentError(ShiftLabError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateGeometryError(ShiftLabError):
    """Geometry with no well-defined answer (e.g. slerp between antipodes)."""


class InfeasibleGeometryError(ShiftLabError):
    """A sampler cannot make progress (e.g. rejection acceptance too low)."""


class DegenerateFitError(ShiftLabError):
    """A regression problem with no unique solution (all x identical)."""


class FormatError(ShiftLabError):
    """A binary file failed validation.

    Carries the rule that failed and the byte offset of the offending
    field so rejections are machine-checkable.
    """

    def __init__(self, rule: str, offset: int, detail: str = ""):
        self.rule = rule
        self.offset = offset
        self.detail = detail
        msg = f"{rule} at byte offset {offset}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
