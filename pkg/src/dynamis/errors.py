"""Exception types shared across the engines and the harness."""


class DynamisError(Exception):
    pass


class DuplicateId(DynamisError, KeyError):
    pass


class UnknownId(DynamisError, KeyError):
    pass


class AssignmentFailure(DynamisError, ValueError):
    """No shifted grid closed-contains the object (size precondition violated)."""


class PointOutsideParent(DynamisError, ValueError):
    pass


class LevelOverflow(DynamisError, OverflowError):
    pass


class CellExists(DynamisError, KeyError):
    pass


class CellMissing(DynamisError, KeyError):
    pass


class CellOccupied(DynamisError, ValueError):
    pass


class NotPresent(DynamisError, KeyError):
    pass


class InputNotIndependent(DynamisError, ValueError):
    pass


class TooLarge(DynamisError, ValueError):
    pass


class ParseError(DynamisError, ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
