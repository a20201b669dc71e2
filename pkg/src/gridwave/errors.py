"""Exception types shared across the package."""


class GridwaveError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(GridwaveError):
    """An input violates a documented precondition (e.g. marker > mask)."""


class NoBackgroundError(GridwaveError):
    """Distance transform requested on a grid with no background pixels."""


class PgmFormatError(GridwaveError):
    """Malformed PGM stream. Carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class EngineError(GridwaveError):
    """Propagation engine failed to reach a fixed point within its bounds."""
