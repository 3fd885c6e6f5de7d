"""Exception types raised by illumtransfer."""


class IllumTransferError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(IllumTransferError, ValueError):
    pass


class EmptyMask(IllumTransferError, ValueError):
    pass


class InvalidMask(IllumTransferError, ValueError):
    """Mask file holds values other than 0 and 255, or is not single-channel."""


class DegenerateQuad(IllumTransferError, ValueError):
    """Checker corners are collinear, concave or wound the wrong way."""


class PatchOutOfBounds(IllumTransferError, ValueError):
    """A patch sample point falls outside the image."""


class SingularSystem(IllumTransferError, ArithmeticError):
    """Normal equations are numerically singular (degenerate patch data)."""


class CheckerDominates(IllumTransferError):
    """No checker-free crop covers enough of the image."""

    def __init__(self, message, best=None, fraction=None):
        super().__init__(message)
        self.best = best
        self.fraction = fraction


class InsufficientPool(IllumTransferError):
    """Too few same-split images to draw references from."""


class UnreadableImage(IllumTransferError, OSError):
    pass


class ManifestError(IllumTransferError, ValueError):
    pass
