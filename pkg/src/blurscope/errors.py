"""Exception hierarchy shared by all blurscope modules."""


class BlurscopeError(Exception):
    """Base class for every error raised by blurscope."""


# image files
class ImageFormatError(BlurscopeError, ValueError):
    pass


class UnknownMagic(ImageFormatError):
    pass


class BadHeader(ImageFormatError):
    pass


class Truncated(BlurscopeError, ValueError):
    """Raised when an image or model file holds fewer bytes than its header promises."""


class IoFailure(BlurscopeError, OSError):
    pass


class NonpositiveSigma(BlurscopeError, ValueError):
    pass


class BadRange(BlurscopeError, ValueError):
    pass


# laplacian
class EvenKernel(BlurscopeError, ValueError):
    pass


class EmptyInput(BlurscopeError, ValueError):
    pass


class EmptyClass(BlurscopeError, ValueError):
    pass


class InvertedCentres(BlurscopeError, ValueError):
    def __init__(self, centre_blurry: float, centre_sharp: float):
        self.centre_blurry = centre_blurry
        self.centre_sharp = centre_sharp
        super().__init__(
            f"blurry centre {centre_blurry!r} is not below sharp centre {centre_sharp!r}"
        )


# cnn
class ShapeMismatch(BlurscopeError, ValueError):
    pass


class OddExtent(BlurscopeError, ValueError):
    pass


class BadMagic(BlurscopeError, ValueError):
    pass


class VersionMismatch(BlurscopeError, ValueError):
    pass


# evaluation
class SingleClassDataset(BlurscopeError, ValueError):
    pass


class EmptyDataset(BlurscopeError, ValueError):
    pass


class LengthMismatch(BlurscopeError, ValueError):
    pass


class NoPositives(BlurscopeError, ZeroDivisionError):
    pass


class NoNegatives(BlurscopeError, ZeroDivisionError):
    pass


class EmptyMatrix(BlurscopeError, ZeroDivisionError):
    pass
