"""Exception types raised across the package."""


class LeafApcenError(Exception):
    """Base class for all package errors."""


class UnsupportedFormat(LeafApcenError, ValueError):
    pass


class CorruptHeader(LeafApcenError, ValueError):
    pass


class BadMagic(LeafApcenError, ValueError):
    pass


class DimensionOverflow(LeafApcenError, ValueError):
    pass


class AliasRisk(LeafApcenError, ValueError):
    pass


class ConfigInvalid(LeafApcenError, ValueError):
    pass


class ClipTooShort(LeafApcenError, ValueError):
    pass


class ShapeMismatch(LeafApcenError, ValueError):
    pass


class NonFiniteInput(LeafApcenError, ValueError):
    pass


class MissingForwardCache(LeafApcenError, RuntimeError):
    pass


class MissingTape(LeafApcenError, RuntimeError):
    pass


class SilentClip(LeafApcenError, ValueError):
    pass


class PoolTooSmall(LeafApcenError, ValueError):
    pass


class EmptyTestSet(LeafApcenError, ValueError):
    pass
