"""Exception hierarchy shared by every engine component."""


class EngineError(Exception):
    """Base class for all errors raised by the engine."""


class MemtableFrozen(EngineError):
    pass


class AlreadyFrozen(EngineError):
    pass


class KeySizeMismatch(EngineError, ValueError):
    pass


class ValueTooLarge(EngineError, ValueError):
    pass


class EmptyDomain(EngineError, ValueError):
    pass


class NotInDomain(EngineError, KeyError):
    """The probed value has no code in this dictionary."""


class CodeOutOfRange(EngineError, IndexError):
    pass


class InvalidPredicate(EngineError, ValueError):
    pass


class InvalidCode(EngineError, ValueError):
    pass


class UnsortedInput(EngineError, ValueError):
    pass


class EmptyFile(EngineError, ValueError):
    pass


class ChecksumMismatch(EngineError):
    pass


class CorruptFile(EngineError):
    pass


class CorruptManifest(EngineError):
    pass


class Stalled(EngineError):
    """Writes are blocked because level 0 holds too many files."""


class InvalidSpec(EngineError, ValueError):
    pass
