"""Exception hierarchy shared by every module of the package."""


class HybridMPPError(Exception):
    """Base class for all errors raised by hybridmpp."""


class NonIncreasingTimes(HybridMPPError, ValueError):
    """Event times are not strictly increasing (ground measure not simple)."""


class InvalidModel(HybridMPPError, ValueError):
    pass


class OutOfSupport(HybridMPPError, IndexError):
    pass


class NonFiniteIntensity(HybridMPPError, ArithmeticError):
    pass


class NoValidBound(HybridMPPError):
    """A functional cannot supply a majorant for thinning."""


class ZeroMajorant(HybridMPPError):
    """Total candidate rate is zero; no further candidates exist."""


class MajorantViolation(HybridMPPError):
    """An evaluated intensity exceeded the bound it was thinned under."""


class DominationBreach(HybridMPPError):
    """A coupled dominated process accepted an event its dominator rejected."""

    def __init__(self, message, time=None, event=None):
        super().__init__(message)
        self.time = time
        self.event = event


class DivergentIntegral(HybridMPPError, ArithmeticError):
    pass


class InsufficientEvents(HybridMPPError):
    pass


class SingularSystem(HybridMPPError, ArithmeticError):
    pass


class UnstableModel(HybridMPPError, ValueError):
    pass


class ConfigError(HybridMPPError, ValueError):
    """Configuration document failed validation; ``path`` names the key."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class HashMismatch(HybridMPPError):
    pass
