"""Exception types raised by the simulators and the experiment harness."""


class CimError(Exception):
    """Base class for all package errors."""


class InputError(CimError, ValueError):
    """Invalid argument: wrong shape, out-of-range value, malformed file."""


class CapabilityError(CimError):
    """The request is valid but exceeds what the routine can do (e.g. enumeration size)."""


class IntegrationDivergedError(CimError):
    """A trajectory produced NaN/inf or left the divergence bound."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"integration diverged at step {step}")


class DegenerateEnsembleError(CimError):
    """All particle weights vanished for some DOPO."""

    def __init__(self, step: int, dopo: int | None = None):
        self.step = step
        self.dopo = dopo
        where = "" if dopo is None else f" (DOPO {dopo})"
        super().__init__(f"all particle weights vanished at step {step}{where}")


class ConfigError(CimError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
