"""Exception types shared across the package."""


class WaveguardError(Exception):
    """Base class for all package errors."""


class ContractError(WaveguardError):
    """A caller violated an operation precondition (e.g. shape mismatch)."""


class NoValidSectorError(WaveguardError):
    """The feedback law cannot be bracketed between two linear gains."""


class HypothesisViolatedError(WaveguardError):
    """A certificate hypothesis fails; carries the named condition."""

    def __init__(self, condition, message=""):
        self.condition = condition
        super().__init__(f"{condition}: {message}" if message else condition)


class NumericError(WaveguardError):
    """An internal numerical routine failed to converge."""


class FitUnavailableError(WaveguardError):
    """No usable window for the requested decay fit."""


class StepFailureError(WaveguardError):
    """Time stepping aborted; carries the failing time and a reason tag."""

    def __init__(self, time, reason, message=""):
        self.time = time
        self.reason = reason
        super().__init__(f"step failed at t={time:.6g} ({reason}) {message}".rstrip())


class ConfigError(WaveguardError):
    """Scenario configuration is malformed; carries the offending key."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"config key '{key}': {message}")
