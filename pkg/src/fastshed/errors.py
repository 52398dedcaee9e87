"""Exception types shared across the package."""


class FastShedError(Exception):
    """Base class for all errors raised by fastshed."""


class NotFoundError(FastShedError, KeyError):
    """A referenced element (generator, bustie, building, tie) does not exist."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class IncompleteSnapshotError(FastShedError, ValueError):
    """The snapshot lacks a status the operation needs."""


class PreconditionError(FastShedError, ValueError):
    """The element is not in the state the event presupposes."""


class InfeasibleShedError(FastShedError):
    """Every candidate load was selected and PS still does not exceed PM.

    ``selection`` holds the best available action (all candidates of the
    deficient sub-networks marked) and ``shortfall`` maps each deficient
    sub-network id to ``PM - PS`` (>= 0).
    """

    def __init__(self, selection, shortfall):
        self.selection = selection
        self.shortfall = dict(shortfall)
        worst = ", ".join(f"{k}: {v:.6g} MW" for k, v in self.shortfall.items())
        super().__init__(f"candidate loads exhausted without PS > PM ({worst})")


class BlackoutError(FastShedError):
    """No generator is left to hold the frequency."""


class InfeasibleMarginError(FastShedError):
    """The lowest SR in the search range already violates the nadir target."""

    def __init__(self, sr, nadir, target):
        self.sr = sr
        self.nadir = nadir
        self.target = target
        super().__init__(
            f"nadir {nadir:.4f} Hz at SR = {sr:g} MW is below the target {target:.4f} Hz"
        )


class ConfigError(FastShedError, ValueError):
    """A configuration, scenario or snapshot document is malformed."""

    def __init__(self, message, findings=()):
        self.findings = list(findings)
        super().__init__(message)


class UnsupportedConstructError(FastShedError):
    """Structured Text outside the interpreter's subset."""

    def __init__(self, token, line, column):
        self.token = token
        self.line = line
        self.column = column
        super().__init__(f"unsupported construct {token!r} at line {line}, column {column}")


class StRuntimeError(FastShedError):
    """Runtime failure while interpreting Structured Text (bad index, unknown name)."""
