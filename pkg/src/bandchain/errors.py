"""Exception hierarchy shared by all bandchain modules."""


class BandChainError(ValueError):
    """Base class for every error raised by bandchain."""


class NonStochasticRow(BandChainError):
    pass


class NegativeEntry(BandChainError):
    pass


class MissingBoundaryRow(BandChainError):
    pass


class DegenerateIncrements(BandChainError):
    pass


class BandViolation(BandChainError):
    pass


class ZeroMass(BandChainError):
    """A stationary weight needed by the computation is zero (or underflowed)."""


class SingularSystem(BandChainError):
    """The truncated chain has no unique stationary vector."""


class NonConvergence(BandChainError):
    pass


class WindowTooWide(BandChainError):
    pass


class NoSubunitRoot(BandChainError):
    """psi(t) = 1 has no root in (0, 1); the mean increment is not negative."""


class AlphaTooSmall(BandChainError):
    pass


class EigNonConvergence(BandChainError):
    pass


class NoSubunitEigenvalue(BandChainError):
    pass


class InsufficientSweep(BandChainError):
    pass


class UnderflowBeforeWindow(BandChainError):
    pass


class DegenerateTestVector(BandChainError):
    pass


class OrderTooLarge(BandChainError):
    pass


class ChainSpecError(BandChainError):
    """Malformed chain-spec document; carries the offending field and line."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class PeriodicitySuspected(UserWarning):
    """More than one eigenvalue sits on the unit circle (not fatal)."""
