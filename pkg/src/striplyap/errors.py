"""Exception types shared across the package."""


class StripLyapError(Exception):
    """Base class for model/analysis failures."""


class ParabolicChannel(StripLyapError):
    """A transverse mode sits on the |mu| = 2 boundary where the free
    transfer matrix is a Jordan block; the channel machinery excludes it."""


class NumericalDegeneracy(StripLyapError):
    """An exact algebraic identity failed beyond the allowed residual."""


class RankCollapse(StripLyapError):
    """Orthonormalization produced a numerically zero vector."""


class HyperbolicPresent(StripLyapError):
    """Operation requires a purely elliptic channel spectrum."""


class OutsideSpectrum(StripLyapError):
    """Energy lies outside the spectrum of the clean operator."""


class MissingMoments(StripLyapError):
    """Weight statistics lack the moment tables needed by a formula."""


class InvalidCase(StripLyapError):
    """Index/sign combination excluded from a closed-form expectation."""
