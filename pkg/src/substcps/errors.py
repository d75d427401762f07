"""Exception hierarchy shared across the pipeline stages."""


class SubstCPSError(Exception):
    """Base class for every error raised by this package."""

    stage = "unknown"


# algebra
class AlgebraError(SubstCPSError):
    stage = "algebra"


class NonMonic(AlgebraError):
    pass


class NotSquarefree(AlgebraError):
    pass


class ContextMismatch(AlgebraError):
    pass


class NotUnimodular(AlgebraError):
    pass


class NoConvergence(AlgebraError):
    pass


class Inconclusive(AlgebraError):
    pass


# substitution
class SubstitutionError(SubstCPSError):
    stage = "substitution"


class SchemaError(SubstitutionError):
    def __init__(self, message: str, location: str = "$"):
        super().__init__(f"{location}: {message}")
        self.location = location


class NotPrimitive(SubstitutionError):
    pass


class NoExactEigenvector(SubstitutionError):
    pass


class GapOrOverlap(SubstitutionError):
    def __init__(self, letter, position: int, detail: str = ""):
        msg = f"tile equation fails for letter {letter!r} at piece {position}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.letter = letter
        self.position = position


class SizeLimit(SubstCPSError):
    stage = "size"


# pointset
class PointSetError(SubstCPSError):
    stage = "pointset"


class NoSeed(PointSetError):
    pass


class RankDeficient(PointSetError):
    pass


# cps
class CPSError(SubstCPSError):
    stage = "cps"


class EmptyInternalSpace(CPSError):
    pass


class DegenerateLattice(CPSError):
    pass


# coincidence
class CoincidenceError(SubstCPSError):
    stage = "coincidence"


class PatchTooSmall(CoincidenceError):
    pass


class NotFound(CoincidenceError):
    def __init__(self, limit: int, detail: str = ""):
        super().__init__(f"not found up to {limit}" + (f" ({detail})" if detail else ""))
        self.limit = limit


# window
class WindowError(SubstCPSError):
    stage = "window"


class NotContractive(WindowError):
    pass


class BudgetExceeded(WindowError):
    pass


class InsufficientPoints(WindowError):
    pass
