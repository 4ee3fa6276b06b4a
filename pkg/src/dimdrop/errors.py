"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class DimDropError(Exception):
    """Base class for every error raised by the package."""


class NotCoprime(DimDropError, ValueError):
    def __init__(self, p: int, q: int):
        super().__init__(f"gcd({p}, {q}) != 1; the dimension drop algebra is not prime")
        self.p, self.q = p, q


class NonPositive(DimDropError, ValueError):
    pass


class NoSolution(DimDropError, ValueError):
    """No non-negative pattern length k solves p*a + p*q*k + q*b = p'*q'."""


class EmptyPattern(DimDropError, ValueError):
    pass


class EmptySet(DimDropError, ValueError):
    pass


class NotNormalized(DimDropError, ValueError):
    pass


class ChainMismatch(DimDropError, ValueError):
    pass


class BulletsUnsatisfied(DimDropError, ValueError):
    pass


class NotMonotone(DimDropError, ValueError):
    pass


class SourceNotAtomless(DimDropError, ValueError):
    pass


class SourceNotFaithful(DimDropError, ValueError):
    pass


class TargetNotFaithful(DimDropError, ValueError):
    pass


class DimensionMismatch(DimDropError, ValueError):
    pass


class BoundaryViolation(DimDropError, ValueError):
    pass


class TargetTooSmall(DimDropError, ValueError):
    pass


class TraceVariantUnavailable(DimDropError, ValueError):
    pass


class PatternsTooFar(DimDropError, ValueError):
    pass


class CommutantPathFailure(DimDropError, RuntimeError):
    pass


class MiddleMismatch(DimDropError, ValueError):
    pass


class EmptySubset(DimDropError, ValueError):
    pass


class BudgetExhausted(DimDropError, RuntimeError):
    pass


class BoundNotMet(DimDropError, ValueError):
    pass


class DefectExceeded(DimDropError, RuntimeError):
    def __init__(self, message: str, chain=None):
        super().__init__(message)
        self.chain = chain


class HorizonExhausted(DimDropError, RuntimeError):
    def __init__(self, message: str, best_defect: float = float("inf"), result=None):
        super().__init__(message)
        self.best_defect = best_defect
        self.result = result
