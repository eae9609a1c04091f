"""Exception types shared across the package."""


class RingPatternsError(Exception):
    """Base class for all package errors."""


class SpecViolation(RingPatternsError):
    """A ring specification is invalid (bad modulus, reducible quotient, size guard)."""


class BudgetExceeded(RingPatternsError):
    """An exhaustive enumeration would exceed the configured budget."""


class HypothesisViolation(RingPatternsError):
    """A stated hypothesis of an operation fails; the message names it."""

    def __init__(self, hypothesis: str, stage: str | None = None):
        self.hypothesis = hypothesis
        self.stage = stage
        msg = hypothesis if stage is None else f"[{stage}] {hypothesis}"
        super().__init__(msg)


class TrivialCharacter(RingPatternsError):
    """A nontrivial character was required."""


class ZeroExponent(RingPatternsError):
    """The zero exponent vector has no rank in the monomial order."""


class ConstantMember(RingPatternsError):
    """A polynomial family member is constant where nonconstant is required."""


class DegenerateB(RingPatternsError):
    """The linear coefficient vanishes mod N, so the solution count is trivial."""


class InvertibilityViolation(RingPatternsError):
    """A coefficient or coefficient difference is not a unit."""


class EmptyAllowedSet(RingPatternsError):
    """Every shift in the window is excluded."""


class Deg0Input(RingPatternsError):
    """A weight pair with all-zero sequence admits no operation."""


class SearchBudgetExceeded(RingPatternsError):
    """The reachable state space exceeds the search cap."""


class AmbiguousSelection(RingPatternsError):
    """The differencing policy cannot decide under the declared constraints."""

    def __init__(self, message: str, coefficient: str | None = None):
        self.coefficient = coefficient
        super().__init__(message)


class ParseError(RingPatternsError):
    """Bad textual syntax for a ring spec, polynomial, or constraint."""
