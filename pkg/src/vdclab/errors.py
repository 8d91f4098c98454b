from .ff import EnumerationBudgetError


class PreconditionError(ValueError):
    """An operation was called outside its contract."""


class HypothesisError(ValueError):
    """A geometric hypothesis (nonsingularity, dimension, ...) failed."""


class DimensionAmbiguous(RuntimeError):
    def __init__(self, msg="dimension ambiguous, increase k or q"):
        super().__init__(msg)


class SearchExhausted(RuntimeError):
    """A finite search (hyperplanes, primes, instances) found nothing acceptable."""


class NoGoodPrimeError(SearchExhausted):
    pass


__all__ = ["EnumerationBudgetError", "PreconditionError", "HypothesisError",
           "DimensionAmbiguous", "SearchExhausted", "NoGoodPrimeError"]
