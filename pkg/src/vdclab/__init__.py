"""Integral points on complete intersections, counted and audited at desk scale."""

__version__ = "0.1.0"

from .errors import (DimensionAmbiguous, EnumerationBudgetError, HypothesisError,  # noqa: F401
                     NoGoodPrimeError, PreconditionError, SearchExhausted)
from .ff import FieldCtx, FieldElem, ProjPoint, field  # noqa: F401
from .poly import IntPoly, PolySystem  # noqa: F401
from .variety import Instance  # noqa: F401
