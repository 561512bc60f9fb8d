"""Error hierarchy for the solver pipeline"""
from typing import Any, Optional


class PPIFEMError(Exception):
    """Base class for every error raised by the package"""

    def __init__(self, message: str, *, element_id: Optional[int] = None, **context: Any):
        super().__init__(message)
        self.message = message
        self.element_id = element_id
        self.context = context

    def with_element(self, element_id: int) -> "PPIFEMError":
        """Attach the element id and return self for re-raising"""
        self.element_id = element_id
        return self

    def __str__(self) -> str:
        if self.element_id is None:
            return self.message
        return f"{self.message} (element {self.element_id})"


# Geometry errors
class AmbiguousPoint(PPIFEMError):
    pass


class HypothesisViolation(PPIFEMError):
    pass


class DegenerateCut(PPIFEMError):
    pass


class TriplePointOutside(PPIFEMError):
    pass


class DegeneratePolygon(PPIFEMError):
    pass


class NoConvergence(PPIFEMError):
    pass


# Basis errors
class SingularLocalSystem(PPIFEMError):
    pass


class PointOutsideElement(PPIFEMError):
    pass


# Solver errors
class SolverBreakdown(PPIFEMError):
    pass


# Analysis and configuration errors
class MissingExactSolution(PPIFEMError):
    pass


class ConfigError(PPIFEMError):
    def __init__(self, message: str, *, key: Optional[str] = None):
        super().__init__(message, key=key)
        self.key = key
