"""Three straight-line interfaces meeting at (0.05, 0.05)"""
import numpy as np
import sympy as sp

from ..geometry import LevelSet, SubdomainGeometry
from .base import ProblemSpec, manufactured_problem, x_sym, y_sym

TRIPLE_POINT = (0.05, 0.05)


def _line(a: float, b: float, c: float) -> LevelSet:
    return LevelSet(
        value=lambda x, y: a * np.asarray(x) + b * np.asarray(y) + c,
        gradient=lambda x, y: (a, b),
    )


def _region_rule(values: np.ndarray) -> np.ndarray:
    phi1, phi2, phi3 = values
    labels = np.full(phi1.shape, 3, dtype=int)
    labels[(phi1 > 0) & (phi3 >= 0)] = 2
    labels[(phi2 > 0) & (phi3 < 0)] = 1
    return labels


def geometry() -> SubdomainGeometry:
    return SubdomainGeometry(
        level_sets=(
            _line(38.0 / 7.0, 1.0, -9.0 / 28.0),
            _line(5.25, 1.0, -0.3125),
            _line(1.0 / 19.0, 1.0, -1.0 / 19.0),
        ),
        region_rule=_region_rule,
        normal_signs=(-1, 1, 1),
        name="example1",
    )


def level_set_expressions():
    x, y = x_sym, y_sym
    phi1 = sp.Rational(38, 7) * x + y - sp.Rational(9, 28)
    phi2 = sp.Rational(21, 4) * x + y - sp.Rational(5, 16)
    phi3 = x / 19 + y - sp.Rational(1, 19)
    return phi1, phi2, phi3


def problem(beta=(10.0, 1.0, 100.0)) -> ProblemSpec:
    phi1, phi2, phi3 = level_set_expressions()
    scaled = (sp.sin(phi3 * phi2), sp.sin(phi3 * phi1), sp.sin(phi1 * phi2 / 10))
    solutions = [w / sp.Float(b) for w, b in zip(scaled, beta)]
    return manufactured_problem(geometry(), beta, solutions, name="example1")
