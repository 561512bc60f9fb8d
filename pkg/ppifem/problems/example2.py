"""A circle of radius 1/2 cut by the line 3x = 4y, triple points at +-(0.4, 0.3)"""
import numpy as np
import sympy as sp

from ..geometry import LevelSet, SubdomainGeometry
from .base import ProblemSpec, manufactured_problem, x_sym, y_sym

TRIPLE_POINTS = ((0.4, 0.3), (-0.4, -0.3))


def _region_rule(values: np.ndarray) -> np.ndarray:
    phi1, phi2, _ = values
    labels = np.full(phi1.shape, 3, dtype=int)
    labels[(phi2 >= 0) & (phi1 > 0)] = 2
    labels[phi2 < 0] = 1
    return labels


def geometry() -> SubdomainGeometry:
    line = LevelSet(
        value=lambda x, y: 3.0 * np.asarray(x) - 4.0 * np.asarray(y),
        gradient=lambda x, y: (3.0, -4.0),
    )
    circle = LevelSet(
        value=lambda x, y: np.asarray(x) ** 2 + np.asarray(y) ** 2 - 0.25,
        gradient=lambda x, y: (2.0 * np.asarray(x), 2.0 * np.asarray(y)),
    )
    outside = LevelSet(
        value=lambda x, y: 0.25 - np.asarray(x) ** 2 - np.asarray(y) ** 2,
        gradient=lambda x, y: (-2.0 * np.asarray(x), -2.0 * np.asarray(y)),
    )
    return SubdomainGeometry(
        level_sets=(line, circle, outside),
        region_rule=_region_rule,
        normal_signs=(-1, -1, -1),
        name="example2",
    )


def problem(beta=(10.0, 1.0, 100.0)) -> ProblemSpec:
    x, y = x_sym, y_sym
    r2 = x**2 + y**2
    scaled = (
        r2 ** sp.Rational(3, 2) - sp.Rational(1, 8),
        (r2 - sp.Rational(1, 4)) * sp.sin(3 * x - 4 * y),
        (3 * x - 4 * y) * sp.log(r2 + sp.Rational(3, 4)),
    )
    solutions = [w / sp.Float(b) for w, b in zip(scaled, beta)]
    return manufactured_problem(geometry(), beta, solutions, name="example2")
