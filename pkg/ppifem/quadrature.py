"""Quadrature rules on segments, triangles, rectangles and cut polygons"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np
from scipy import special

from .config import settings
from .exceptions import DegeneratePolygon

logger = logging.getLogger(__name__)

Point = Tuple[float, float]


@dataclass(frozen=True)
class QuadRule:
    """Points (m, 2) and positive weights (m,) summing to the region measure"""

    points: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def integrate(self, func) -> float:
        values = func(self.points[:, 0], self.points[:, 1])
        return float(np.dot(self.weights, values))

    @staticmethod
    def concatenate(rules: Sequence["QuadRule"]) -> "QuadRule":
        if not rules:
            return QuadRule(np.zeros((0, 2)), np.zeros(0))
        return QuadRule(
            np.vstack([rule.points for rule in rules]),
            np.concatenate([rule.weights for rule in rules]),
        )


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]"""
    nodes, weights = special.roots_legendre(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def segment_rule(a: Point, b: Point, order: int) -> QuadRule:
    """Gauss-Legendre rule with `order` points on the segment [a, b]"""
    t, w = gauss_legendre(order)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    points = (1.0 - t)[:, None] * a + t[:, None] * b
    return QuadRule(points, w * length)


# Symmetric rules on the reference triangle, barycentric orbits with weights summing to 1
def _orbit3(a: float) -> list:
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


_DUNAVANT = {
    1: ([(1 / 3, 1 / 3, 1 / 3)], [1.0]),
    2: (_orbit3(1 / 6), [1 / 3] * 3),
    4: (
        _orbit3(0.445948490915965) + _orbit3(0.091576213509771),
        [0.223381589678011] * 3 + [0.109951743655322] * 3,
    ),
    5: (
        [(1 / 3, 1 / 3, 1 / 3)] + _orbit3(0.470142064105115) + _orbit3(0.101286507323456),
        [0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3,
    ),
}


@lru_cache(maxsize=None)
def reference_triangle_rule(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Barycentric points (m, 3) and weights summing to 1, exact to total `degree`"""
    for known in (1, 2, 4, 5):
        if degree <= known:
            bary, weights = _DUNAVANT[known]
            return np.array(bary), np.array(weights)
    # collapsed tensor Gauss rule for higher degrees
    q = math.ceil((degree + 2) / 2)
    t, w = gauss_legendre(q)
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    l1 = u.ravel()
    l2 = (v * (1.0 - u)).ravel()
    weights = 2.0 * (wu * wv * (1.0 - u)).ravel()
    return np.column_stack([l1, l2, 1.0 - l1 - l2]), weights


def triangle_rule(a: Point, b: Point, c: Point, order: int) -> QuadRule:
    vertices = np.array([a, b, c], dtype=float)
    area = 0.5 * abs(_cross(vertices[1] - vertices[0], vertices[2] - vertices[0]))
    bary, weights = reference_triangle_rule(order)
    return QuadRule(bary @ vertices, weights * area)


@lru_cache(maxsize=None)
def reference_square_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on [-1/2, 1/2]^2 exact to degree `order` per variable"""
    q = max(1, math.ceil((order + 1) / 2))
    t, w = gauss_legendre(q)
    xi, eta = np.meshgrid(t - 0.5, t - 0.5, indexing="ij")
    wx, wy = np.meshgrid(w, w, indexing="ij")
    return np.column_stack([xi.ravel(), eta.ravel()]), (wx * wy).ravel()


def rectangle_rule(x0: float, y0: float, x1: float, y1: float, order: int) -> QuadRule:
    local, weights = reference_square_rule(order)
    hx, hy = x1 - x0, y1 - y0
    center = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])
    return QuadRule(center + local * np.array([hx, hy]), weights * hx * hy)


def _cross(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def signed_area(vertices: Sequence[Point]) -> float:
    pts = np.asarray(vertices, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(vertices: Sequence[Point]) -> Point:
    """Area centroid by the shoelace formula"""
    pts = np.asarray(vertices, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return float(x.mean()), float(y.mean())
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return float(cx), float(cy)


def ear_clip(vertices: Sequence[Point]) -> list:
    """Triangulate a simple counter-clockwise polygon into vertex triples"""
    pts = [np.asarray(v, dtype=float) for v in vertices]
    index = list(range(len(pts)))
    scale = max(abs(signed_area(vertices)), 1e-300)
    triangles = []
    while len(index) > 3:
        clipped = False
        for k in range(len(index)):
            i, j, l = index[k - 1], index[k], index[(k + 1) % len(index)]
            turn = _cross(pts[j] - pts[i], pts[l] - pts[j])
            if abs(turn) <= 1e-14 * scale:
                # collinear vertex, nothing to triangulate
                index.pop(k)
                clipped = True
                break
            if turn < 0:
                continue
            if any(
                _strictly_inside(pts[m], pts[i], pts[j], pts[l])
                for m in index
                if m not in (i, j, l)
            ):
                continue
            triangles.append((vertices[i], vertices[j], vertices[l]))
            index.pop(k)
            clipped = True
            break
        if not clipped:
            raise DegeneratePolygon("ear clipping found no ear; polygon is not simple")
    triangles.append(tuple(vertices[m] for m in index))
    return triangles


def _strictly_inside(p, a, b, c) -> bool:
    d1 = _cross(b - a, p - a)
    d2 = _cross(c - b, p - b)
    d3 = _cross(a - c, p - c)
    return d1 > 0 and d2 > 0 and d3 > 0


def triangulate(vertices: Sequence[Point]) -> list:
    """Fan triangulation from the centroid, or ear clipping when the fan folds"""
    area = signed_area(vertices)
    center = polygon_centroid(vertices)
    fan = []
    for k in range(len(vertices)):
        a, b = vertices[k], vertices[(k + 1) % len(vertices)]
        part = 0.5 * _cross(np.subtract(a, center), np.subtract(b, center))
        if part < -1e-12 * area:
            logger.debug("fan triangulation folds, falling back to ear clipping")
            return ear_clip(vertices)
        if part > 0:
            fan.append((center, a, b))
    return fan


def polygon_rule(vertices: Sequence[Point], order: int = None, *, area_tol: float = None) -> QuadRule:
    """Composite symmetric triangle rule on a simple polygon"""
    order = settings.polygon_order if order is None else order
    area_tol = settings.polygon_area_tol if area_tol is None else area_tol
    vertices = [tuple(map(float, v)) for v in vertices]
    area = signed_area(vertices)
    if abs(area) < area_tol:
        raise DegeneratePolygon(f"polygon area {area:.3e} below {area_tol:.1e}")
    if area < 0:
        vertices = vertices[::-1]
    return QuadRule.concatenate([triangle_rule(a, b, c, order) for a, b, c in triangulate(vertices)])
