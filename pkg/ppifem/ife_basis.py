"""Piecewise bilinear IFE nodal and flux-jump bases on cut elements"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg
from matplotlib.path import Path

from .config import settings
from .exceptions import PointOutsideElement, SingularLocalSystem
from .geometry import ElementCut, Point
from .mesh import CartesianMesh
from .schemas import ElementClass

logger = logging.getLogger(__name__)

# Q1 nodal basis a + b*xi + c*eta + d*xi*eta on the scaled element [-1/2, 1/2]^2
Q1_COEFFS = np.array(
    [
        [0.25, -0.5, -0.5, 1.0],
        [0.25, 0.5, -0.5, -1.0],
        [0.25, 0.5, 0.5, 1.0],
        [0.25, -0.5, 0.5, -1.0],
    ]
)


class Selector(NamedTuple):
    kind: str
    index: int

    @classmethod
    def parse(cls, text: str) -> "Selector":
        kind, _, index = text.partition(":")
        return cls(kind, int(index))


@dataclass(frozen=True)
class LocalBasis:
    """Coefficients per basis function and piece, in local coordinates xi=(x-xc)/hx, eta=(y-yc)/hy"""

    element_id: int
    cut: ElementCut
    nodal_coeffs: np.ndarray
    flux_coeffs: np.ndarray
    condition_residual: float = 0.0

    @property
    def pieces(self):
        return self.cut.pieces

    @property
    def flux_count(self) -> int:
        return len(self.flux_coeffs)

    def coeffs(self, which: Selector) -> np.ndarray:
        if which.kind == "nodal":
            return self.nodal_coeffs[which.index]
        if which.kind == "flux":
            return self.flux_coeffs[which.index]
        raise ValueError(f"unknown basis kind {which.kind!r}")

    def global_coeffs(self, which: Selector) -> np.ndarray:
        """The same functions as a + b*x + c*y + d*x*y per piece"""
        xc, yc = self.cut.element.center
        hx, hy = self.cut.element.hx, self.cut.element.hy
        a, b, c, d = self.coeffs(which).T
        return np.column_stack(
            [
                a - b * xc / hx - c * yc / hy + d * xc * yc / (hx * hy),
                b / hx - d * yc / (hx * hy),
                c / hy - d * xc / (hx * hy),
                d / (hx * hy),
            ]
        )


def monomials(cut: ElementCut, x, y):
    """Values and physical gradients of 1, xi, eta, xi*eta; each (m, 4)"""
    rect = cut.element
    xc, yc = rect.center
    xi = (np.asarray(x, dtype=float) - xc) / rect.hx
    eta = (np.asarray(y, dtype=float) - yc) / rect.hy
    one, zero = np.ones_like(xi), np.zeros_like(xi)
    values = np.stack([one, xi, eta, xi * eta], axis=-1)
    grad_x = np.stack([zero, one / rect.hx, zero, eta / rect.hx], axis=-1)
    grad_y = np.stack([zero, zero, one / rect.hy, xi / rect.hy], axis=-1)
    return values, grad_x, grad_y


def _conditions(cut: ElementCut, beta: Sequence[float]):
    """Rows of the defining system and the row ranges of its nodal and flux blocks"""
    pieces = len(cut.pieces)
    size = 4 * pieces
    rows = []

    def row_at(piece, point, scale=1.0):
        values, _, _ = monomials(cut, point[0], point[1])
        row = np.zeros(size)
        row[4 * piece:4 * piece + 4] = scale * values
        return row

    for k, node in enumerate(cut.element.nodes):
        rows.append(row_at(cut.node_piece(k), node))

    # value continuity where pieces meet on the segment endpoints
    meeting: Dict[Point, set] = {}
    for seg in cut.segments:
        for point in (seg.start, seg.end):
            meeting.setdefault(point, set()).update((seg.plus_piece, seg.minus_piece))
    for point, adjacent in meeting.items():
        ordered = sorted(adjacent)
        for first, second in zip(ordered, ordered[1:]):
            rows.append(row_at(first, point) - row_at(second, point))

    if cut.kind != ElementClass.triple_junction:
        for seg in cut.segments:
            row = np.zeros(size)
            row[4 * seg.plus_piece + 3] = 1.0
            row[4 * seg.minus_piece + 3] = -1.0
            rows.append(row)

    flux_start = len(rows)
    for seg in cut.segments:
        rows.append(flux_row(cut, beta, seg))
    return np.array(rows), flux_start


def flux_row(cut: ElementCut, beta: Sequence[float], seg) -> np.ndarray:
    """Integral of [beta grad(phi) . n] over the segment as a row acting on the coefficients"""
    size = 4 * len(cut.pieces)
    mx, my = seg.midpoint
    _, gx, gy = monomials(cut, mx, my)
    normal_grad = gx * seg.normal[0] + gy * seg.normal[1]
    plus_beta = beta[cut.pieces[seg.plus_piece].subdomain - 1]
    minus_beta = beta[cut.pieces[seg.minus_piece].subdomain - 1]
    row = np.zeros(size)
    row[4 * seg.plus_piece:4 * seg.plus_piece + 4] = seg.length * plus_beta * normal_grad
    row[4 * seg.minus_piece:4 * seg.minus_piece + 4] -= seg.length * minus_beta * normal_grad
    return row


def _solve_conditions(cut: ElementCut, beta, rhs_columns: np.ndarray, element_id: int,
                      rank_tol: float = None) -> Tuple[np.ndarray, float]:
    rank_tol = settings.rank_tol if rank_tol is None else rank_tol
    matrix, _ = _conditions(cut, beta)
    if matrix.shape[0] != matrix.shape[1]:
        raise SingularLocalSystem(
            f"{matrix.shape[0]} conditions for {matrix.shape[1]} unknowns",
            element_id=element_id,
            kind=cut.kind.name,
        )
    scale = 1.0 / np.abs(matrix).max(axis=1)
    scaled = matrix * scale[:, None]
    rhs = rhs_columns * scale[:, None]
    lu, piv = scipy.linalg.lu_factor(scaled, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < rank_tol * np.abs(scaled).max():
        raise SingularLocalSystem(
            f"rank-deficient condition system (smallest pivot {pivots.min():.2e})",
            element_id=element_id,
            kind=cut.kind.name,
            pieces=[piece.vertices for piece in cut.pieces],
        )
    solution = scipy.linalg.lu_solve((lu, piv), rhs)
    residual = float(np.abs(scaled @ solution - rhs).max())
    return solution, residual


def _regular_basis(cut: ElementCut, element_id: int) -> "LocalBasis":
    return LocalBasis(element_id, cut, Q1_COEFFS[:, None, :].copy(), np.zeros((0, 1, 4)))


def build_nodal_basis(cut: ElementCut, beta: Sequence[float], element_id: int = -1) -> LocalBasis:
    """Four nodal functions with delta values at the nodes and the interface conditions"""
    if cut.kind == ElementClass.regular:
        return _regular_basis(cut, element_id)
    size = 4 * len(cut.pieces)
    rhs = np.zeros((size, 4))
    rhs[:4, :4] = np.eye(4)
    solution, residual = _solve_conditions(cut, beta, rhs, element_id)
    nodal = solution.T.reshape(4, len(cut.pieces), 4)
    return LocalBasis(element_id, cut, nodal, np.zeros((0, len(cut.pieces), 4)), residual)


def build_flux_basis(cut: ElementCut, beta: Sequence[float], nodal: Optional[LocalBasis] = None,
                     element_id: int = -1) -> LocalBasis:
    """Flux-jump functions: zero at the nodes, unit flux jump on their own segment"""
    if nodal is None:
        nodal = build_nodal_basis(cut, beta, element_id)
    if cut.kind == ElementClass.regular:
        return nodal
    size = 4 * len(cut.pieces)
    k = len(cut.segments)
    rhs = np.zeros((size, k))
    rhs[size - k:, :] = np.eye(k)
    solution, residual = _solve_conditions(cut, beta, rhs, element_id)
    flux = solution.T.reshape(k, len(cut.pieces), 4)
    return replace(nodal, flux_coeffs=flux, condition_residual=max(nodal.condition_residual, residual))


def build_local_basis(cut: ElementCut, beta: Sequence[float], element_id: int = -1) -> LocalBasis:
    return build_flux_basis(cut, beta, build_nodal_basis(cut, beta, element_id), element_id)


def condition_matrix(cut: ElementCut, beta: Sequence[float]) -> np.ndarray:
    """Unscaled defining system, rows ordered nodal, continuity, coupling, flux"""
    return _conditions(cut, beta)[0]


def locate_pieces(cut: ElementCut, x, y, slack: float = 1e-12) -> np.ndarray:
    """Index of the piece containing each point"""
    rect = cut.element
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    tol = slack * rect.h
    outside = (x < rect.x0 - tol) | (x > rect.x1 + tol) | (y < rect.y0 - tol) | (y > rect.y1 + tol)
    if outside.any():
        k = int(np.flatnonzero(outside)[0])
        raise PointOutsideElement(f"point ({x[k]:.6g}, {y[k]:.6g}) is outside the element")
    if len(cut.pieces) == 1:
        return np.zeros(len(x), dtype=int)
    x = np.clip(x, rect.x0, rect.x1)
    y = np.clip(y, rect.y0, rect.y1)
    points = np.column_stack([x, y])
    result = -np.ones(len(x), dtype=int)
    paths = [Path(np.array(piece.vertices)) for piece in cut.pieces]
    for index, path in enumerate(paths):
        inside = path.contains_points(points) & (result < 0)
        result[inside] = index
    # points on segments: nudge towards each piece centroid in turn
    for k in np.flatnonzero(result < 0):
        for index, (path, piece) in enumerate(zip(paths, cut.pieces)):
            nudged = points[k] + settings.inward_shift * (np.array(piece.centroid) - points[k])
            if path.contains_point(nudged):
                result[k] = index
                break
        else:
            distances = [np.hypot(*(np.array(piece.centroid) - points[k])) for piece in cut.pieces]
            result[k] = int(np.argmin(distances))
    return result


def evaluate(basis: LocalBasis, which: Selector, p: Point) -> Tuple[float, np.ndarray]:
    value, gx, gy = evaluate_many(basis, which, [p[0]], [p[1]])
    return float(value[0]), np.array([gx[0], gy[0]])


def evaluate_many(basis: LocalBasis, which: Selector, x, y, pieces: np.ndarray = None):
    coeffs = basis.coeffs(which)
    if pieces is None:
        pieces = locate_pieces(basis.cut, x, y)
    values, grad_x, grad_y = monomials(basis.cut, np.atleast_1d(x), np.atleast_1d(y))
    chosen = coeffs[pieces]
    return (
        np.einsum("mk,mk->m", values, chosen),
        np.einsum("mk,mk->m", grad_x, chosen),
        np.einsum("mk,mk->m", grad_y, chosen),
    )


class IFESpace:
    """Local bases of a mesh for a coefficient triple"""

    def __init__(self, mesh: CartesianMesh, beta: Sequence[float]):
        self.mesh = mesh
        self.beta = tuple(float(b) for b in beta)
        self._bases: Dict[int, LocalBasis] = {}
        worst = 0.0
        for e in mesh.interface_elements:
            e = int(e)
            try:
                basis = build_local_basis(mesh.cuts[e], self.beta, e)
            except SingularLocalSystem as err:
                raise err.with_element(e)
            self._bases[e] = basis
            worst = max(worst, basis.condition_residual)
        logger.info(
            "built %d interface bases on n=%d, worst condition residual %.2e",
            len(self._bases), mesh.n, worst,
        )

    def basis(self, e: int) -> LocalBasis:
        e = int(e)
        if e not in self._bases:
            self._bases[e] = _regular_basis(self.mesh.cuts[e], e)
        return self._bases[e]

    def interface_bases(self):
        return [self._bases[int(e)] for e in self.mesh.interface_elements]


def sample_basis_surface(space: IFESpace, element_id: int, selector: Selector, m: int = 41) -> pd.DataFrame:
    """Values of one local basis function on an m x m grid over its element"""
    basis = space.basis(element_id)
    if selector.kind == "flux" and selector.index >= basis.flux_count:
        raise ValueError(f"element {element_id} has {basis.flux_count} flux functions")
    rect = basis.cut.element
    X, Y = np.meshgrid(np.linspace(rect.x0, rect.x1, m), np.linspace(rect.y0, rect.y1, m), indexing="xy")
    values, _, _ = evaluate_many(basis, selector, X.ravel(), Y.ravel())
    return pd.DataFrame({"x": X.ravel(), "y": Y.ravel(), "value": values})
