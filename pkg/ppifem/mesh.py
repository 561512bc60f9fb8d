"""Uniform Cartesian mesh with element cuts, edge classification and the interior DOF map"""
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .config import settings
from .exceptions import PPIFEMError
from .geometry import ElementCut, Rectangle, SubdomainGeometry, cut_element, regular_cut
from .schemas import ElementClass

logger = logging.getLogger(__name__)


@dataclass
class CartesianMesh:
    """N x N rectangles; node (i, j) has id j*(n+1)+i, element (i, j) has id j*n+i"""

    domain: Rectangle
    n: int
    nodes: np.ndarray
    elements: np.ndarray
    edge_nodes: np.ndarray
    edge_elements: np.ndarray
    interface_edges: np.ndarray
    edge_cuts: Dict[int, List[Tuple[float, float]]]
    cuts: List[ElementCut]
    element_class: np.ndarray
    owner: np.ndarray
    dof_map: np.ndarray

    @property
    def hx(self) -> float:
        return self.domain.hx / self.n

    @property
    def hy(self) -> float:
        return self.domain.hy / self.n

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def dof_count(self) -> int:
        return int((self.dof_map >= 0).sum())

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.dof_map >= 0)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.dof_map < 0)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_elements[:, 1] < 0)

    @property
    def interface_elements(self) -> np.ndarray:
        return np.flatnonzero(self.element_class != ElementClass.regular)

    @property
    def regular_elements(self) -> np.ndarray:
        return np.flatnonzero(self.element_class == ElementClass.regular)

    def rectangle(self, e: int) -> Rectangle:
        return self.cuts[e].element

    def element_edges(self, e: int) -> Tuple[int, int, int, int]:
        """Global ids of the bottom, right, top and left edges"""
        return _local_edges(e, self.n, self.n * (self.n + 1))

    def locate(self, x, y) -> np.ndarray:
        """Element ids of points, boundary points going to the element above/right"""
        i = np.clip(np.floor((np.asarray(x) - self.domain.x0) / self.hx).astype(int), 0, self.n - 1)
        j = np.clip(np.floor((np.asarray(y) - self.domain.y0) / self.hy).astype(int), 0, self.n - 1)
        return j * self.n + i


def _grid(domain: Rectangle, n: int):
    xs = np.linspace(domain.x0, domain.x1, n + 1)
    ys = np.linspace(domain.y0, domain.y1, n + 1)
    return xs, ys


def _edge_tables(n: int):
    """Node pairs and adjacent elements (lower id first, -1 when absent)"""
    node = lambda i, j: j * (n + 1) + i
    elem = lambda i, j: j * n + i
    i, j = np.meshgrid(np.arange(n), np.arange(n + 1), indexing="xy")
    i, j = i.ravel(), j.ravel()
    h_nodes = np.column_stack([node(i, j), node(i + 1, j)])
    below = np.where(j > 0, elem(i, j - 1), -1)
    above = np.where(j < n, elem(i, np.minimum(j, n - 1)), -1)
    h_elems = np.column_stack([np.where(below >= 0, below, above), np.where(below >= 0, above, -1)])

    i, j = np.meshgrid(np.arange(n + 1), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v_nodes = np.column_stack([node(i, j), node(i, j + 1)])
    left = np.where(i > 0, elem(i - 1, j), -1)
    right = np.where(i < n, elem(np.minimum(i, n - 1), j), -1)
    v_elems = np.column_stack([np.where(left >= 0, left, right), np.where(left >= 0, right, -1)])
    return np.vstack([h_nodes, v_nodes]), np.vstack([h_elems, v_elems])


def _sign_change_edges(geom: SubdomainGeometry, xs: np.ndarray, ys: np.ndarray, intervals: int):
    """Flags of horizontal and vertical edges on which some level set changes sign"""
    t = np.linspace(0.0, 1.0, intervals + 1)
    # horizontal edges: rows j, columns i, samples t
    hx = xs[:-1, None] + t * (xs[1:, None] - xs[:-1, None])
    hx_grid = np.broadcast_to(hx[None, :, :], (len(ys), len(xs) - 1, len(t)))
    hy_grid = np.broadcast_to(ys[:, None, None], hx_grid.shape)
    vy = ys[:-1, None] + t * (ys[1:, None] - ys[:-1, None])
    vy_grid = np.broadcast_to(vy[:, None, :], (len(ys) - 1, len(xs), len(t)))
    vx_grid = np.broadcast_to(xs[None, :, None], vy_grid.shape)
    h_flag = np.zeros(hx_grid.shape[:2], dtype=bool)
    v_flag = np.zeros(vy_grid.shape[:2], dtype=bool)
    for phi in geom.level_sets:
        pos = phi(hx_grid, hy_grid) >= 0
        h_flag |= (pos[..., :-1] != pos[..., 1:]).any(axis=-1)
        pos = phi(vx_grid, vy_grid) >= 0
        v_flag |= (pos[..., :-1] != pos[..., 1:]).any(axis=-1)
    return h_flag, v_flag


def build_mesh(domain: Rectangle, n: int, geom: SubdomainGeometry) -> CartesianMesh:
    if n < 2:
        raise ValueError("mesh needs at least 2 subdivisions per axis")
    xs, ys = _grid(domain, n)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    base = j * (n + 1) + i
    elements = np.column_stack([base, base + 1, base + n + 2, base + n + 1])

    edge_nodes, edge_elements = _edge_tables(n)

    # elements touching an edge with a sign change are cut exactly, the rest are regular
    h_flag, v_flag = _sign_change_edges(geom, xs, ys, settings.scan_intervals)
    candidate = h_flag[:-1, :] | h_flag[1:, :] | v_flag[:, :-1] | v_flag[:, 1:]
    candidate = candidate.ravel()

    centers = 0.5 * (nodes[elements[:, 0]] + nodes[elements[:, 2]])
    owner = geom.region_of(centers[:, 0], centers[:, 1]).astype(int)
    element_class = np.zeros(n * n, dtype=int)
    cuts: List[ElementCut] = []
    for e in range(n * n):
        ii, jj = i[e], j[e]
        rect = Rectangle(float(xs[ii]), float(ys[jj]), float(xs[ii + 1]), float(ys[jj + 1]))
        if not candidate[e]:
            cuts.append(regular_cut(rect, int(owner[e])))
            continue
        try:
            cut = cut_element(geom, rect)
        except PPIFEMError as err:
            raise err.with_element(e)
        cuts.append(cut)
        element_class[e] = int(cut.kind)
        if cut.owning_subdomain is not None:
            owner[e] = cut.owning_subdomain
        else:
            owner[e] = 0

    # an interior edge is an interface edge iff a validated cut point lies strictly inside it
    vertical = n * (n + 1)
    edge_cuts: Dict[int, set] = {}
    for e in np.flatnonzero(element_class):
        edges = _local_edges(e, n, vertical)
        for point in cuts[e].cut_points:
            if point.node is None:
                edge_cuts.setdefault(edges[point.edge], set()).add(point.position)
    interface_edges = np.zeros(len(edge_nodes), dtype=bool)
    ordered_cuts = {}
    for edge, points in edge_cuts.items():
        if edge_elements[edge, 1] < 0:
            continue
        interface_edges[edge] = True
        ordered_cuts[edge] = sorted(points)

    dof_map = -np.ones(len(nodes), dtype=int)
    on_boundary = (
        (np.arange(len(nodes)) % (n + 1) == 0)
        | (np.arange(len(nodes)) % (n + 1) == n)
        | (np.arange(len(nodes)) // (n + 1) == 0)
        | (np.arange(len(nodes)) // (n + 1) == n)
    )
    dof_map[~on_boundary] = np.arange(int((~on_boundary).sum()))

    mesh = CartesianMesh(
        domain, n, nodes, elements, edge_nodes, edge_elements, interface_edges,
        ordered_cuts, cuts, element_class, owner, dof_map,
    )
    logger.info("mesh n=%d: %s, %d interface edges", n, class_counts(mesh), int(interface_edges.sum()))
    return mesh


def _local_edges(e: int, n: int, vertical: int) -> Tuple[int, int, int, int]:
    i, j = e % n, e // n
    return (
        j * n + i,
        vertical + j * (n + 1) + i + 1,
        (j + 1) * n + i,
        vertical + j * (n + 1) + i,
    )


def classification_map(mesh: CartesianMesh) -> np.ndarray:
    """Class codes as an (n, n) grid, row j holding the elements of the j-th row from the bottom"""
    return mesh.element_class.reshape(mesh.n, mesh.n).copy()


def class_counts(mesh: CartesianMesh) -> Dict[str, int]:
    counts = Counter(int(code) for code in mesh.element_class)
    return {cls.name: counts.get(int(cls), 0) for cls in ElementClass}
