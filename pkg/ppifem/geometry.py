"""Level-set description of three subdomains and cut geometry of mesh elements"""
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .config import settings
from .exceptions import (
    AmbiguousPoint,
    DegenerateCut,
    HypothesisViolation,
    NoConvergence,
    TriplePointOutside,
)
from .quadrature import polygon_centroid, signed_area
from .schemas import ElementClass

logger = logging.getLogger(__name__)

Point = Tuple[float, float]

# interface i separates (plus, minus); the normal points from minus into plus
DEFAULT_INTERFACE_PAIRS = ((3, 2), (1, 3), (2, 1))


def _broadcast(value, like) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), np.shape(like)).copy()


@dataclass(frozen=True)
class LevelSet:
    """Scalar field whose zero set carries one interface"""

    value: Callable
    gradient: Optional[Callable] = None
    fd_step: float = 1e-6

    def __call__(self, x, y) -> np.ndarray:
        return _broadcast(self.value(x, y), x)

    def grad(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        if self.gradient is not None:
            gx, gy = self.gradient(x, y)
            return _broadcast(gx, x), _broadcast(gy, x)
        s = self.fd_step
        gx = (self(np.add(x, s), y) - self(np.subtract(x, s), y)) / (2 * s)
        gy = (self(x, np.add(y, s)) - self(x, np.subtract(y, s))) / (2 * s)
        return gx, gy


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned element; nodes A1..A4 counter-clockwise from the lower left"""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def hx(self) -> float:
        return self.x1 - self.x0

    @property
    def hy(self) -> float:
        return self.y1 - self.y0

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def area(self) -> float:
        return self.hx * self.hy

    @property
    def center(self) -> Point:
        return 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)

    @property
    def nodes(self) -> Tuple[Point, Point, Point, Point]:
        return (self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1)

    def edge(self, k: int) -> Tuple[Point, Point]:
        """Local edge k runs from node k to node k+1"""
        nodes = self.nodes
        return nodes[k], nodes[(k + 1) % 4]

    def edge_parameter(self, k: int, p: Point) -> float:
        if k == 0:
            return (p[0] - self.x0) / self.hx
        if k == 1:
            return (p[1] - self.y0) / self.hy
        if k == 2:
            return (self.x1 - p[0]) / self.hx
        return (self.y1 - p[1]) / self.hy

    def boundary_point(self, s) -> np.ndarray:
        """Points on the boundary for perimeter parameters s in [0, 4)"""
        s = np.mod(np.asarray(s, dtype=float), 4.0)
        k = np.minimum(np.floor(s).astype(int), 3)
        t = s - k
        nodes = np.array(self.nodes)
        start = nodes[k]
        end = nodes[(k + 1) % 4]
        return (1.0 - t)[..., None] * start + t[..., None] * end

    def on_boundary(self, p: Point, tol: float = 0.0) -> bool:
        return (
            abs(p[0] - self.x0) <= tol
            or abs(p[0] - self.x1) <= tol
            or abs(p[1] - self.y0) <= tol
            or abs(p[1] - self.y1) <= tol
        )

    def contains(self, p: Point, slack: float = 0.0) -> bool:
        return (
            self.x0 - slack <= p[0] <= self.x1 + slack
            and self.y0 - slack <= p[1] <= self.y1 + slack
        )


@dataclass(frozen=True)
class SubdomainGeometry:
    """Three level sets plus the rule mapping their signs to subdomains 1..3"""

    level_sets: Tuple[LevelSet, LevelSet, LevelSet]
    region_rule: Callable[[np.ndarray], np.ndarray]
    normal_signs: Tuple[int, int, int] = (1, 1, 1)
    interface_between: Tuple[Tuple[int, int], ...] = DEFAULT_INTERFACE_PAIRS
    name: str = "custom"

    def level_set(self, i: int, x, y) -> np.ndarray:
        return self.level_sets[i - 1](x, y)

    def values(self, x, y) -> np.ndarray:
        return np.stack([phi(x, y) for phi in self.level_sets])

    def region_of(self, x, y) -> np.ndarray:
        """Subdomain labels; points on an interface get one of the adjacent labels"""
        return np.asarray(self.region_rule(self.values(x, y)), dtype=int)

    def interface_for(self, first: int, second: int) -> int:
        pair = {first, second}
        for i, (plus, minus) in enumerate(self.interface_between, start=1):
            if pair == {plus, minus}:
                return i
        raise HypothesisViolation(f"no interface separates subdomains {first} and {second}")

    def normal(self, i: int, x, y) -> Tuple[np.ndarray, np.ndarray]:
        """Unit normal of interface i pointing from its minus side into its plus side"""
        gx, gy = self.level_sets[i - 1].grad(x, y)
        norm = np.hypot(gx, gy)
        sign = self.normal_signs[i - 1]
        return sign * gx / norm, sign * gy / norm


def classify_point(geom: SubdomainGeometry, p: Point, tol: float = None) -> int:
    tol = settings.tol_onsurface if tol is None else tol
    x, y = float(p[0]), float(p[1])
    label = int(geom.region_of(x, y))
    for i, (plus, minus) in enumerate(geom.interface_between, start=1):
        if label not in (plus, minus):
            continue
        value = float(geom.level_set(i, x, y))
        gx, gy = geom.level_sets[i - 1].grad(x, y)
        distance = abs(value) / max(float(np.hypot(gx, gy)), 1e-300)
        if distance > tol:
            continue
        # near the zero set of phi_i; ambiguous only if the other side is a different subdomain
        other = {plus, minus} - {label}
        offset = 10 * tol + 1e-9
        shifted = [
            int(geom.region_of(x + sgn * offset * gx / np.hypot(gx, gy), y + sgn * offset * gy / np.hypot(gx, gy)))
            for sgn in (-1.0, 1.0)
        ]
        if other & set(shifted):
            raise AmbiguousPoint(f"point ({x:.6g}, {y:.6g}) lies on interface {i}")
    return label


def _edge_roots(geom: SubdomainGeometry, interface: int, a: np.ndarray, b: np.ndarray,
                intervals: int, tol: float) -> list:
    t = np.linspace(0.0, 1.0, intervals + 1)
    pts = a + t[:, None] * (b - a)
    positive = geom.level_set(interface, pts[:, 0], pts[:, 1]) >= 0
    changes = np.flatnonzero(positive[:-1] != positive[1:])
    if len(changes) > 2:
        raise HypothesisViolation(
            f"interface {interface} crosses edge {tuple(a)}-{tuple(b)} {len(changes)} times"
        )
    roots = []
    for k in changes:
        lo, hi = t[k], t[k + 1]
        side = positive[k]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            p = a + mid * (b - a)
            if (geom.level_set(interface, p[0], p[1]) >= 0) == side:
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return roots


def edge_intersections(geom: SubdomainGeometry, interface: int, a: Point, b: Point, *,
                       intervals: int = None, tol: float = None) -> list:
    """Roots of phi_interface on the open segment (a, b)"""
    intervals = settings.scan_intervals if intervals is None else intervals
    tol = settings.root_tol if tol is None else tol
    # canonical orientation so both neighbours of an edge get bitwise-equal roots
    if tuple(b) < tuple(a):
        a, b = b, a
    start = np.asarray(a, dtype=float)
    end = np.asarray(b, dtype=float)
    positions = []
    for t in _edge_roots(geom, interface, start, end, intervals, tol):
        p = start + t * (end - start)
        positions.append((float(p[0]), float(p[1])))
    return positions


def locate_triple_point(geom: SubdomainGeometry, element: Rectangle, *, max_iter: int = None,
                        tol: float = None, consistency_tol: float = None) -> Point:
    """Damped Newton for the common zero of two level sets, started at the element center"""
    max_iter = settings.newton_max_iter if max_iter is None else max_iter
    tol = settings.newton_tol if tol is None else tol
    consistency_tol = settings.triple_consistency_tol if consistency_tol is None else consistency_tol

    cx, cy = element.center
    first, second, third = _newton_pair(geom, cx, cy)

    def residual(p):
        return np.array([geom.level_set(first, p[0], p[1]), geom.level_set(second, p[0], p[1])], dtype=float)

    p = np.array([cx, cy])
    r = residual(p)
    iteration = 0
    for iteration in range(max_iter):
        if np.abs(r).sum() < tol:
            break
        jac = np.array([geom.level_sets[first - 1].grad(p[0], p[1]), geom.level_sets[second - 1].grad(p[0], p[1])], dtype=float)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as err:
            raise NoConvergence("level-set gradients are parallel near the triple point") from err
        damping = 1.0
        while True:
            trial = p + damping * step
            r_trial = residual(trial)
            if np.abs(r_trial).sum() < np.abs(r).sum() or damping < 1e-4:
                break
            damping *= 0.5
        p, r = trial, r_trial
    else:
        if np.abs(r).sum() >= tol:
            raise NoConvergence(f"triple point Newton stalled at residual {np.abs(r).sum():.3e}")
    logger.debug("triple point %s after %d Newton steps", p, iteration)

    check = abs(float(geom.level_set(third, p[0], p[1])))
    if check > consistency_tol:
        raise HypothesisViolation(f"third level set is {check:.3e} at the triple point")
    slack = max(settings.snap_tolerances) * element.h
    if not element.contains((p[0], p[1]), slack):
        raise TriplePointOutside(f"triple point ({p[0]:.6g}, {p[1]:.6g}) lies outside the element")
    x = min(max(float(p[0]), element.x0), element.x1)
    y = min(max(float(p[1]), element.y0), element.y1)
    return x, y


def _newton_pair(geom: SubdomainGeometry, x: float, y: float) -> Tuple[int, int, int]:
    """Pick the two level sets with the best conditioned Jacobian at (x, y)"""
    grads = [np.array(phi.grad(x, y), dtype=float) for phi in geom.level_sets]
    best = None
    for first, second, third in ((1, 2, 3), (1, 3, 2), (2, 3, 1)):
        g1, g2 = grads[first - 1], grads[second - 1]
        det = abs(g1[0] * g2[1] - g1[1] * g2[0]) / max(np.linalg.norm(g1) * np.linalg.norm(g2), 1e-300)
        if best is None or det > best[0] + 1e-12:
            best = (det, (first, second, third))
    return best[1]


# Cut records
@dataclass(frozen=True)
class CutPoint:
    position: Point
    interface: int
    edge: int
    s: float
    node: Optional[int] = None
    sides: Tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Piece:
    vertices: Tuple[Point, ...]
    subdomain: int
    area: float = 0.0
    centroid: Point = (0.0, 0.0)

    @classmethod
    def from_vertices(cls, vertices: Sequence[Point], subdomain: int) -> "Piece":
        vertices = tuple(vertices)
        return cls(vertices, subdomain, signed_area(vertices), polygon_centroid(vertices))


@dataclass(frozen=True)
class Segment:
    """Straight approximation of one interface inside an element"""

    interface: int
    start: Point
    end: Point
    plus_piece: int
    minus_piece: int
    normal: Point

    @property
    def length(self) -> float:
        return float(np.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1]))

    @property
    def midpoint(self) -> Point:
        return 0.5 * (self.start[0] + self.end[0]), 0.5 * (self.start[1] + self.end[1])


@dataclass(frozen=True)
class ElementCut:
    element: Rectangle
    kind: ElementClass
    pieces: Tuple[Piece, ...]
    segments: Tuple[Segment, ...] = ()
    cut_points: Tuple[CutPoint, ...] = ()
    triple_point: Optional[Point] = None
    owning_subdomain: Optional[int] = None

    @property
    def is_interface(self) -> bool:
        return self.kind != ElementClass.regular

    def node_piece(self, k: int) -> int:
        """Piece having local node k as a vertex"""
        node = self.element.nodes[k]
        for index, piece in enumerate(self.pieces):
            if node in piece.vertices:
                return index
        raise HypothesisViolation(f"node {k} belongs to no piece")

    def boundary_piece(self, p: Point) -> int:
        """Piece whose boundary arc contains the point p of the element boundary"""
        tol = 1e-12 * self.element.h
        for index, piece in enumerate(self.pieces):
            verts = piece.vertices
            for a, b in zip(verts, verts[1:] + verts[:1]):
                if not _on_element_side(self.element, a, b):
                    continue
                if _point_on_segment(p, a, b, tol):
                    return index
        raise HypothesisViolation(f"point {p} is not on the boundary of any piece")


def regular_cut(element: Rectangle, subdomain: int) -> ElementCut:
    piece = Piece(element.nodes, subdomain, element.area, element.center)
    return ElementCut(element, ElementClass.regular, (piece,), owning_subdomain=subdomain)


def _on_element_side(element: Rectangle, a: Point, b: Point) -> bool:
    return (
        (a[0] == b[0] and a[0] in (element.x0, element.x1))
        or (a[1] == b[1] and a[1] in (element.y0, element.y1))
    )


def _point_on_segment(p: Point, a: Point, b: Point, tol: float) -> bool:
    ax, ay = b[0] - a[0], b[1] - a[1]
    length = np.hypot(ax, ay)
    if length == 0.0:
        return False
    px, py = p[0] - a[0], p[1] - a[1]
    if abs(ax * py - ay * px) / length > tol:
        return False
    t = (ax * px + ay * py) / length**2
    return -tol / length <= t <= 1.0 + tol / length


@dataclass
class _Candidate:
    s: float
    position: Point
    edge: int
    node: Optional[int] = None
    interfaces: frozenset = field(default_factory=frozenset)


def cut_element(geom: SubdomainGeometry, element: Rectangle, *, snap_tolerances: Sequence[float] = None,
                area_epsilon: float = None) -> ElementCut:
    """Classify an element and split it into labelled pieces along straight interface segments"""
    snap_tolerances = settings.snap_tolerances if snap_tolerances is None else snap_tolerances
    area_epsilon = settings.area_epsilon if area_epsilon is None else area_epsilon
    failure = None
    for snap in snap_tolerances:
        try:
            return _cut_with_snap(geom, element, snap, area_epsilon)
        except DegenerateCut as err:
            logger.warning("degenerate cut at snap %.0e, retrying coarser: %s", snap, err)
            failure = err
    raise failure


def _boundary_candidates(geom: SubdomainGeometry, element: Rectangle, snap: float) -> list:
    candidates = []
    for k in range(4):
        a, b = element.edge(k)
        roots = []
        for i in (1, 2, 3):
            for position in edge_intersections(geom, i, a, b):
                t = element.edge_parameter(k, position)
                if t <= snap or t >= 1.0 - snap:
                    continue  # absorbed by the node
                roots.append((t, position, i))
        roots.sort()
        merged = []
        for t, position, i in roots:
            if merged and t - merged[-1][0] <= snap:
                merged[-1][1] = min(merged[-1][1], position)
                merged[-1][2].add(i)
                continue
            merged.append([t, position, {i}])
        candidates.append(_Candidate(float(k), element.nodes[k], k, node=k))
        for t, position, interfaces in merged:
            candidates.append(_Candidate(k + t, position, k, interfaces=frozenset(interfaces)))
    candidates.sort(key=lambda c: c.s)
    return candidates


def _sample_regions(geom: SubdomainGeometry, element: Rectangle, s_values) -> np.ndarray:
    """Regions just inside the element at boundary parameters s"""
    points = element.boundary_point(s_values)
    center = np.array(element.center)
    points = points + settings.inward_shift * (center - points)
    return geom.region_of(points[..., 0], points[..., 1])


def _majority_region(geom: SubdomainGeometry, element: Rectangle, samples: int = 8) -> int:
    t = (np.arange(samples) + 0.5) / samples
    X, Y = np.meshgrid(element.x0 + t * element.hx, element.y0 + t * element.hy)
    regions = np.asarray(geom.region_of(X.ravel(), Y.ravel()), dtype=int)
    return int(np.bincount(regions).argmax())


def _cut_with_snap(geom: SubdomainGeometry, element: Rectangle, snap: float, area_epsilon: float) -> ElementCut:
    candidates = _boundary_candidates(geom, element, snap)
    s = np.array([c.s for c in candidates])
    s_next = np.append(s[1:], s[0] + 4.0)
    arc_regions = _sample_regions(geom, element, 0.5 * (s + s_next))

    cuts = []
    for j, cand in enumerate(candidates):
        before, after = int(arc_regions[j - 1]), int(arc_regions[j])
        if before == after:
            continue
        cuts.append(
            CutPoint(cand.position, geom.interface_for(before, after), cand.edge, cand.s, cand.node, (before, after))
        )

    if not cuts:
        cx, cy = element.center
        return regular_cut(element, int(geom.region_of(cx, cy)))

    by_interface = defaultdict(list)
    for cut in cuts:
        by_interface[cut.interface].append(cut)
    # an interface entering and leaving through the same side leaves no straight chord
    for i, pair in list(by_interface.items()):
        if len(pair) == 2 and _on_element_side(element, pair[0].position, pair[1].position):
            logger.debug("interface %d crosses one side of %s twice, dropping its cut points", i, element)
            del by_interface[i]
    if not by_interface:
        return regular_cut(element, _majority_region(geom, element))
    cuts = [cut for cut in cuts if cut.interface in by_interface]

    counts = sorted(len(v) for v in by_interface.values())
    triple_point = None
    if counts in ([2], [2, 2]):
        chords = [(i, pair[0].position, pair[1].position) for i, pair in sorted(by_interface.items())]
        kind = ElementClass.one_interface if len(chords) == 1 else ElementClass.two_interface
    elif counts == [1, 1, 1]:
        triple_point = locate_triple_point(geom, element)
        gap = min(
            triple_point[0] - element.x0,
            element.x1 - triple_point[0],
            triple_point[1] - element.y0,
            element.y1 - triple_point[1],
        )
        if gap <= snap * element.h:
            # triple point on the element boundary: two chords from the shared cut point
            anchor = min(cuts, key=lambda c: np.hypot(c.position[0] - triple_point[0], c.position[1] - triple_point[1]))
            chords = [(c.interface, anchor.position, c.position) for c in cuts if c is not anchor]
            kind = ElementClass.two_interface
            triple_point = None
        else:
            chords = [(c.interface, c.position, triple_point) for c in cuts]
            kind = ElementClass.triple_junction
    else:
        raise HypothesisViolation(
            f"unsupported cut pattern {dict((i, len(v)) for i, v in by_interface.items())}"
        )

    boundary = _boundary_polygon(element, cuts)
    if kind == ElementClass.triple_junction:
        polygons = _junction_polygons(boundary, cuts, triple_point)
    else:
        polygons = [boundary]
        for _, start, end in chords:
            polygons = _split_by_chord(polygons, start, end)

    total = element.area
    labels = []
    for poly in polygons:
        area = signed_area(poly)
        if area < area_epsilon * total:
            raise DegenerateCut(f"piece of relative area {area / total:.2e}")
        labels.append(_piece_label(geom, element, poly))
    pieces = tuple(Piece.from_vertices(poly, label) for poly, label in zip(polygons, labels))

    segments = tuple(_make_segment(geom, polygons, pieces, i, start, end) for i, start, end in chords)
    return ElementCut(element, kind, pieces, segments, tuple(cuts), triple_point)


def _boundary_polygon(element: Rectangle, cuts: Sequence[CutPoint]) -> list:
    vertices = [(float(k), element.nodes[k]) for k in range(4)]
    vertices += [(c.s, c.position) for c in cuts if c.node is None]
    vertices.sort(key=lambda item: item[0])
    return [v for _, v in vertices]


def _junction_polygons(boundary: list, cuts: Sequence[CutPoint], triple_point: Point) -> list:
    ordered = sorted(cuts, key=lambda c: c.s)
    index = [boundary.index(c.position) for c in ordered]
    polygons = []
    for k in range(3):
        start, stop = index[k], index[(k + 1) % 3]
        if stop > start:
            arc = boundary[start:stop + 1]
        else:
            arc = boundary[start:] + boundary[:stop + 1]
        polygons.append(arc + [triple_point])
    return polygons


def _split_by_chord(polygons: list, start: Point, end: Point) -> list:
    for n, poly in enumerate(polygons):
        if start in poly and end in poly:
            i, j = poly.index(start), poly.index(end)
            lo, hi = min(i, j), max(i, j)
            first = poly[lo:hi + 1]
            second = poly[hi:] + poly[:lo + 1]
            return polygons[:n] + [first, second] + polygons[n + 1:]
    raise HypothesisViolation(f"segment {start}-{end} does not split any piece")


def _piece_label(geom: SubdomainGeometry, element: Rectangle, poly: list) -> int:
    """Region of the longest element-boundary arc owned by the piece"""
    best = None
    for k, a in enumerate(poly):
        b = poly[(k + 1) % len(poly)]
        if not _on_element_side(element, a, b):
            continue
        length = np.hypot(b[0] - a[0], b[1] - a[1])
        if best is None or length > best[0]:
            best = (length, a, b)
    if best is None:
        raise HypothesisViolation("piece does not touch the element boundary")
    _, a, b = best
    mid = np.array([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])])
    mid = mid + settings.inward_shift * (np.array(element.center) - mid)
    return int(geom.region_of(mid[0], mid[1]))


def _make_segment(geom: SubdomainGeometry, polygons: list, pieces: Sequence[Piece], interface: int,
                  start: Point, end: Point) -> Segment:
    left = right = None
    for n, poly in enumerate(polygons):
        for a, b in zip(poly, poly[1:] + poly[:1]):
            if a == start and b == end:
                left = n
            elif a == end and b == start:
                right = n
    if left is None or right is None:
        raise HypothesisViolation(f"segment of interface {interface} is not shared by two pieces")
    plus, minus = geom.interface_between[interface - 1]
    labels = (pieces[left].subdomain, pieces[right].subdomain)
    dx, dy = end[0] - start[0], end[1] - start[1]
    length = np.hypot(dx, dy)
    left_normal = (-dy / length, dx / length)
    if labels == (plus, minus):
        return Segment(interface, start, end, left, right, left_normal)
    if labels == (minus, plus):
        return Segment(interface, start, end, right, left, (-left_normal[0], -left_normal[1]))
    raise HypothesisViolation(
        f"pieces next to interface {interface} carry subdomains {labels}, expected {(plus, minus)}"
    )
