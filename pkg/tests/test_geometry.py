import numpy as np
import pytest

from ppifem.exceptions import AmbiguousPoint, HypothesisViolation, NoConvergence
from ppifem.geometry import (
    LevelSet,
    Rectangle,
    SubdomainGeometry,
    classify_point,
    cut_element,
    edge_intersections,
    locate_triple_point,
)
from ppifem.problems import example1, example2
from ppifem.schemas import ElementClass
from tests.geometries import UNIT, horizontal_geometry, quadrant_geometry, random_sector_geometry, ray


def _single_level_set(phi: LevelSet) -> SubdomainGeometry:
    return SubdomainGeometry(
        level_sets=(phi, phi, phi),
        region_rule=lambda values: np.where(values[0] >= 0, 1, 3),
    )


def test_classify_point_examples():
    assert classify_point(example2.geometry(), (0.0, 0.0)) == 1
    assert classify_point(example2.geometry(), (0.6, 0.0)) == 2
    assert classify_point(example1.geometry(), (-1.0, -1.0)) == 3


def test_classify_point_on_interface_is_ambiguous():
    with pytest.raises(AmbiguousPoint):
        classify_point(example2.geometry(), (0.5, 0.0))


def test_edge_intersection_of_a_line():
    geom = _single_level_set(LevelSet(lambda x, y: np.asarray(x) - 0.5))
    (root,) = edge_intersections(geom, 1, (0.0, 0.0), (1.0, 0.0))
    assert root == pytest.approx((0.5, 0.0), abs=1e-13)


def test_edge_intersection_of_the_circle():
    geom = _single_level_set(LevelSet(lambda x, y: np.asarray(x) ** 2 + np.asarray(y) ** 2 - 0.25))
    (root,) = edge_intersections(geom, 1, (0.0, 0.4), (1.0, 0.4))
    assert root == pytest.approx((0.3, 0.4), abs=1e-12)


def test_edge_without_root():
    geom = _single_level_set(LevelSet(lambda x, y: np.asarray(y) + 2.0))
    assert edge_intersections(geom, 1, (0.0, 0.0), (1.0, 0.0)) == []


def test_edge_intersections_do_not_depend_on_direction():
    geom = example2.geometry()
    a, b = (0.25, 0.375), (0.375, 0.375)
    assert edge_intersections(geom, 2, a, b) == edge_intersections(geom, 2, b, a)


def test_too_many_crossings_violate_the_hypothesis():
    geom = _single_level_set(LevelSet(lambda x, y: np.sin(20 * np.asarray(x))))
    with pytest.raises(HypothesisViolation):
        edge_intersections(geom, 1, (0.05, 0.0), (1.0, 0.0))


def test_triple_point_of_crossing_lines():
    p = locate_triple_point(quadrant_geometry(), Rectangle(-0.5, -0.5, 0.5, 0.5))
    assert p == pytest.approx((0.0, 0.0), abs=1e-12)


def test_triple_point_example1():
    p = locate_triple_point(example1.geometry(), Rectangle(0.0, 0.0, 0.125, 0.125))
    assert p == pytest.approx(example1.TRIPLE_POINT, abs=1e-12)


def test_triple_point_example2():
    p = locate_triple_point(example2.geometry(), Rectangle(0.375, 0.25, 0.5, 0.375))
    assert p == pytest.approx((0.4, 0.3), abs=1e-12)


def test_triple_point_without_newton_steps():
    # the element center of the quadrant cross is already the triple point
    p = locate_triple_point(quadrant_geometry(), Rectangle(-0.5, -0.5, 0.5, 0.5), max_iter=0)
    assert p == pytest.approx((0.0, 0.0), abs=1e-12)
    with pytest.raises(NoConvergence):
        locate_triple_point(example1.geometry(), Rectangle(0.0, 0.0, 0.125, 0.125), max_iter=0)


def test_horizontal_cut():
    cut = cut_element(horizontal_geometry(0.5), UNIT)
    assert cut.kind == ElementClass.one_interface
    (segment,) = cut.segments
    assert {segment.start, segment.end} == {(0.0, 0.5), (1.0, 0.5)}
    assert sorted(piece.area for piece in cut.pieces) == pytest.approx([0.5, 0.5])
    # normal runs from subdomain 3 (below) into subdomain 1 (above)
    assert segment.normal == pytest.approx((0.0, 1.0))
    assert cut.pieces[segment.plus_piece].subdomain == 1


def test_quadrant_triple_junction():
    cut = cut_element(quadrant_geometry(), Rectangle(-0.5, -0.5, 0.5, 0.5))
    assert cut.kind == ElementClass.triple_junction
    assert cut.triple_point == pytest.approx((0.0, 0.0), abs=1e-12)
    areas = {piece.subdomain: piece.area for piece in cut.pieces}
    assert areas[1] == pytest.approx(0.25)
    assert areas[2] == pytest.approx(0.125)
    assert areas[3] == pytest.approx(0.625)
    assert len(cut.segments) == 3


def test_example1_triple_junction_element():
    cut = cut_element(example1.geometry(), Rectangle(0.0, 0.0, 0.125, 0.125))
    assert cut.kind == ElementClass.triple_junction
    assert cut.triple_point == pytest.approx((0.05, 0.05), abs=1e-10)
    assert sum(piece.area for piece in cut.pieces) == pytest.approx(0.125**2, rel=1e-12)
    assert sorted(piece.subdomain for piece in cut.pieces) == [1, 2, 3]


def test_element_inside_the_circle_is_regular():
    cut = cut_element(example2.geometry(), Rectangle(0.0, 0.0, 0.125, 0.125))
    assert cut.kind == ElementClass.regular
    assert cut.owning_subdomain == 1


def test_cut_is_deterministic():
    element = Rectangle(0.375, 0.25, 0.5, 0.375)
    assert cut_element(example2.geometry(), element) == cut_element(example2.geometry(), element)


def test_pieces_tile_interface_elements(example1_mesh16, example2_mesh16):
    for mesh in (example1_mesh16, example2_mesh16):
        for e in mesh.interface_elements:
            cut = mesh.cuts[int(e)]
            assert sum(piece.area for piece in cut.pieces) == pytest.approx(cut.element.area, rel=1e-12)
            assert all(piece.area > 0 for piece in cut.pieces)


def test_straight_interface_pieces_carry_their_region(example1_mesh16):
    geom = example1.geometry()
    for e in example1_mesh16.interface_elements:
        for piece in example1_mesh16.cuts[int(e)].pieces:
            assert int(geom.region_of(*piece.centroid)) == piece.subdomain


def test_segment_sides_match_the_interface_orientation(example2_mesh16):
    geom = example2.geometry()
    for e in example2_mesh16.interface_elements:
        cut = example2_mesh16.cuts[int(e)]
        for seg in cut.segments:
            plus, minus = geom.interface_between[seg.interface - 1]
            assert cut.pieces[seg.plus_piece].subdomain == plus
            assert cut.pieces[seg.minus_piece].subdomain == minus
            assert np.hypot(*seg.normal) == pytest.approx(1.0)


def test_random_sector_elements_are_triple_junctions():
    rng = np.random.default_rng(3)
    for _ in range(50):
        cut = cut_element(random_sector_geometry(rng), UNIT)
        assert cut.kind == ElementClass.triple_junction
        assert sum(piece.area for piece in cut.pieces) == pytest.approx(1.0, rel=1e-12)


def test_triple_point_on_the_boundary_gives_two_interfaces():
    from tests.geometries import sector_geometry

    # rays from (0.5, 0) on the bottom edge
    geom = sector_geometry((0.5, 0.0), np.radians(-30), np.radians(60), np.radians(120))
    cut = cut_element(geom, UNIT)
    assert cut.kind == ElementClass.two_interface
    assert cut.triple_point is None
    assert len(cut.segments) == 2


def test_ray_level_set_gradient():
    phi = ray((0.0, 0.0), np.pi / 2)
    assert phi(1.0, 0.0) == pytest.approx(-1.0)
    assert phi.grad(0.3, 0.2) == pytest.approx((-1.0, 0.0))


def test_triple_point_of_separable_roots():
    geom = SubdomainGeometry(
        level_sets=(
            LevelSet(lambda x, y: np.asarray(x) - 0.1 + 0.0 * np.asarray(y), lambda x, y: (1.0, 0.0)),
            LevelSet(lambda x, y: np.asarray(y) - 0.2 + 0.0 * np.asarray(x), lambda x, y: (0.0, 1.0)),
            LevelSet(lambda x, y: np.asarray(x) - np.asarray(y) + 0.1, lambda x, y: (1.0, -1.0)),
        ),
        region_rule=lambda values: np.ones(np.shape(values[0]), dtype=int),
    )
    assert locate_triple_point(geom, UNIT) == pytest.approx((0.1, 0.2), abs=1e-12)


def test_interface_crossing_one_side_twice_is_regular():
    # the top of the circle enters and leaves through the bottom side
    cut = cut_element(example2.geometry(), Rectangle(-0.25, 0.45, 0.25, 0.55))
    assert cut.kind == ElementClass.regular
    assert cut.owning_subdomain == 3
    assert len(cut.pieces) == 1
    assert cut.pieces[0].subdomain == 3
    assert cut.pieces[0].area == pytest.approx(0.05)
