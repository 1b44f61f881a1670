import numpy as np
import pytest
from hypothesis import given, strategies as st

from transdiff import ContractViolation, GeometryError, Hyperplane, LevelSetInterface, Region, Sphere, ellipse
from transdiff.geometry import geometry_from_config


@pytest.fixture
def circle():
    return Sphere([0.0, 0.0], 1.0, "interior")


def generic_circle(radius=1.0):
    return LevelSetInterface(
        lambda x: radius**2 - np.sum(x**2, axis=1),
        lambda x: -2.0 * x,
        dim=2,
        bounding_radius=radius,
    )


# frozen expected values -------------------------------------------------------


def test_circle_signed_distance_values(circle):
    assert circle.signed_distance([2.0, 0.0]) == -1.0
    assert circle.signed_distance([0.0, 0.0]) == 1.0


def test_hyperplane_signed_distance_ignores_tangential_coordinate():
    plane = Hyperplane([1.0, 0.0], 0.0)
    assert plane.signed_distance([-0.3, 7.0]) == pytest.approx(-0.3, abs=1e-15)


def test_circle_normal_points_inward(circle):
    np.testing.assert_allclose(circle.normal_at([1.0, 0.0], 1e-9), [-1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(circle.normal_at([0.0, 1.001], 0.01), [0.0, -1.0], atol=1e-9)


def test_hyperplane_normal_is_constant():
    plane = Hyperplane([1.0, 0.0, 0.0], 0.0)
    for y in ([0.0, 3.0, -2.0], [0.0, -1.0, 5.0]):
        np.testing.assert_array_equal(plane.normal_at(y, 1e-12), [1.0, 0.0, 0.0])


def test_normal_far_from_interface_is_rejected(circle):
    with pytest.raises(ContractViolation, match="distance"):
        circle.normal_at([3.0, 0.0], 0.1)


def test_classify_regions(circle):
    assert circle.classify([0.0, 0.0], 0.1) is Region.PLUS_BULK
    assert circle.classify([1.05, 0.0], 0.1) is Region.LAYER
    assert circle.classify([3.0, 0.0], 0.1) is Region.MINUS_BULK
    out = circle.classify(np.array([[0.0, 0.0], [1.05, 0.0], [3.0, 0.0]]), 0.1)
    np.testing.assert_array_equal(out, [1, 0, -1])


def test_exterior_plus_flips_sign():
    outer = Sphere([0.0, 0.0], 1.0, "exterior")
    assert outer.signed_distance([2.0, 0.0]) == 1.0
    np.testing.assert_allclose(outer.normal_at([1.0, 0.0], 1e-9), [1.0, 0.0])


def test_levelset_positive_at_center_for_interior_plus(circle):
    assert circle.levelset([0.0, 0.0]) > 0


# generic kind --------------------------------------------------------------


def test_generic_circle_matches_closed_form(circle, rng):
    gen = generic_circle()
    pts = rng.uniform(-2.0, 2.0, size=(200, 2))
    pts = pts[np.linalg.norm(pts, axis=1) > 0.2]
    np.testing.assert_allclose(gen.signed_distance(pts), circle.signed_distance(pts), atol=1e-9)
    near = pts / np.linalg.norm(pts, axis=1)[:, None] * 1.01
    np.testing.assert_allclose(gen.normal_at(near, 0.05), circle.normal_at(near, 0.05), atol=1e-9)


def test_generic_projection_idempotent(rng):
    geom = ellipse([2.0, 1.0])
    pts = rng.uniform(-3.0, 3.0, size=(100, 2))
    foot = geom.project(pts)
    again = geom.project(foot)
    assert np.max(np.linalg.norm(again - foot, axis=1)) < 1e-12 * geom.bounding_radius * 10


def test_ellipse_normal_points_into_plus(rng):
    geom = ellipse([2.0, 1.0])
    theta = rng.uniform(0, 2 * np.pi, 50)
    on = np.column_stack([2.0 * np.cos(theta), np.sin(theta)])
    nu = geom.normal_at(on, 1e-8)
    np.testing.assert_allclose(np.linalg.norm(nu, axis=1), 1.0, atol=1e-12)
    assert np.all(geom.levelset(on + 1e-4 * nu) > 0)


def test_generic_projection_failure_reports_point():
    # a level set with a vanishing gradient everywhere cannot be projected onto
    geom = LevelSetInterface(lambda x: np.ones(len(x)), lambda x: np.zeros_like(x), dim=2,
                             bounding_radius=1.0)
    with pytest.raises(GeometryError) as info:
        geom.signed_distance([0.5, 0.5])
    assert info.value.point is not None


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_signed_distance_is_1_lipschitz(v):
    x, y = np.array(v[:2]), np.array(v[2:])
    for geom in (Sphere([0.0, 0.0], 1.0), Hyperplane([0.6, 0.8], 0.3)):
        assert abs(geom.signed_distance(x) - geom.signed_distance(y)) <= np.linalg.norm(x - y) + 1e-12


def test_dimension_mismatch_rejected(circle):
    with pytest.raises(ContractViolation):
        circle.signed_distance([1.0, 2.0, 3.0])


def test_geometry_from_config():
    g = geometry_from_config({"kind": "sphere", "center": [0, 0], "radius": 2.0})
    assert isinstance(g, Sphere) and g.radius == 2.0
    h = geometry_from_config({"kind": "hyperplane", "normal": [0.0, 2.0], "offset": 1.0})
    assert h.signed_distance([5.0, 1.0]) == pytest.approx(0.0)


def test_ellipse_distance_near_medial_axis():
    geom = ellipse([2.0, 1.0])
    rng = np.random.default_rng(4)
    pts = np.column_stack([rng.uniform(-1.6, 1.6, 400), rng.uniform(-0.01, 0.01, 400)])
    theta = np.linspace(0.0, 2 * np.pi, 100001)
    curve = np.column_stack([2.0 * np.cos(theta), np.sin(theta)])
    d = geom.signed_distance(pts)
    true = np.array([np.min(np.linalg.norm(curve - p, axis=1)) for p in pts])
    # any surface point bounds the distance from above; the sign is exact
    assert np.all(d > 0)
    assert np.all(d >= true - 1e-6)


def test_ellipse_distance_exact_within_reach(rng):
    geom = ellipse([2.0, 1.0])
    theta = rng.uniform(0, 2 * np.pi, 200)
    on = np.column_stack([2.0 * np.cos(theta), np.sin(theta)])
    nu = geom.normal_at(on, 1e-8)
    offset = rng.uniform(-0.3, 0.3, 200)
    d = geom.signed_distance(on + offset[:, None] * nu)
    np.testing.assert_allclose(d, offset, atol=1e-10)
