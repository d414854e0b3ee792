import math

import numpy as np
import pytest

from asymlab.errors import DimensionMismatch, InvalidIdealPoint, InvalidParams, NonpositiveRadius
from asymlab.geometry.hyperbolic_geometry import (Geodesic, Horosphere, IdealPoint, Point,
                                                  TotallyGeodesicHyperplane, apply_isometry, apply_isometry_coords,
                                                  apply_to_geodesic, apply_to_horosphere, busemann,
                                                  dist_to_geodesic, dist_to_hyperplane, distance_coords,
                                                  from_geodesic_polar, geodesic_polar, hyp_distance, identity,
                                                  laplacian_distance, mobius_fix_ideal, parabolic_fix_ideal,
                                                  random_isometry, rotation, translation_to)


def _random_point(rng, n, c=1.0, radius=0.7):
    v = rng.standard_normal(n)
    return Point(radius * rng.uniform() ** (1.0 / n) * v / np.linalg.norm(v), c)


def _random_ideal(rng, n):
    v = rng.standard_normal(n)
    return IdealPoint(v / np.linalg.norm(v))


@pytest.mark.parametrize("c,expected", [(1.0, math.log(3.0)), (4.0, 0.5 * math.log(3.0))])
def test_distance_from_origin(c, expected):
    assert hyp_distance(Point((0.0, 0.0), c), Point((0.5, 0.0), c)) == pytest.approx(expected, rel=1e-14)


def test_distance_needs_matching_models():
    with pytest.raises(DimensionMismatch):
        hyp_distance(Point((0.1, 0.0)), Point((0.1, 0.0, 0.0)))
    with pytest.raises(DimensionMismatch):
        hyp_distance(Point((0.1, 0.0), 1.0), Point((0.1, 0.0), 2.0))


def test_point_must_lie_in_the_ball():
    with pytest.raises(InvalidParams):
        Point((0.8, 0.6))
    with pytest.raises(DimensionMismatch):
        Point((0.5,))


def test_ideal_point_normalization():
    xi = IdealPoint((1.0 + 1e-12, 0.0))
    assert np.linalg.norm(xi.coords) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(InvalidIdealPoint):
        IdealPoint((2.0, 0.0))


def test_distance_to_geodesic():
    gamma = Geodesic(IdealPoint((1.0, 0.0)), IdealPoint((0.0, 1.0)))
    assert dist_to_geodesic(Point((0.0, 0.0)), gamma) == pytest.approx(math.asinh(1.0), rel=1e-13)
    diameter = Geodesic(IdealPoint((-1.0, 0.0)), IdealPoint((1.0, 0.0)))
    assert dist_to_geodesic(Point((0.3, 0.0)), diameter) == pytest.approx(0.0, abs=1e-15)
    assert dist_to_geodesic(Point((0.0, 0.5)), diameter) == pytest.approx(math.log(3.0), rel=1e-13)


def test_distance_to_hyperplane():
    plane = TotallyGeodesicHyperplane(IdealPoint((1.0, 0.0, 0.0)))
    assert dist_to_hyperplane(Point((0.5, 0.0, 0.0)), plane) == pytest.approx(math.log(3.0), rel=1e-13)
    assert dist_to_hyperplane(Point((-0.5, 0.0, 0.0)), plane) == pytest.approx(math.log(3.0), rel=1e-13)
    shifted = TotallyGeodesicHyperplane(IdealPoint((1.0, 0.0, 0.0)), offset=math.log(3.0))
    assert dist_to_hyperplane(Point((0.5, 0.0, 0.0)), shifted) == pytest.approx(0.0, abs=1e-13)


def test_busemann_along_the_diameter():
    h = Horosphere(IdealPoint((1.0, 0.0)), Point((0.0, 0.0)))
    for t in (-0.5, 0.0, 0.3, 0.9):
        assert busemann(Point((t, 0.0)), h) == pytest.approx(2.0 * math.atanh(t), abs=1e-13)


def test_translation_shifts_busemann():
    xi = IdealPoint((0.0, 1.0))
    h = Horosphere(xi, Point((0.0, 0.0)))
    T = mobius_fix_ideal(xi, 1.7)
    moved = apply_isometry(T, Point((0.2, -0.1)))
    assert busemann(moved, h) == pytest.approx(busemann(Point((0.2, -0.1)), h) + 1.7, abs=1e-12)


def test_parabolic_preserves_its_horospheres():
    xi = IdealPoint((1.0, 0.0))
    h = Horosphere(xi, Point((0.0, 0.0)))
    T = parabolic_fix_ideal(xi, (0.0, 0.8))
    x = Point((0.1, 0.4))
    assert busemann(apply_isometry(T, x), h) == pytest.approx(busemann(x, h), abs=1e-12)


def test_translation_and_inverse():
    T = translation_to((0.3, -0.2))
    assert apply_isometry(T, Point((0.0, 0.0))).x == pytest.approx((0.3, -0.2), abs=1e-15)
    x = Point((0.4, 0.1))
    back = apply_isometry(T.inverse(), apply_isometry(T, x))
    np.testing.assert_allclose(back.coords, x.coords, atol=1e-14)
    np.testing.assert_allclose(apply_isometry(identity(2), x).coords, x.coords)


def test_rotation_about_the_origin():
    R = rotation(np.array([[0.0, -1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(apply_isometry(R, Point((0.5, 0.0))).coords, (0.0, 0.5), atol=1e-15)
    x, y = Point((0.2, 0.3)), Point((-0.4, 0.1))
    assert hyp_distance(apply_isometry(R, x), apply_isometry(R, y)) == pytest.approx(hyp_distance(x, y), rel=1e-12)
    with pytest.raises(InvalidParams):
        rotation(np.array([[1.0, 0.5], [0.0, 1.0]]))


@pytest.mark.parametrize("n,c", [(2, 1.0), (3, 1.0), (3, 2.5)])
def test_isometry_invariance(n, c):
    rng = np.random.default_rng(1234 + n)
    for _ in range(1000):
        T = random_isometry(n, c, rng, max_translation=1.5)
        x, y = _random_point(rng, n, c), _random_point(rng, n, c)
        xi = _random_ideal(rng, n)
        gamma = Geodesic(xi, _random_ideal(rng, n))
        h = Horosphere(xi, _random_point(rng, n, c))
        tx, ty = apply_isometry(T, x), apply_isometry(T, y)
        assert hyp_distance(tx, ty) == pytest.approx(hyp_distance(x, y), rel=1e-9, abs=1e-9)
        assert busemann(tx, apply_to_horosphere(T, h)) == pytest.approx(busemann(x, h), rel=1e-9, abs=1e-9)
        assert (dist_to_geodesic(tx, apply_to_geodesic(T, gamma))
                == pytest.approx(dist_to_geodesic(x, gamma), rel=1e-9, abs=1e-9))


@pytest.mark.parametrize("n,c", [(2, 1.0), (3, 2.0)])
def test_translations_along_a_diameter_add_up(n, c):
    rng = np.random.default_rng(77 + n)
    xi = _random_ideal(rng, n)
    x = np.array([_random_point(rng, n, c).coords for _ in range(50)])
    for s1, s2 in [(0.4, 1.1), (-2.0, 0.7), (1.5, -1.5)]:
        composed = mobius_fix_ideal(xi, s1, c).then(mobius_fix_ideal(xi, s2, c))
        np.testing.assert_allclose(apply_isometry_coords(composed, x),
                                   apply_isometry_coords(mobius_fix_ideal(xi, s1 + s2, c), x), atol=1e-12)


@pytest.mark.parametrize("n,c", [(2, 1.0), (3, 0.5)])
def test_triangle_inequality(n, c):
    rng = np.random.default_rng(5 + n)
    x, y, z = (np.array([_random_point(rng, n, c, radius=0.95).coords for _ in range(500)]) for _ in range(3))
    xz = distance_coords(x, z, c)
    assert np.all(xz <= distance_coords(x, y, c) + distance_coords(y, z, c) + 1e-12 * (1.0 + xz))
    np.testing.assert_allclose(distance_coords(x, y, c), distance_coords(y, x, c), rtol=1e-14)
    np.testing.assert_array_equal(distance_coords(x, x, c), 0.0)


def test_laplacian_distance_modes():
    assert laplacian_distance(1.0, 1.0, 2, "sphere") == pytest.approx(1.0 / math.tanh(1.0))
    assert laplacian_distance(0.5, 4.0, 3, "horosphere") == -4.0
    assert laplacian_distance(1.0, 1.0, 3, "hyperplane") == pytest.approx(2.0 * math.tanh(1.0))
    with pytest.raises(NonpositiveRadius):
        laplacian_distance(0.0, 1.0, 2, "sphere")
    with pytest.raises(InvalidParams):
        laplacian_distance(1.0, 1.0, 2, "cylinder")


def test_geodesic_polar_coordinates():
    x = from_geodesic_polar(1.3, 0.4, c=2.0)
    r, theta = geodesic_polar(x, c=2.0)
    assert r == pytest.approx(1.3, rel=1e-13)
    assert theta == pytest.approx(0.4, rel=1e-13)
    assert hyp_distance(Point((0.0, 0.0), 2.0), Point(x, 2.0)) == pytest.approx(1.3, rel=1e-13)
