import math

import numpy as np
import pytest

from asymlab.barriers.barrier_profiles import annulus_profile, scherk_profile, singular_profile
from asymlab.barriers.profile import Endpoint, EndpointBehavior, Profile
from asymlab.errors import DegenerateGradient, DimensionMismatch, InvalidParams, StencilOutOfDomain
from asymlab.fields.field_synthesis import (BallRegion, DistanceKind, GeodesicBand, Model, boundary_trace,
                                            compose_field, convergence_order, divergence_residual,
                                            divergence_residuals, radial_approach, sample_points,
                                            supersolution_check, trace_slope)
from asymlab.geometry.hyperbolic_geometry import (Geodesic, Horosphere, IdealPoint, Point, busemann_coords,
                                                  dist_to_geodesic_coords, distance_coords)
from asymlab.operators.operator_family import make_operator


def _linear_profile(slope=1.0):
    grid = np.linspace(-6.0, 6.0, 49)
    return Profile(grid=grid, values=slope * grid, slopes=np.full(grid.size, slope), domain=(-6.0, 6.0),
                   endpoint_lo=EndpointBehavior(Endpoint.FINITE_LIMIT, -6.0 * slope),
                   endpoint_hi=EndpointBehavior(Endpoint.FINITE_LIMIT, 6.0 * slope), quad_tol=0.0, label="linear")


def _horosphere(n, c=1.0):
    e1 = np.zeros(n)
    e1[0] = 1.0
    return Horosphere(IdealPoint(e1), Point(np.zeros(n), c))


def _diameter(n):
    e1 = np.zeros(n)
    e1[0] = 1.0
    return Geodesic(IdealPoint(-e1), IdealPoint(e1))


@pytest.mark.parametrize("n,c", [(2, 1.0), (3, 1.0), (2, 2.0)])
def test_laplacian_of_busemann(laplacian, n, c):
    field = compose_field(_linear_profile(), DistanceKind.HOROSPHERICAL, _horosphere(n, c), Model(n, c))
    x = sample_points(Model(n, c), BallRegion(tuple(np.zeros(n)), 1.5), 50, seed=3)
    hs = np.array([2e-2, 1e-2, 5e-3])
    errors = [np.max(np.abs(divergence_residuals(field, laplacian, x, h) + (n - 1) * math.sqrt(c))) for h in hs]
    assert errors[-1] < 1e-3
    order, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    assert order >= 1.9


@pytest.fixture(scope="module")
def exact_field(laplacian):
    profile = singular_profile(laplacian, d_range=(-2.0, 4.0), n_nodes=4096)
    return compose_field(profile, DistanceKind.HOROSPHERICAL, _horosphere(2), Model())


def test_exact_solution_residual(exact_field, laplacian):
    x = sample_points(Model(), BallRegion((0.0, 0.0), 1.0), 20, seed=0)
    hs = np.array([2e-2, 1e-2, 5e-3])
    errors = [np.max(np.abs(divergence_residuals(exact_field, laplacian, x, h))) for h in hs]
    assert errors[-1] < 1e-3
    order, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    assert order >= 1.9


def test_exact_solution_convergence_order(exact_field, laplacian):
    x = sample_points(Model(), BallRegion((0.0, 0.0), 1.0), 5, seed=1)
    orders = [convergence_order(exact_field, laplacian, p, hs=(2e-2, 1e-2, 5e-3))[0] for p in x]
    assert np.median(orders) >= 1.9


def test_exact_solution_has_no_sign_violations(exact_field, laplacian):
    x = sample_points(Model(), BallRegion((0.0, 0.0), 1.0), 64, seed=2)
    report = supersolution_check(exact_field, laplacian, x, 1e-2)
    assert report.passed
    assert report.metadata["count"] == 64


def test_scherk_field_is_a_supersolution_in_h2(minimal_graph):
    profile = scherk_profile(minimal_graph, 0.0, n_nodes=1024)
    field = compose_field(profile, DistanceKind.TO_GEODESIC, _diameter(2))
    band = GeodesicBand(_diameter(2), (0.2, 2.0), 1.5, IdealPoint((0.0, 1.0)))
    samples = sample_points(Model(), band, 200, seed=0)
    for h in (1e-2, 5e-3, 2.5e-3):
        assert supersolution_check(field, minimal_graph, samples, h).sign_violations == 0


def test_scherk_along_a_geodesic_of_h3_is_strict(minimal_graph):
    profile = scherk_profile(minimal_graph, 0.0, n=3, n_nodes=1024)
    field = compose_field(profile, DistanceKind.TO_GEODESIC, _diameter(3), Model(3))
    band = GeodesicBand(_diameter(3), (0.3, 1.5), 1.0, IdealPoint((0.0, 1.0, 0.0)))
    samples = sample_points(Model(3), band, 64, seed=0)
    report = supersolution_check(field, minimal_graph, samples, 1e-2)
    assert report.passed
    assert np.all(report.residuals < 0)
    negated = supersolution_check(-field, minimal_graph, samples, 1e-2)
    assert negated.sign_violations == 64


@pytest.mark.parametrize("n", [2, 3])
def test_annulus_field_is_a_supersolution(minimal_graph, n):
    profile, barrier = annulus_profile(minimal_graph, 0.0, n=n, rho=1.0, K=2.0)
    center = Point(np.zeros(n))
    field = compose_field(profile, DistanceKind.TO_POINT, center, Model(n))
    samples = sample_points(Model(n), BallRegion(tuple(np.zeros(n)), 2.8, inner=1.2), 64, seed=4)
    report = supersolution_check(field, minimal_graph, samples, 5e-3)
    assert report.passed
    assert report.metadata["field"] == profile.label
    values = field(samples)
    assert np.all((values > barrier.delta) & (values < barrier.h0))


def test_exactly_flat_gradient_has_zero_flux():
    spec = make_operator("pLaplacian", {"p": 1.5})
    field = compose_field(Profile.constant(2.0), DistanceKind.TO_POINT, Point((0.0, 0.0)))
    assert divergence_residual(field, spec, Point((0.3, 0.1)), 1e-2) == 0.0


def test_tiny_gradient_needs_a_finite_ratio_at_zero():
    field = compose_field(_linear_profile(1e-12), DistanceKind.HOROSPHERICAL, _horosphere(2))
    with pytest.raises(DegenerateGradient):
        divergence_residual(field, make_operator("pLaplacian", {"p": 1.5}), (0.2, 0.1), 1e-2)
    value = divergence_residual(field, make_operator("pLaplacian", {"p": 3}), (0.2, 0.1), 1e-2)
    assert math.isfinite(value)


def test_stencil_must_stay_in_the_ball(laplacian):
    field = compose_field(_linear_profile(), DistanceKind.HOROSPHERICAL, _horosphere(2))
    with pytest.raises(StencilOutOfDomain):
        divergence_residual(field, laplacian, (0.995, 0.0), 1e-2)


def test_stencil_must_stay_on_the_profile(laplacian):
    grid = np.linspace(-1.0, 1.0, 9)
    short = Profile(grid=grid, values=grid, slopes=np.ones(9), domain=(-1.0, 1.0),
                    endpoint_lo=EndpointBehavior(Endpoint.FINITE_LIMIT, -1.0),
                    endpoint_hi=EndpointBehavior(Endpoint.FINITE_LIMIT, 1.0), quad_tol=0.0)
    field = compose_field(short, DistanceKind.HOROSPHERICAL, _horosphere(2))
    with pytest.raises(StencilOutOfDomain):
        divergence_residual(field, laplacian, (0.7, 0.0), 1e-2)


def test_compose_field_checks_the_target():
    profile = Profile.constant(1.0)
    with pytest.raises(InvalidParams):
        compose_field(profile, DistanceKind.TO_POINT, _diameter(2))
    with pytest.raises(DimensionMismatch):
        compose_field(profile, "toPoint", Point((0.0, 0.0)), Model(3))
    with pytest.raises(DimensionMismatch):
        compose_field(profile, "toPoint", Point((0.0, 0.0), 2.0), Model(2, 1.0))
    with pytest.raises(InvalidParams):
        Model(1)


def test_negated_field(minimal_graph):
    field = compose_field(scherk_profile(minimal_graph, 0.5), DistanceKind.TO_GEODESIC, _diameter(2))
    x = Point((0.0, 0.4))
    assert (-field)(x) == -field(x)
    assert field(x) > 0.5


@pytest.mark.parametrize("n", [2, 3])
def test_ball_samples(n):
    center = np.zeros(n)
    center[0] = 0.3
    region = BallRegion(tuple(center), 1.2, inner=0.4)
    x = sample_points(Model(n), region, 100, seed=11)
    assert x.shape == (100, n)
    d = distance_coords(x, center)
    assert np.all(d <= 1.2 + 1e-9)
    assert np.all(d >= 0.4 - 1e-9)
    np.testing.assert_array_equal(x, sample_points(Model(n), region, 100, seed=11))


@pytest.mark.parametrize("n", [2, 3])
def test_band_samples(n):
    gamma = Geodesic(IdealPoint(np.eye(n)[0]), IdealPoint(np.eye(n)[1]))
    side = IdealPoint(-np.ones(n) / math.sqrt(n))
    x = sample_points(Model(n), GeodesicBand(gamma, (0.5, 1.5), 1.0, side), 64, seed=5)
    d = dist_to_geodesic_coords(x, gamma)
    assert np.all(d >= 0.5 - 1e-9)
    assert np.all(d <= 1.5 + 1e-9)


def test_sample_count_must_be_positive():
    with pytest.raises(InvalidParams):
        sample_points(Model(), BallRegion((0.0, 0.0), 1.0), 0)


def test_boundary_trace_reaches_the_scherk_limit(minimal_graph):
    field = compose_field(scherk_profile(minimal_graph, 0.3), DistanceKind.TO_GEODESIC, _diameter(2))
    table = boundary_trace(field, IdealPoint((0.0, 1.0)), radial_approach(IdealPoint((0.0, 1.0))))
    distances = [d for d, _ in table]
    assert distances == sorted(distances, reverse=True)
    assert table[-1][1] == pytest.approx(0.3, abs=1e-3)


def test_boundary_trace_blows_up_at_the_horosphere_centre(exact_field):
    xi = IdealPoint((1.0, 0.0))
    table = boundary_trace(exact_field, xi, radial_approach(xi, count=4))
    values = [v for _, v in table]
    assert values == sorted(values)
    assert values[-1] == pytest.approx(math.exp(busemann_coords(np.array([1 - 2.0 ** -4, 0.0]), _horosphere(2))),
                                       rel=1e-8)


def test_trace_slope():
    table = [(math.exp(-k), 2.0 * k + 1.0) for k in range(1, 9)]
    assert trace_slope(table) == pytest.approx(2.0)


def test_residual_report_export(exact_field, laplacian, tmp_path):
    x = sample_points(Model(), BallRegion((0.0, 0.0), 1.0), 8, seed=0)
    report = supersolution_check(exact_field, laplacian, x, 1e-2, allowance=0.0)
    assert report.allowance == 0.0
    report.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "x0,x1,residual"
    assert len(lines) == 9
    assert report.to_dict()["sign_violations"] == report.sign_violations
