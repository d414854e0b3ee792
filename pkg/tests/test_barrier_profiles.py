import math

import numpy as np
import pytest

from asymlab.barriers.barrier_profiles import (annulus_profile, cell_integrals, fd_weights, ode_residual,
                                               scherk_profile, shifted_annulus_field, singular_profile)
from asymlab.barriers.profile import Endpoint, EndpointBehavior, Profile
from asymlab.errors import (BoundedOperator, DomainExceeded, InvalidParams, NoAlpha, NotRemovableType,
                            TooFewNodes)
from asymlab.operators.operator_family import make_operator


@pytest.fixture(scope="module")
def scherk(minimal_graph):
    return scherk_profile(minimal_graph, 0.0, n_nodes=1024)


@pytest.mark.parametrize("d", [0.01, 0.1, 1.0, 5.0])
def test_scherk_closed_form(scherk, d):
    assert scherk(d) == pytest.approx(math.log(1.0 / math.tanh(0.5 * d)), abs=1e-8)


def test_scherk_value_at_one(scherk):
    assert scherk(1.0) == pytest.approx(0.77194, abs=1e-5)


def test_scherk_blow_up_signature(scherk):
    d = 5e-3
    assert scherk(d) - scherk(2 * d) == pytest.approx(math.log(2.0), rel=1e-2)


def test_scherk_endpoints(scherk):
    assert scherk.direction == -1
    assert scherk.endpoint_lo.kind is Endpoint.BLOW_UP
    assert scherk.endpoint_hi == EndpointBehavior(Endpoint.FINITE_LIMIT, 0.0)
    assert scherk.values[-1] == 0.0
    assert scherk(1e3) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(DomainExceeded):
        scherk(1e-6)


def test_scherk_ode(scherk, minimal_graph):
    assert ode_residual(scherk, minimal_graph) <= 1e-6


def test_scherk_delta_shift(minimal_graph):
    shifted = scherk_profile(minimal_graph, 0.7)
    assert shifted(2.0) == pytest.approx(0.7 + math.log(1.0 / math.tanh(1.0)), abs=1e-6)


def test_scherk_hyperplane_in_h3(minimal_graph):
    profile = scherk_profile(minimal_graph, 0.0, n=3, kind="hyperplane", n_nodes=1024)
    assert np.all(np.diff(profile.values) < 0)
    assert profile.metadata["laplacian"] == {"mode": "hyperplane", "n": 3, "c": 1.0}
    assert ode_residual(profile, minimal_graph) <= 1e-5


def test_scherk_needs_a_bounded_flux(laplacian):
    with pytest.raises(NotRemovableType):
        scherk_profile(laplacian, 0.0)


def test_scherk_of_singular_type_stays_bounded():
    spec = make_operator("custom", {"formula": "quartic_saturation"})
    profile = scherk_profile(spec, 0.0)
    assert profile.endpoint_lo.kind is Endpoint.FINITE_LIMIT
    assert not profile.metadata["removable"]


@pytest.mark.parametrize("p,n", [(2, 2), (3, 2), (1.5, 2), (2, 3)])
def test_singular_closed_form(p, n):
    spec = make_operator("pLaplacian", {"p": p})
    profile = singular_profile(spec, n=n, d_range=(-10.0, 3.0), n_nodes=4096)
    d = np.linspace(-10.0, 3.0, 53)
    exact = (p - 1.0) / (n - 1.0) * np.exp((n - 1.0) * d / (p - 1.0))
    np.testing.assert_allclose(profile(d), exact, rtol=1e-8, atol=1e-8)


@pytest.mark.parametrize("p,n", [(2, 2), (3, 3)])
def test_singular_ode(p, n):
    spec = make_operator("pLaplacian", {"p": p})
    profile = singular_profile(spec, n=n, d_range=(-10.0, 3.0), n_nodes=2048)
    assert ode_residual(profile, spec) <= 1e-6


def test_singular_continuation_below_the_grid(laplacian):
    profile = singular_profile(laplacian, d_range=(-4.0, 4.0))
    assert profile(-12.0) == pytest.approx(math.exp(-12.0), rel=1e-6)
    assert profile.endpoint_hi.kind is Endpoint.BLOW_UP
    with pytest.raises(DomainExceeded):
        profile(5.0)


def test_singular_needs_an_unbounded_flux(minimal_graph):
    with pytest.raises(BoundedOperator):
        singular_profile(minimal_graph)


@pytest.mark.parametrize("operator", ["minimalGraph", "pLaplacian"])
def test_annulus_chain(operator):
    spec = make_operator(operator, {"p": 2} if operator == "pLaplacian" else None)
    rng = np.random.default_rng(7)
    for _ in range(20):
        delta = rng.uniform(-1.0, 1.0)
        K = delta + rng.uniform(0.5, 4.0)
        _, barrier = annulus_profile(spec, delta, b=rng.uniform(0.5, 2.0), rho=rng.uniform(0.5, 2.0), K=K)
        assert barrier.delta < barrier.h1 < barrier.h0 < barrier.K / 2 + barrier.delta / 2
        assert 0.0 < barrier.alpha <= 1.0


@pytest.mark.parametrize("operator", ["minimalGraph", "pLaplacian"])
@pytest.mark.parametrize("n", [3, 4])
def test_annulus_in_higher_dimensions(operator, n):
    spec = make_operator(operator, {"p": 2} if operator == "pLaplacian" else None)
    delta, K = 0.0, 0.3
    profile, barrier = annulus_profile(spec, delta, n=n, b=2.0, K=K, n_nodes=1025)
    assert barrier.n == n and barrier.b == 1.0
    assert barrier.delta < barrier.h1 < barrier.h0 < barrier.K / 2 + barrier.delta / 2
    assert 0.0 < barrier.alpha < 1.0
    ceiling = delta + 0.9 * (K - delta) / 2.0
    assert barrier.h0 == pytest.approx(ceiling, abs=1e-8)
    assert barrier.h0 <= ceiling + 1e-9
    assert ode_residual(profile, spec) <= 1e-6


def test_annulus_takes_the_full_alpha_when_there_is_room(laplacian):
    _, barrier = annulus_profile(laplacian, 0.0, n=3, K=1.0)
    assert barrier.alpha == 1.0
    assert barrier.h0 == pytest.approx((math.cosh(1.0) / math.sinh(1.0) - math.cosh(3.0) / math.sinh(3.0))
                                       * math.sinh(1.0) ** 2, abs=1e-9)


def test_annulus_closed_form_for_the_laplacian(laplacian):
    b, delta = 1.3, 0.2
    profile, barrier = annulus_profile(laplacian, delta, b=b, rho=1.0, K=3.0)
    r = profile.grid
    exact = delta + math.sinh(b * barrier.alpha) / b * (np.log(np.tanh(0.5 * b * r)) - math.log(math.tanh(0.5 * b)))
    np.testing.assert_allclose(profile.values, exact, rtol=0, atol=1e-8)
    assert profile.values[-1] == barrier.h0


def test_annulus_ode(laplacian):
    profile, _ = annulus_profile(laplacian, 0.0, K=4.0, n_nodes=1025)
    assert ode_residual(profile, laplacian) <= 1e-6


def test_annulus_without_room_has_no_alpha(laplacian):
    with pytest.raises(NoAlpha):
        annulus_profile(laplacian, 0.0, K=1e-10)


def test_annulus_needs_k_above_delta(laplacian):
    with pytest.raises(InvalidParams):
        annulus_profile(laplacian, 1.0, K=0.5)


def test_shifted_annulus_field(laplacian):
    profile, barrier = annulus_profile(laplacian, 0.0, K=4.0)
    epsilon = barrier.h0 - barrier.h1 - (barrier.K - barrier.delta) / 4.0
    shifted, nu = shifted_annulus_field(profile, barrier, epsilon)
    assert nu == pytest.approx((barrier.K - barrier.delta) / 4.0)
    assert shifted.values[-1] == pytest.approx(barrier.K + epsilon)
    assert shifted.endpoint_hi.value == pytest.approx(barrier.K + epsilon)
    with pytest.raises(InvalidParams):
        shifted_annulus_field(profile, barrier, barrier.h0 - barrier.h1)


def test_cell_integrals_match_the_antiderivative():
    grid = np.linspace(0.0, math.pi, 33)
    cells = cell_integrals(np.sin, grid, 1e-12)
    np.testing.assert_allclose(np.cumsum(cells), 1.0 - np.cos(grid[1:]), atol=1e-12)


def test_fd_weights_second_derivative():
    x = np.array([[-2.0, -1.0, 0.0, 1.0, 2.0]])
    np.testing.assert_allclose(fd_weights(np.array([0.0]), x, 2)[0],
                               [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12], atol=1e-14)


def test_ode_residual_needs_five_nodes(laplacian):
    with pytest.raises(TooFewNodes):
        ode_residual(Profile.constant(1.0, n_nodes=4), laplacian)


def test_profile_rejects_non_monotone_values():
    with pytest.raises(InvalidParams):
        Profile(grid=[0.0, 1.0, 2.0], values=[0.0, 1.0, 0.5], slopes=[1.0, 0.0, -1.0], domain=(0.0, 2.0),
                endpoint_lo=EndpointBehavior(Endpoint.FINITE_LIMIT, 0.0),
                endpoint_hi=EndpointBehavior(Endpoint.FINITE_LIMIT, 0.5), quad_tol=0.0)


def test_profile_export(scherk, tmp_path):
    scherk.to_json(tmp_path / "scherk.json")
    loaded = Profile.from_json(tmp_path / "scherk.json")
    np.testing.assert_array_equal(loaded.values, scherk.values)
    assert loaded.endpoint_lo == scherk.endpoint_lo
    assert loaded(1.0) == scherk(1.0)

    scherk.to_csv(tmp_path / "scherk.csv")
    lines = (tmp_path / "scherk.csv").read_text().splitlines()
    assert lines[0] == "r,value"
    assert len(lines) == scherk.size + 1


def test_constant_profile():
    profile = Profile.constant(2.5)
    assert profile(-100.0) == 2.5
    assert profile(0.3) == 2.5
    assert profile.direction == 0
