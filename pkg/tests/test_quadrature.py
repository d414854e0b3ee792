import math

import pytest

from asymlab.barriers.quadrature import SingularEnd, gauss_kronrod, improper_quadrature
from asymlab.errors import InvalidParams


def test_gauss_kronrod_endpoint_singularity():
    value, error = gauss_kronrod(lambda t: t ** -0.5, 0.0, 1.0, 1e-12)
    assert value == pytest.approx(2.0, abs=1e-10)
    assert error < 1e-8


def test_convergent_power_singularity():
    outcome = improper_quadrature(lambda t: t ** -0.5, (0.0, 1.0), SingularEnd.LO, tol=1e-10)
    assert not outcome.divergent
    assert outcome.value == pytest.approx(2.0, abs=1e-8)
    assert outcome.exponent == pytest.approx(0.5, abs=1e-6)


def test_divergent_power_singularity():
    outcome = improper_quadrature(lambda t: 1.0 / (1.0 - t), (0.0, 1.0), SingularEnd.HI, tol=1e-10)
    assert outcome.divergent
    assert outcome.value is None
    assert outcome.exponent == pytest.approx(1.0, abs=0.05)
    assert len(outcome.partial_integrals) > 0


def test_convergent_infinite_end():
    outcome = improper_quadrature(lambda t: t ** -2.0, (1.0, math.inf), SingularEnd.HI, tol=1e-10)
    assert not outcome.divergent
    assert outcome.value == pytest.approx(1.0, abs=1e-6)


def test_divergent_infinite_end():
    outcome = improper_quadrature(lambda t: 1.0 / t, (1.0, math.inf), SingularEnd.HI, tol=1e-10)
    assert outcome.divergent


def test_regular_interval():
    outcome = improper_quadrature(math.cos, (0.0, math.pi / 2), tol=1e-12)
    assert outcome.value == pytest.approx(1.0, abs=1e-12)


def test_empty_interval():
    with pytest.raises(InvalidParams):
        improper_quadrature(math.cos, (1.0, 1.0))
