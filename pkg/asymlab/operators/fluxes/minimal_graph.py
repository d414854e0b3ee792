import math

import numpy as np

from asymlab.operators.flux import Flux


class MinimalGraphFlux(Flux):
    """`A(s) = s / sqrt(1 + s^2)`; graphs of solutions are minimal surfaces in M x R."""

    def __init__(self, flux_conf=None):
        self._name = "minimalGraph"

    def a(self, s):
        return s / np.sqrt(1.0 + np.square(s))

    def a_prime(self, s):
        return np.power(1.0 + np.square(s), -1.5)

    @property
    def constants(self):
        return {
            "growth_C": 1.0,
            "growth_p": 2.0,
            "lower_q": 1.0,
            "lower_delta0": 1.0,
            "lower_Dbar": 1.0 / math.sqrt(2.0),
        }

    @property
    def sup(self):
        return 1.0

    @property
    def ratio_at_zero(self):
        return 1.0
