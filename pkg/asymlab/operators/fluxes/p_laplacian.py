import math

import numpy as np

from asymlab.errors import InvalidParams
from asymlab.operators.flux import Flux

# Lower-bound constant D = 1 - eps: A(s) = s^(p-1) meets D s^q with equality otherwise.
LOWER_BOUND_SLACK = 1e-12


class PLaplacianFlux(Flux):
    """`A(s) = s^(p-1)`, p > 1. Unbounded, so every p-Laplacian is singular type."""

    def __init__(self, flux_conf):
        try:
            p = float(flux_conf["p"])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidParams(f"pLaplacian needs a numeric exponent p > 1: {e}")
        if not p > 1:
            raise InvalidParams(f"p must exceed 1 (got p = {p})")
        self.p = p
        self._name = f"pLaplacian(p={p:g})"

    def a(self, s):
        return np.power(s, self.p - 1.0)

    def a_prime(self, s):
        return (self.p - 1.0) * np.power(s, self.p - 2.0)

    @property
    def constants(self):
        return {
            "growth_C": 1.0,
            "growth_p": self.p,
            "lower_q": self.p - 1.0,
            "lower_delta0": 1.0,
            "lower_Dbar": 1.0 - LOWER_BOUND_SLACK,
        }

    @property
    def sup(self):
        return math.inf

    @property
    def ratio_at_zero(self):
        if self.p > 2:
            return 0.0
        if self.p == 2:
            return 1.0
        return None

    def params(self):
        return {"p": self.p}
