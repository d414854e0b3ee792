"""
Bounded fluxes of the named custom formula table.

Each formula takes a positive `scale` K. Whether the integral condition holds
depends only on how `A^-1(t)` blows up as t -> sup A:

    saturating_rational   A^-1(t) ~ (K - t)^-1      divergent, removable type
    arctan                A^-1(t) ~ (Kpi/2 - t)^-1  divergent, removable type
    quartic_saturation    A^-1(t) ~ (K - t)^-1/4    convergent, singular type
"""
import math

import numpy as np

from asymlab.errors import InvalidParams
from asymlab.operators.flux import Flux


class _ScaledFormula(Flux):
    formula = None

    def __init__(self, flux_conf):
        try:
            scale = float(flux_conf.get("scale", 1.0))
        except (TypeError, ValueError) as e:
            raise InvalidParams(f"{self.formula}: scale must be a number: {e}")
        if not scale > 0:
            raise InvalidParams(f"{self.formula}: scale must be positive (got {scale})")
        self.scale = scale
        self._name = f"{self.formula}(K={scale:g})"

    def params(self):
        return {"formula": self.formula, "scale": self.scale}


class SaturatingRationalFlux(_ScaledFormula):
    """`A(s) = K s / (1 + s)`."""
    formula = "saturating_rational"

    def a(self, s):
        return self.scale * s / (1.0 + s)

    def a_prime(self, s):
        return self.scale / np.square(1.0 + s)

    @property
    def constants(self):
        # A(s)/s = K/(1+s) >= K/2 on [0, 1]
        return {
            "growth_C": self.scale,
            "growth_p": 1.0,
            "lower_q": 1.0,
            "lower_delta0": 1.0,
            "lower_Dbar": 0.5 * self.scale,
        }

    @property
    def sup(self):
        return self.scale

    @property
    def ratio_at_zero(self):
        return self.scale


class QuarticSaturationFlux(_ScaledFormula):
    """`A(s) = K (1 - (1 + s)^-4)`."""
    formula = "quartic_saturation"

    def a(self, s):
        # -expm1(-4 log1p(s)) keeps digits for small s
        return -self.scale * np.expm1(-4.0 * np.log1p(s))

    def a_prime(self, s):
        return 4.0 * self.scale * np.power(1.0 + s, -5.0)

    @property
    def constants(self):
        # A is concave, so A(s)/s >= A(1) = 15K/16 on [0, 1]
        return {
            "growth_C": self.scale,
            "growth_p": 1.0,
            "lower_q": 1.0,
            "lower_delta0": 1.0,
            "lower_Dbar": 0.9375 * self.scale,
        }

    @property
    def sup(self):
        return self.scale

    @property
    def ratio_at_zero(self):
        return 4.0 * self.scale


class ArctanFlux(_ScaledFormula):
    """`A(s) = K arctan(s)`."""
    formula = "arctan"

    def a(self, s):
        return self.scale * np.arctan(s)

    def a_prime(self, s):
        return self.scale / (1.0 + np.square(s))

    @property
    def constants(self):
        return {
            "growth_C": 0.5 * math.pi * self.scale,
            "growth_p": 1.0,
            "lower_q": 1.0,
            "lower_delta0": 1.0,
            "lower_Dbar": 0.25 * math.pi * self.scale,
        }

    @property
    def sup(self):
        return 0.5 * math.pi * self.scale

    @property
    def ratio_at_zero(self):
        return self.scale


FORMULA_TABLE = {
    SaturatingRationalFlux.formula: SaturatingRationalFlux,
    QuarticSaturationFlux.formula: QuarticSaturationFlux,
    ArctanFlux.formula: ArctanFlux,
}
