import math

from asymlab.errors import InvalidParams
from asymlab.operators.flux import Flux


def _weighted(t, x1, x2):
    # 0 * inf must stay 0: a zero weight removes the term entirely
    terms = [w * x for w, x in ((t, x1), (1.0 - t, x2)) if w > 0]
    return sum(terms)


class BlendFlux(Flux):
    """
    Convex combination `t A1 + (1 - t) A2` of two fluxes.

    The class S is linearly convex, so the blend satisfies the structural
    conditions with C = 2 (t C1 + (1-t) C2), p = max(p1, p2), q = max(q1, q2),
    delta0 = min(delta01, delta02, 1) and D = t D1 + (1-t) D2.
    """

    def __init__(self, flux_conf):
        try:
            self.first = flux_conf["first"]
            self.second = flux_conf["second"]
            self.t = float(flux_conf["t"])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidParams(f"blend needs `first`, `second` and a weight `t`: {e}")
        if not 0.0 <= self.t <= 1.0:
            raise InvalidParams(f"blend weight t must lie in [0, 1] (got {self.t})")
        self._name = f"blend({self.first.name}, {self.second.name}, t={self.t:g})"

    def a(self, s):
        return self.t * self.first.a(s) + (1.0 - self.t) * self.second.a(s)

    def a_prime(self, s):
        return self.t * self.first.a_prime(s) + (1.0 - self.t) * self.second.a_prime(s)

    @property
    def constants(self):
        c1, c2 = self.first.constants, self.second.constants
        return {
            "growth_C": 2.0 * _weighted(self.t, c1["growth_C"], c2["growth_C"]),
            "growth_p": max(c1["growth_p"], c2["growth_p"]),
            "lower_q": max(c1["lower_q"], c2["lower_q"]),
            "lower_delta0": min(c1["lower_delta0"], c2["lower_delta0"], 1.0),
            "lower_Dbar": _weighted(self.t, c1["lower_Dbar"], c2["lower_Dbar"]),
        }

    @property
    def sup(self):
        if self.first.sup is None or self.second.sup is None:
            return None
        return _weighted(self.t, self.first.sup, self.second.sup)

    @property
    def ratio_at_zero(self):
        r1, r2 = self.first.ratio_at_zero, self.second.ratio_at_zero
        if (r1 is None and self.t > 0) or (r2 is None and self.t < 1):
            return None
        return _weighted(self.t, r1 or 0.0, r2 or 0.0)

    def params(self):
        return {"first": self.first.name, "second": self.second.name, "t": self.t}


class ScaledFlux(Flux):
    """`lam * A`. The integral condition is invariant under this rescaling."""

    def __init__(self, flux_conf):
        try:
            self.base = flux_conf["base"]
            self.lam = float(flux_conf["lam"])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidParams(f"scaled flux needs `base` and a factor `lam`: {e}")
        if not self.lam > 0:
            raise InvalidParams(f"scale factor must be positive (got {self.lam})")
        self._name = f"{self.lam:g}*{self.base.name}"

    def a(self, s):
        return self.lam * self.base.a(s)

    def a_prime(self, s):
        return self.lam * self.base.a_prime(s)

    @property
    def constants(self):
        c = dict(self.base.constants)
        c["growth_C"] *= self.lam
        c["lower_Dbar"] *= self.lam
        return c

    @property
    def sup(self):
        return None if self.base.sup is None else self.lam * self.base.sup

    @property
    def ratio_at_zero(self):
        r = self.base.ratio_at_zero
        return None if r is None else self.lam * r

    def params(self):
        return {"base": self.base.name, "lam": self.lam}


class CallableFlux(Flux):
    """Flux from user-supplied callables; the user declares every constant."""

    REQUIRED = ("a", "a_prime", "growth_C", "growth_p", "lower_q", "lower_delta0", "lower_Dbar")

    def __init__(self, flux_conf):
        missing = [key for key in self.REQUIRED if key not in flux_conf]
        if missing:
            raise InvalidParams(f"custom operator is missing {', '.join(missing)}")
        self._a = flux_conf["a"]
        self._a_prime = flux_conf["a_prime"]
        if not (callable(self._a) and callable(self._a_prime)):
            raise InvalidParams("custom operator needs callable `a` and `a_prime`")
        self._constants = {key: float(flux_conf[key]) for key in self.REQUIRED[2:]}
        k0 = flux_conf.get("k0")
        self._sup = None if k0 is None else float(k0)
        ratio = flux_conf.get("ratio_at_zero")
        self._ratio = None if ratio is None or math.isinf(ratio) else float(ratio)
        self._name = flux_conf.get("name", "custom")

    def a(self, s):
        return self._a(s)

    def a_prime(self, s):
        return self._a_prime(s)

    @property
    def constants(self):
        return dict(self._constants)

    @property
    def sup(self):
        return self._sup

    @property
    def ratio_at_zero(self):
        return self._ratio
