import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from asymlab.errors import DomainExceeded, InvalidParams

logger = logging.getLogger(__name__)


class Endpoint(Enum):
    FINITE_LIMIT = "finiteLimit"
    BLOW_UP = "blowUp"
    DECAY_TO_ZERO = "decayToZero"


@dataclass(frozen=True)
class EndpointBehavior:
    kind: Endpoint
    value: float | None = None

    def to_dict(self):
        return {"kind": self.kind.value, "value": self.value}

    @classmethod
    def from_dict(cls, d):
        return cls(Endpoint(d["kind"]), d.get("value"))


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def monotone_slopes(x, y, m):
    """
    Limit Hermite slopes so every cubic piece stays monotone (Fritsch-Carlson):
    slopes take the sign of the secants and `alpha^2 + beta^2 <= 9` per interval.
    """
    m = np.array(m, dtype=float)
    secant = np.diff(y) / np.diff(x)
    for i, s in enumerate(secant):
        if s == 0.0:
            m[i] = m[i + 1] = 0.0
            continue
        a, b = m[i] / s, m[i + 1] / s
        if a < 0.0:
            m[i] = a = 0.0
        if b < 0.0:
            m[i + 1] = b = 0.0
        norm = a * a + b * b
        if norm > 9.0:
            tau = 3.0 / np.sqrt(norm)
            m[i], m[i + 1] = tau * a * s, tau * b * s
    return m


@dataclass(frozen=True, eq=False)
class Profile:
    """
    Monotone 1-D profile sampled on a strictly increasing grid.

    `slopes` are the exact derivatives at the nodes (the quadrature
    integrands), used both for Hermite interpolation and for ODE checks.
    Outside the grid the profile is only defined where an endpoint behavior
    says so: past an infinite end with a `finiteLimit` or `decayToZero`
    behavior the profile approaches its limit exponentially.
    """
    grid: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    domain: tuple
    endpoint_lo: EndpointBehavior
    endpoint_hi: EndpointBehavior
    quad_tol: float
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("grid", "values", "slopes"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (self.grid.ndim == 1 and self.grid.shape == self.values.shape == self.slopes.shape):
            raise InvalidParams("profile grid, values and slopes must be 1-D of equal length")
        if self.grid.size < 2 or np.any(np.diff(self.grid) <= 0):
            raise InvalidParams("profile grid must be strictly increasing with at least 2 nodes")
        steps = np.diff(self.values)
        if not (np.all(steps > 0) or np.all(steps < 0) or np.all(steps == 0)):
            raise InvalidParams(f"profile `{self.label}` is not strictly monotone")

    @property
    def direction(self):
        return int(np.sign(self.values[-1] - self.values[0]))

    @property
    def size(self):
        return self.grid.size

    @cached_property
    def _spline(self):
        return CubicHermiteSpline(self.grid, self.values, monotone_slopes(self.grid, self.values, self.slopes),
                                  extrapolate=False)

    def _continuation(self, d, end, behavior, bound):
        """
        Beyond an infinite grid end with a known limit, continue by the
        exponential approach to the limit matching value and slope at the end node.
        """
        if not np.isinf(bound):
            return None
        if behavior.kind is Endpoint.DECAY_TO_ZERO:
            limit = 0.0
        elif behavior.kind is Endpoint.FINITE_LIMIT and behavior.value is not None:
            limit = behavior.value
        else:
            return None
        gap = self.values[end] - limit
        outward = 1.0 if end == -1 else -1.0
        rate = self.slopes[end] / gap if gap != 0.0 else 0.0
        if not outward * rate < 0.0:
            return np.full(d.shape, limit + gap)
        return limit + gap * np.exp(rate * (d - self.grid[end]))

    def __call__(self, d):
        d_arr = np.asarray(d, dtype=float)
        out = np.empty(d_arr.shape)
        below = d_arr < self.grid[0]
        above = d_arr > self.grid[-1]
        inside = ~(below | above)
        for mask, end, behavior, bound, side in ((below, 0, self.endpoint_lo, self.domain[0], "below"),
                                                 (above, -1, self.endpoint_hi, self.domain[1], "above")):
            if not np.any(mask):
                continue
            value = self._continuation(d_arr[mask], end, behavior, bound)
            if value is None:
                worst = np.min(d_arr[mask]) if side == "below" else np.max(d_arr[mask])
                raise DomainExceeded(f"profile `{self.label}` evaluated at {worst:.6g}, {side} its grid "
                                     f"[{self.grid[0]:.6g}, {self.grid[-1]:.6g}]")
            out[mask] = value
        out[inside] = self._spline(d_arr[inside])
        if d_arr.ndim == 0:
            return float(out)
        return out

    def derivative(self, d):
        return self._spline.derivative()(np.asarray(d, dtype=float))

    def shifted(self, offset, label=None):
        """The profile plus a constant; endpoint limits move along."""

        def move(b):
            if b.kind is Endpoint.FINITE_LIMIT and b.value is not None:
                return EndpointBehavior(b.kind, b.value + offset)
            return b

        return replace(self, values=self.values + offset, endpoint_lo=move(self.endpoint_lo),
                       endpoint_hi=move(self.endpoint_hi), label=label or self.label,
                       metadata={**self.metadata, "shift": self.metadata.get("shift", 0.0) + offset})

    def to_dict(self):
        return {
            "label": self.label,
            "domain": [float(self.domain[0]), float(self.domain[1])],
            "endpoint_lo": self.endpoint_lo.to_dict(),
            "endpoint_hi": self.endpoint_hi.to_dict(),
            "quad_tol": self.quad_tol,
            "direction": self.direction,
            "metadata": self.metadata,
            "nodes": {"r": self.grid.tolist(), "value": self.values.tolist(), "slope": self.slopes.tolist()},
        }

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def to_csv(self, path):
        np.savetxt(path, np.column_stack((self.grid, self.values)), delimiter=",", header="r,value",
                   comments="", fmt="%.17g")

    @classmethod
    def from_dict(cls, d):
        nodes = d["nodes"]
        return cls(grid=nodes["r"], values=nodes["value"], slopes=nodes["slope"],
                   domain=tuple(float(v) for v in d["domain"]),
                   endpoint_lo=EndpointBehavior.from_dict(d["endpoint_lo"]),
                   endpoint_hi=EndpointBehavior.from_dict(d["endpoint_hi"]),
                   quad_tol=float(d["quad_tol"]), label=d.get("label", ""), metadata=d.get("metadata", {}))

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def constant(cls, value, n_nodes=8, label="constant"):
        grid = np.linspace(-1.0, 1.0, n_nodes)
        return cls(grid=grid, values=np.full(n_nodes, float(value)), slopes=np.zeros(n_nodes),
                   domain=(-np.inf, np.inf), endpoint_lo=EndpointBehavior(Endpoint.FINITE_LIMIT, float(value)),
                   endpoint_hi=EndpointBehavior(Endpoint.FINITE_LIMIT, float(value)), quad_tol=0.0, label=label)
