import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

from asymlab.errors import DimensionMismatch, InvalidParams
from asymlab.geometry.hyperbolic_geometry import IdealPoint, geodesic_polar

MIN_RADIAL_NODES = 16


@dataclass(frozen=True)
class RadialGrid:
    """Nodes on [r0, r1], uniform or geometrically graded towards r0."""
    r0: float
    r1: float
    n_nodes: int
    graded: bool = False
    horospherical: bool = False

    def __post_init__(self):
        if self.n_nodes < MIN_RADIAL_NODES:
            raise InvalidParams(f"radial grid needs at least {MIN_RADIAL_NODES} nodes (got {self.n_nodes})")
        if not self.r0 < self.r1:
            raise InvalidParams(f"empty radial interval [{self.r0}, {self.r1}]")
        if self.r0 <= 0 and not self.horospherical:
            raise InvalidParams(f"geodesic radial grids need r0 > 0 (got {self.r0})")
        if self.graded and self.r0 <= 0:
            raise InvalidParams("graded grids need r0 > 0")

    @cached_property
    def nodes(self):
        if self.graded:
            return np.geomspace(self.r0, self.r1, self.n_nodes)
        return np.linspace(self.r0, self.r1, self.n_nodes)

    @property
    def h(self):
        return float(np.max(np.diff(self.nodes)))

    def describe(self):
        return {"r0": self.r0, "r1": self.r1, "n_nodes": self.n_nodes, "graded": self.graded}


@dataclass(frozen=True)
class DiskGrid:
    """
    Polar grid of the disk of hyperbolic radius `r_trunc` in H^2(-c): a centre
    node and rings 1..n_r of `n_theta` nodes each, ring n_r on the truncation
    circle carrying the Dirichlet data.

    Nodes live in grid coordinates w, a Euclidean disk of radius
    `ball_radius`. Without a puncture w is the ball coordinate and the rings
    sit at geodesic radii `i h`. With a puncture xi the grid is recentred at
    `ball_radius**2 xi` by the automorphism of the truncated disk

        x = (w + rho^2 xi) / (1 + conj(xi) w)

    and the rings are uniform in |w|, so nodes crowd towards xi on the
    truncation circle.
    """
    r_trunc: float
    n_r: int
    n_theta: int
    c: float = 1.0
    puncture: IdealPoint | None = None

    def __post_init__(self):
        if not (math.isfinite(self.r_trunc) and self.r_trunc > 0):
            raise InvalidParams(f"truncation radius must be finite and positive (got {self.r_trunc})")
        if self.n_theta % 2 or self.n_theta < 4:
            raise InvalidParams(f"n_theta must be even and >= 4 (got {self.n_theta})")
        if self.n_r < 2:
            raise InvalidParams(f"n_r must be at least 2 (got {self.n_r})")
        if self.puncture is not None and self.puncture.n != 2:
            raise DimensionMismatch(f"disk grids live in H^2, puncture has dimension {self.puncture.n}")

    @property
    def h(self):
        return self.r_trunc / self.n_r

    @property
    def dtheta(self):
        return 2.0 * math.pi / self.n_theta

    @property
    def ball_radius(self):
        return math.tanh(0.5 * math.sqrt(self.c) * self.r_trunc)

    @cached_property
    def _pole(self):
        return None if self.puncture is None else complex(*self.puncture.xi)

    @cached_property
    def levels(self):
        """Ring radii |w|, centre first."""
        if self._pole is None:
            return np.tanh(0.5 * math.sqrt(self.c) * self.h * np.arange(self.n_r + 1))
        return self.ball_radius * np.arange(self.n_r + 1) / self.n_r

    @cached_property
    def angles(self):
        start = 0.0 if self._pole is None else float(np.angle(self._pole))
        return start + self.dtheta * np.arange(self.n_theta)

    @cached_property
    def nodes(self):
        """Grid coordinates of every node as complex numbers, shape (n_r + 1, n_theta)."""
        return self.levels[:, None] * np.exp(1j * self.angles)[None, :]

    def to_ball(self, w):
        w = np.asarray(w, dtype=complex)
        if self._pole is None:
            return w
        xi, rr = self._pole, self.ball_radius ** 2
        return (w + rr * xi) / (1.0 + xi.conjugate() * w)

    def to_grid(self, x):
        x = np.asarray(x, dtype=complex)
        if self._pole is None:
            return x
        xi, rr = self._pole, self.ball_radius ** 2
        return (x - rr * xi) / (1.0 - xi.conjugate() * x)

    def metric_factor(self, w):
        """Hyperbolic length of a unit grid-coordinate vector at w."""
        w = np.asarray(w, dtype=complex)
        k = math.sqrt(self.c)
        if self._pole is None:
            return 2.0 / (k * (1.0 - np.abs(w) ** 2))
        return 2.0 / (k * (1.0 + self.ball_radius ** 2 + 2.0 * np.real(self._pole.conjugate() * w)))

    def ball_coords(self):
        """Ball coordinates of every node, shape (n_r + 1, n_theta, 2); row 0 repeats the centre."""
        x = self.to_ball(self.nodes)
        return np.stack((x.real, x.imag), axis=-1)

    def polar(self):
        """Geodesic polar coordinates (r, theta) about the origin of every node."""
        return geodesic_polar(self.ball_coords(), self.c)

    def boundary_angles(self):
        return self.polar()[1][-1]

    def polygon_areas(self):
        """
        Grid-coordinate areas of the control cells: the centre polygon, then
        one value per interior ring (all cells of a ring are congruent).
        """
        mid = 0.5 * (self.levels[:-1] + self.levels[1:])
        t = math.tan(0.5 * self.dtheta)
        return self.n_theta * t * mid[0] ** 2, t * (mid[1:] ** 2 - mid[:-1] ** 2)

    def cell_areas(self):
        """Hyperbolic areas of the control cells, the centre then shape (n_r - 1, n_theta)."""
        centre, rings = self.polygon_areas()
        mu = self.metric_factor(self.nodes)
        return centre * float(mu[0, 0]) ** 2, rings[:, None] * mu[1:-1] ** 2

    def to_grid_points(self, x):
        """Ball coordinates of shape (..., 2) to real grid coordinates of the same shape."""
        x = np.asarray(x, dtype=float)
        w = self.to_grid(x[..., 0] + 1j * x[..., 1])
        return np.stack((w.real, w.imag), axis=-1)

    def interpolator(self, values):
        """
        Piecewise-linear interpolant of node values (shape (n_r + 1, n_theta)),
        evaluated at ball coordinates. Points off the grid's triangulation take
        the nearest node value.
        """
        w = self.nodes[1:].ravel()
        points = np.concatenate([[[0.0, 0.0]], np.stack((w.real, w.imag), axis=-1)])
        data = np.concatenate([[values[0, 0]], np.asarray(values[1:], dtype=float).ravel()])
        linear = LinearNDInterpolator(points, data)
        nearest = NearestNDInterpolator(points, data)

        def evaluate(x):
            p = self.to_grid_points(x)
            out = linear(p)
            return np.where(np.isnan(out), nearest(p), out)

        return evaluate

    def describe(self):
        return {"r_trunc": self.r_trunc, "n_r": self.n_r, "n_theta": self.n_theta, "c": self.c,
                "puncture": list(self.puncture.xi) if self.puncture else None}
