"""
Constant curvature hyperbolic space H^n(-c) in the Poincaré ball model.

Coordinates always live in the unit ball; the curvature only rescales the
metric `2|dx| / (sqrt(c) (1 - |x|^2))`, so the isometry group (Möbius maps
preserving the ball) does not depend on c. Every function has a `*_coords`
variant working on arrays of shape (..., n) for field evaluation.
"""
import math
from dataclasses import dataclass

import numpy as np

from asymlab.errors import DimensionMismatch, InvalidIdealPoint, InvalidParams, NonpositiveRadius

IDEAL_RENORMALIZE_TOL = 1e-9


def _vector(x):
    return tuple(float(v) for v in np.asarray(x, dtype=float).ravel())


@dataclass(frozen=True)
class Point:
    x: tuple
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x", _vector(self.x))
        if len(self.x) < 2:
            raise DimensionMismatch(f"dimension must be at least 2 (got {len(self.x)})")
        if not self.c > 0:
            raise InvalidParams(f"curvature magnitude c must be positive (got {self.c})")
        if not np.dot(self.x, self.x) < 1.0:
            raise InvalidParams(f"point {self.x} is not inside the unit ball")

    @property
    def n(self):
        return len(self.x)

    @property
    def coords(self):
        return np.array(self.x)


@dataclass(frozen=True)
class IdealPoint:
    xi: tuple

    def __post_init__(self):
        v = np.asarray(self.xi, dtype=float).ravel()
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > IDEAL_RENORMALIZE_TOL:
            raise InvalidIdealPoint(f"ideal point {tuple(v)} has norm {norm:.12g}, not 1")
        object.__setattr__(self, "xi", _vector(v / norm))

    @property
    def n(self):
        return len(self.xi)

    @property
    def coords(self):
        return np.array(self.xi)


@dataclass(frozen=True)
class Geodesic:
    start: IdealPoint
    end: IdealPoint

    def __post_init__(self):
        if self.start.n != self.end.n:
            raise DimensionMismatch("geodesic endpoints live in different dimensions")
        if np.allclose(self.start.coords, self.end.coords, atol=1e-12):
            raise InvalidParams("geodesic endpoints must be distinct")

    @property
    def n(self):
        return self.start.n


@dataclass(frozen=True)
class Horosphere:
    ideal: IdealPoint
    through: Point

    def __post_init__(self):
        if self.ideal.n != self.through.n:
            raise DimensionMismatch("horosphere ideal point and normalization point differ in dimension")

    @property
    def n(self):
        return self.ideal.n

    @property
    def c(self):
        return self.through.c


@dataclass(frozen=True)
class TotallyGeodesicHyperplane:
    """
    Hyperplane orthogonal to the diameter towards `normal`, crossing it at
    signed hyperbolic distance `offset` from the origin. Distances to it are
    signed, positive on the side of `normal`.
    """
    normal: IdealPoint
    offset: float = 0.0
    c: float = 1.0

    @property
    def n(self):
        return self.normal.n


@dataclass(frozen=True)
class Isometry:
    """
    Composition of ball-model Möbius generators, applied left to right:
    `("orthogonal", Q)`, `("translate", a)` for `x -> a ⊕ x`, and
    `("parabolic", (xi, v))` for the Euclidean shift by `v ⊥ xi` in the
    half-space picture with `xi` at infinity.
    """
    steps: tuple
    n: int
    c: float = 1.0

    def then(self, other):
        if other.n != self.n:
            raise DimensionMismatch("cannot compose isometries of different dimensions")
        return Isometry(self.steps + other.steps, self.n, self.c)

    def inverse(self):
        inverted = []
        for kind, payload in reversed(self.steps):
            if kind == "orthogonal":
                inverted.append((kind, np.asarray(payload).T))
            elif kind == "translate":
                inverted.append((kind, -np.asarray(payload)))
            else:
                xi, v = payload
                inverted.append((kind, (xi, -np.asarray(v))))
        return Isometry(tuple(inverted), self.n, self.c)


def identity(n, c=1.0):
    return Isometry((), n, c)


def rotation(q, c=1.0):
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or not np.allclose(q @ q.T, np.eye(q.shape[0]), atol=1e-12):
        raise InvalidParams("rotation needs an orthogonal matrix")
    return Isometry((("orthogonal", q),), q.shape[0], c)


def translation_to(a, c=1.0):
    """The hyperbolic translation `x -> a ⊕ x`, which maps the origin to `a`."""
    a = np.asarray(a, dtype=float)
    if not np.dot(a, a) < 1.0:
        raise InvalidParams("translation target must lie inside the ball")
    return Isometry((("translate", a),), a.size, c)


def mobius_fix_ideal(xi: IdealPoint, translation, c=1.0):
    """
    Hyperbolic translation of signed length `translation` along the diameter
    ending at `xi`. It fixes `xi` and `-xi`, and shifts every horosphere
    centred at `xi` by `translation`.
    """
    if not math.isfinite(translation):
        raise InvalidParams("translation length must be finite")
    a = math.tanh(0.5 * math.sqrt(c) * translation) * xi.coords
    return Isometry((("translate", a),), xi.n, c)


def parabolic_fix_ideal(xi: IdealPoint, v, c=1.0):
    """Parabolic isometry fixing only `xi`; `v` is projected orthogonally to `xi`."""
    v = np.asarray(v, dtype=float)
    v = v - np.dot(v, xi.coords) * xi.coords
    return Isometry((("parabolic", (xi.coords, v)),), xi.n, c)


def mobius_add(a, x):
    """Möbius addition `a ⊕ x` for x of shape (..., n); valid up to |x| = 1."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    ax = np.sum(x * a, axis=-1, keepdims=True)
    xx = np.sum(x * x, axis=-1, keepdims=True)
    aa = float(np.dot(a, a))
    num = (1.0 + 2.0 * ax + xx) * a + (1.0 - aa) * x
    return num / (1.0 + 2.0 * ax + aa * xx)


def _cayley(xi, x):
    # inversion in the sphere of radius sqrt(2) about xi: ball <-> half-space {y . xi < 0}
    d = x - xi
    return xi + 2.0 * d / np.sum(d * d, axis=-1, keepdims=True)


def _parabolic(xi, v, x):
    at_xi = np.all(np.isclose(x, xi, atol=1e-15), axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        moved = _cayley(xi, _cayley(xi, x) + v)
    return np.where(at_xi, x, moved)


def apply_isometry_coords(T: Isometry, x):
    y = np.asarray(x, dtype=float)
    if y.shape[-1] != T.n:
        raise DimensionMismatch(f"isometry of H^{T.n} applied to {y.shape[-1]}-vectors")
    for kind, payload in T.steps:
        if kind == "orthogonal":
            y = y @ np.asarray(payload).T
        elif kind == "translate":
            y = mobius_add(payload, y)
        else:
            xi, v = payload
            y = _parabolic(np.asarray(xi), np.asarray(v), y)
    return y


def apply_isometry(T: Isometry, x: Point):
    if x.n != T.n:
        raise DimensionMismatch(f"isometry of H^{T.n} applied to a point of H^{x.n}")
    y = apply_isometry_coords(T, x.coords)
    # Möbius rounding can land a hair outside the ball for points near the boundary
    norm = float(np.linalg.norm(y))
    if norm >= 1.0:
        y = y * (np.nextafter(1.0, 0.0) / norm)
    return Point(y, x.c)


def apply_to_ideal(T: Isometry, xi: IdealPoint):
    y = apply_isometry_coords(T, xi.coords)
    return IdealPoint(y / np.linalg.norm(y))


def apply_to_geodesic(T: Isometry, gamma: Geodesic):
    return Geodesic(apply_to_ideal(T, gamma.start), apply_to_ideal(T, gamma.end))


def apply_to_horosphere(T: Isometry, h: Horosphere):
    return Horosphere(apply_to_ideal(T, h.ideal), apply_isometry(T, h.through))


def _check_same_model(x: Point, y: Point):
    if x.n != y.n:
        raise DimensionMismatch(f"points of H^{x.n} and H^{y.n}")
    if x.c != y.c:
        raise DimensionMismatch(f"points of curvature -{x.c} and -{y.c}")


def distance_coords(x, y, c=1.0):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    denom = np.sqrt((1.0 - np.sum(x * x, axis=-1)) * (1.0 - np.sum(y * y, axis=-1)))
    # arcosh(1 + 2 w^2) = 2 asinh(w) keeps digits for close points
    return 2.0 * np.arcsinh(diff / denom) / math.sqrt(c)


def hyp_distance(x: Point, y: Point):
    _check_same_model(x, y)
    return float(distance_coords(x.coords, y.coords, x.c))


def closest_point_to_origin(gamma: Geodesic):
    """Euclidean position of the point of `gamma` nearest to the origin."""
    u, v = gamma.start.coords, gamma.end.coords
    cos_angle = float(np.clip(np.dot(u, v), -1.0, 1.0))
    mid = u + v
    norm = float(np.linalg.norm(mid))
    if norm < 1e-12:
        return np.zeros_like(u)
    half = 0.5 * math.acos(cos_angle)
    return (1.0 - math.sin(half)) / math.cos(half) * mid / norm


def dist_to_geodesic_coords(x, gamma: Geodesic, c=1.0):
    m = closest_point_to_origin(gamma)
    xs = mobius_add(-m, x)
    axis = mobius_add(-m, gamma.start.coords)
    axis = axis / np.linalg.norm(axis)
    along = np.sum(xs * axis, axis=-1, keepdims=True)
    off = np.sqrt(np.sum((xs - along * axis) ** 2, axis=-1))
    return np.arcsinh(2.0 * off / (1.0 - np.sum(xs * xs, axis=-1))) / math.sqrt(c)


def dist_to_geodesic(x: Point, gamma: Geodesic):
    """Distance to a geodesic, after the Möbius map sending it to a diameter."""
    if x.n != gamma.n:
        raise DimensionMismatch(f"point of H^{x.n}, geodesic of H^{gamma.n}")
    return float(dist_to_geodesic_coords(x.coords, gamma, x.c))


def signed_dist_to_hyperplane_coords(x, plane: TotallyGeodesicHyperplane):
    xs = np.asarray(x, dtype=float)
    if plane.offset != 0.0:
        xs = mobius_add(-math.tanh(0.5 * math.sqrt(plane.c) * plane.offset) * plane.normal.coords, xs)
    e = plane.normal.coords
    return np.arcsinh(2.0 * np.sum(xs * e, axis=-1) / (1.0 - np.sum(xs * xs, axis=-1))) / math.sqrt(plane.c)


def dist_to_hyperplane(x: Point, plane: TotallyGeodesicHyperplane):
    if x.n != plane.n:
        raise DimensionMismatch(f"point of H^{x.n}, hyperplane of H^{plane.n}")
    return float(abs(signed_dist_to_hyperplane_coords(x.coords, plane)))


def busemann_coords(x, h: Horosphere):
    xi = h.ideal.coords
    x = np.asarray(x, dtype=float)

    def level(y):
        return np.log((1.0 - np.sum(y * y, axis=-1)) / np.sum((y - xi) ** 2, axis=-1))

    return (level(x) - level(h.through.coords)) / math.sqrt(h.c)


def busemann(x: Point, h: Horosphere):
    """
    Signed distance to the horosphere: positive inside the horoball, zero on
    it, negative outside; `|∇d| = 1` and `Δd = -(n-1) sqrt(c)`.
    """
    if x.n != h.n:
        raise DimensionMismatch(f"point of H^{x.n}, horosphere of H^{h.n}")
    return float(busemann_coords(x.coords, h))


def laplacian_distance(r, c, n, mode):
    """
    Laplacian of the model distance functions of H^n(-c).

    `sphere`: distance to a point at distance r, `(n-1) sqrt(c) coth(sqrt(c) r)`.
    `horosphere`: signed horospherical distance, `-(n-1) sqrt(c)`.
    `hyperplane`: distance r to a totally geodesic hyperplane, `(n-1) sqrt(c) tanh(sqrt(c) r)`.
    """
    k = math.sqrt(c)
    if mode == "sphere":
        if not r > 0:
            raise NonpositiveRadius(f"sphere mode needs r > 0 (got {r})")
        return (n - 1) * k / math.tanh(k * r)
    if mode == "horosphere":
        return -(n - 1) * k
    if mode == "hyperplane":
        return (n - 1) * k * math.tanh(k * r)
    raise InvalidParams(f"unknown laplacian mode `{mode}`")


def from_geodesic_polar(r, theta, c=1.0):
    """Ball coordinates of the H^2 point at distance r from the origin in direction theta."""
    rho = np.tanh(0.5 * math.sqrt(c) * np.asarray(r, dtype=float))
    theta = np.asarray(theta, dtype=float)
    return np.stack(np.broadcast_arrays(rho * np.cos(theta), rho * np.sin(theta)), axis=-1)


def geodesic_polar(x, c=1.0):
    x = np.asarray(x, dtype=float)
    rho = np.sqrt(np.sum(x * x, axis=-1))
    return 2.0 * np.arctanh(rho) / math.sqrt(c), np.arctan2(x[..., 1], x[..., 0])


def conformal_factor(x, c=1.0):
    x = np.asarray(x, dtype=float)
    return 2.0 / (math.sqrt(c) * (1.0 - np.sum(x * x, axis=-1)))


def random_isometry(n, c=1.0, rng=None, max_translation=2.0):
    """Random rotation, translation and parabolic shift composed together."""
    rng = np.random.default_rng(rng)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    direction = rng.standard_normal(n)
    xi = IdealPoint(direction / np.linalg.norm(direction))
    shift = rng.uniform(-max_translation, max_translation)
    parabolic_axis = rng.standard_normal(n)
    xi_p = IdealPoint(parabolic_axis / np.linalg.norm(parabolic_axis))
    return (rotation(q, c)
            .then(mobius_fix_ideal(xi, shift, c))
            .then(parabolic_fix_ideal(xi_p, 0.5 * rng.standard_normal(n), c)))
