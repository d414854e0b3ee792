"""
Fields `u = profile(d(x))` on the ball model and the finite-difference
evaluation of `Q(u)` in the conformal metric `λ^2 |dx|^2`,
`λ = 2 / (sqrt(c) (1 - |x|^2))`:

    Q(u) = λ^-n Σ_i ∂_i( λ^(n-2) A(|∇u|_g)/|∇u|_g ∂_i u ),   |∇u|_g = |Du| / λ.
"""
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.stats import norm, qmc

from asymlab.barriers.profile import Profile
from asymlab.errors import (DegenerateGradient, DimensionMismatch, DomainExceeded, InvalidParams,
                            StencilOutOfDomain)
from asymlab.geometry.hyperbolic_geometry import (Geodesic, Horosphere, IdealPoint, Point,
                                                  TotallyGeodesicHyperplane, busemann_coords,
                                                  closest_point_to_origin, conformal_factor,
                                                  dist_to_geodesic_coords, distance_coords, mobius_add,
                                                  signed_dist_to_hyperplane_coords)
from asymlab.operators.operator_family import OperatorSpec

logger = logging.getLogger(__name__)

EPS_GRAD = 1e-8
STENCIL_MARGIN = 1e-9


class DistanceKind(Enum):
    TO_GEODESIC = "toGeodesic"
    TO_POINT = "toPoint"
    HOROSPHERICAL = "horospherical"
    TO_HYPERPLANE = "toHyperplane"


_TARGET_TYPES = {
    DistanceKind.TO_GEODESIC: Geodesic,
    DistanceKind.TO_POINT: Point,
    DistanceKind.HOROSPHERICAL: Horosphere,
    DistanceKind.TO_HYPERPLANE: TotallyGeodesicHyperplane,
}


@dataclass(frozen=True)
class Model:
    n: int = 2
    c: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidParams(f"dimension must be an integer >= 2 (got {self.n})")
        if not self.c > 0:
            raise InvalidParams(f"curvature magnitude must be positive (got {self.c})")


@dataclass(frozen=True, eq=False)
class ScalarField:
    profile: Profile
    distance_kind: DistanceKind
    target: object
    model: Model
    sign: float = 1.0

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        if self.distance_kind is DistanceKind.TO_GEODESIC:
            return dist_to_geodesic_coords(x, self.target, self.model.c)
        if self.distance_kind is DistanceKind.TO_POINT:
            return distance_coords(x, self.target.coords, self.model.c)
        if self.distance_kind is DistanceKind.HOROSPHERICAL:
            return busemann_coords(x, self.target)
        return np.abs(signed_dist_to_hyperplane_coords(x, self.target))

    def __call__(self, x):
        coords = x.coords if isinstance(x, Point) else np.asarray(x, dtype=float)
        if coords.shape[-1] != self.model.n:
            raise DimensionMismatch(f"field on H^{self.model.n} evaluated at {coords.shape[-1]}-vectors")
        if np.any(np.sum(coords * coords, axis=-1) >= 1.0):
            raise DomainExceeded("field evaluated outside the open unit ball")
        return self.sign * self.profile(self.distance(coords))

    def __neg__(self):
        return ScalarField(self.profile, self.distance_kind, self.target, self.model, -self.sign)


def compose_field(profile: Profile, distance_kind, target, model=None):
    """
    The field `x -> profile(d(x))` with d the distance of the given kind to `target`.

    Raises:
        DimensionMismatch: target and model differ in dimension or curvature.
    """
    kind = DistanceKind(distance_kind)
    if not isinstance(target, _TARGET_TYPES[kind]):
        raise InvalidParams(f"{kind.value} needs a {_TARGET_TYPES[kind].__name__} target")
    model = model or Model(target.n, getattr(target, "c", 1.0))
    if target.n != model.n:
        raise DimensionMismatch(f"target lives in H^{target.n}, model is H^{model.n}")
    target_c = getattr(target, "c", None)
    if target_c is not None and target_c != model.c:
        raise DimensionMismatch(f"target curvature -{target_c} differs from the model's -{model.c}")
    return ScalarField(profile, kind, target, model)


def _flux_ratio(spec, s, exact_zero):
    """`A(s)/s` with the degenerate-gradient rule below EPS_GRAD."""
    small = (s < EPS_GRAD) & ~exact_zero
    if np.any(small) and spec.ratio_at_zero is None:
        raise DegenerateGradient(f"|∇u| = {np.min(s[small]):.3g} < {EPS_GRAD:g} and A(s)/s has no finite "
                                 f"limit at 0 for {spec.name}")
    safe = np.where(small | exact_zero, 1.0, s)
    ratio = np.asarray(spec.a(safe), dtype=float) / safe
    if spec.ratio_at_zero is not None:
        ratio = np.where(small, spec.ratio_at_zero, ratio)
    return np.where(exact_zero, 0.0, ratio)


def divergence_residuals(f: ScalarField, spec: OperatorSpec, x, h):
    """
    `Q(u)` at every row of `x` (shape (m, n)) by the conservative
    second-order stencil on the cube `x + h {-1, 0, 1}^n`.

    Raises:
        StencilOutOfDomain: a stencil leaves the ball or the profile's grid.
        DegenerateGradient: see `_flux_ratio`.
    """
    if not h > 0:
        raise InvalidParams(f"stencil spacing must be positive (got {h})")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, n = x.shape
    if n != f.model.n:
        raise DimensionMismatch(f"field on H^{f.model.n}, points in R^{n}")
    if np.any(np.linalg.norm(x, axis=1) + 2.0 * h >= 1.0 - STENCIL_MARGIN):
        raise StencilOutOfDomain(f"stencil of radius {2 * h:g} leaves the unit ball")

    offsets = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=float)
    try:
        u = f(x[:, None, :] + h * offsets[None, :, :])
    except DomainExceeded as e:
        raise StencilOutOfDomain(str(e))

    def at(*pairs):
        # index of the offset with entry `sign` in direction `axis` for each (axis, sign)
        o = [0] * n
        for axis, sign in pairs:
            o[axis] = sign
        return u[:, sum((v + 1) * 3 ** (n - 1 - k) for k, v in enumerate(o))]

    c = f.model.c
    total = np.zeros(m)
    for i in range(n):
        fluxes = []
        for side in (1, -1):
            grad = np.empty((m, n))
            grad[:, i] = side * (at((i, side)) - at()) / h
            for j in range(n):
                if j != i:
                    grad[:, j] = (at((i, side), (j, 1)) - at((i, side), (j, -1)) + at((j, 1)) - at((j, -1))) / (4 * h)
            half = x.copy()
            half[:, i] += 0.5 * side * h
            lam = conformal_factor(half, c)
            du = np.linalg.norm(grad, axis=1)
            ratio = _flux_ratio(spec, du / lam, du == 0.0)
            fluxes.append(lam ** (n - 2) * ratio * grad[:, i])
        total += (fluxes[0] - fluxes[1]) / h
    return total / conformal_factor(x, c) ** n


def divergence_residual(f: ScalarField, spec: OperatorSpec, x, h):
    coords = x.coords if isinstance(x, Point) else np.asarray(x, dtype=float)
    return float(divergence_residuals(f, spec, coords[None, :], h)[0])


def convergence_order(f: ScalarField, spec: OperatorSpec, x, hs=(1e-2, 5e-3, 2.5e-3)):
    """Observed order of `|Q(u)(x)|` under stencil refinement (least-squares slope in log-log)."""
    hs = np.asarray(hs, dtype=float)
    residuals = np.array([abs(divergence_residual(f, spec, x, h)) for h in hs])
    if np.any(residuals == 0.0):
        return math.inf, residuals
    slope, _ = np.polyfit(np.log(hs), np.log(residuals), 1)
    return float(slope), residuals


@dataclass(frozen=True, eq=False)
class ResidualReport:
    points: np.ndarray
    residuals: np.ndarray
    h: float
    tol: float
    allowance: float
    metadata: dict = field(default_factory=dict)

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.residuals)))

    @property
    def sign_violations(self):
        return int(np.count_nonzero(self.residuals > self.tol + self.allowance))

    @property
    def passed(self):
        return self.sign_violations == 0

    def to_dict(self):
        return {"h": self.h, "tol": self.tol, "allowance": self.allowance, "max_abs": self.max_abs,
                "sign_violations": self.sign_violations, "metadata": self.metadata,
                "points": self.points.tolist(), "residuals": self.residuals.tolist()}

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def to_csv(self, path):
        n = self.points.shape[1]
        header = ",".join([f"x{k}" for k in range(n)] + ["residual"])
        np.savetxt(path, np.column_stack((self.points, self.residuals)), delimiter=",", header=header,
                   comments="", fmt="%.17g")


def supersolution_check(f: ScalarField, spec: OperatorSpec, samples, h, tol=1e-6, allowance=None):
    """
    Count samples where `Q(u) > tol + allowance`.

    Without an explicit allowance, `10 C h^2` is used with C estimated from
    the residual changes over the spacings h, h/2, h/4.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    residuals = divergence_residuals(f, spec, samples, h)
    if allowance is None:
        half = divergence_residuals(f, spec, samples, h / 2.0)
        quarter = divergence_residuals(f, spec, samples, h / 4.0)
        c_h = max(np.max(np.abs(residuals - half)) / (h * h * 0.75),
                  np.max(np.abs(half - quarter)) / (h * h * 0.1875))
        allowance = 10.0 * c_h * h * h
    report = ResidualReport(samples, residuals, h, tol, float(allowance),
                            {"field": f.profile.label, "operator": spec.name, "count": len(samples)})
    logger.info(f"{f.profile.label}: max |Q| = {report.max_abs:.3g}, {report.sign_violations} sign violations")
    return report


def boundary_trace(f: ScalarField, ideal_target: IdealPoint, approach):
    """
    Field values along points approaching an ideal point.

    Returns:
        list: (Euclidean distance to the ideal target, value) per approach point.
    """
    xi = ideal_target.coords
    table = []
    for p in approach:
        coords = p.coords if isinstance(p, Point) else np.asarray(p, dtype=float)
        table.append((float(np.linalg.norm(coords - xi)), float(f(coords))))
    return table


def radial_approach(target: IdealPoint, count=12, c=1.0):
    """Points `(1 - 2^-k) xi`, k = 1..count, on the diameter towards xi."""
    return [Point((1.0 - 2.0 ** -k) * target.coords, c) for k in range(1, count + 1)]


def trace_slope(table, k=4):
    """Slope of value against -log(distance) over the last k trace entries."""
    dist = np.array([d for d, _ in table[-k:]])
    values = np.array([v for _, v in table[-k:]])
    slope, _ = np.polyfit(-np.log(dist), values, 1)
    return float(slope)


@dataclass(frozen=True)
class BallRegion:
    center: tuple
    radius: float
    inner: float = 0.0


@dataclass(frozen=True)
class GeodesicBand:
    """Points at distance in `d_range` from a geodesic, within `length` of its midpoint, on the side of `side`."""
    geodesic: Geodesic
    d_range: tuple
    length: float
    side: IdealPoint


def _householder_to_e1(u):
    e1 = np.zeros_like(u)
    e1[0] = 1.0
    v = u - e1
    if np.linalg.norm(v) < 1e-14:
        return np.eye(u.size)
    return np.eye(u.size) - 2.0 * np.outer(v, v) / np.dot(v, v)


def _unit_directions(z):
    """Map uniform samples in [0,1)^(n-1) (n = 2) or [0,1)^n to unit vectors."""
    if z.shape[1] == 1:
        angle = 2.0 * np.pi * z[:, 0]
        return np.column_stack((np.cos(angle), np.sin(angle)))
    g = norm.ppf(np.clip(z, 1e-12, 1.0 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_points(model: Model, region, count, seed=0):
    """
    Scrambled Sobol samples of a region of H^n, returned as ball coordinates (count, n).

    Ball and annulus regions are sampled uniformly in hyperbolic radius and
    direction; geodesic bands uniformly in distance and arc length.
    """
    if count < 1:
        raise InvalidParams("sample count must be positive")
    n, k = model.n, math.sqrt(model.c)
    direction_dims = 1 if n == 2 else n

    def sobol(dims):
        draws = qmc.Sobol(dims, scramble=True, seed=seed).random_base2(max(1, math.ceil(math.log2(count))))
        return draws[:count]

    if isinstance(region, BallRegion):
        z = sobol(1 + direction_dims)
        r = region.inner + (region.radius - region.inner) * z[:, 0]
        local = np.tanh(0.5 * k * r)[:, None] * _unit_directions(z[:, 1:])
        return mobius_add(np.asarray(region.center, dtype=float), local)

    if isinstance(region, GeodesicBand):
        gamma = region.geodesic
        m = closest_point_to_origin(gamma)
        axis = mobius_add(-m, gamma.start.coords)
        rot = _householder_to_e1(axis / np.linalg.norm(axis))
        side = rot @ mobius_add(-m, region.side.coords)
        side[0] = 0.0
        if np.linalg.norm(side) < 1e-12:
            raise InvalidParams("side point lies on the geodesic's boundary circle")
        side /= np.linalg.norm(side)
        z = sobol(2 + (n - 1 if n > 2 else 0))
        d = region.d_range[0] + (region.d_range[1] - region.d_range[0]) * z[:, 0]
        t = region.length * (2.0 * z[:, 1] - 1.0)
        if n == 2:
            w = np.tile(side, (count, 1))
        else:
            g = norm.ppf(np.clip(z[:, 2:], 1e-12, 1.0 - 1e-12))
            w = np.column_stack((np.zeros(count), g))
            w /= np.linalg.norm(w, axis=1, keepdims=True)
            w *= np.sign(w @ side)[:, None] + (w @ side == 0)[:, None]
        perp = np.tanh(0.5 * k * d)[:, None] * w
        along = np.zeros((count, n))
        along[:, 0] = np.tanh(0.5 * k * t)
        local = np.array([mobius_add(a, p) for a, p in zip(along, perp)])
        return mobius_add(m, local @ rot)

    raise InvalidParams(f"unknown sample region {type(region).__name__}")
