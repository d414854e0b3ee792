"""
Dirichlet problems for `Q(u) = div(A(|∇u|)/|∇u| ∇u) = 0`.

Radial problems are solved through the first integral
`A(u') J(r) = K` (J = sinh^(n-1)(sqrt(c) r), or e^(-(n-1) sqrt(c) r) in
horospherical coordinates) by a safeguarded Newton iteration on K.

Disk problems use a finite-volume scheme on the polar grid of `DiskGrid`. In
its grid coordinates w the metric of H^2(-c) is conformal, `ds = mu(w) |dw|`,
so `Q(u) = mu^-2 div_w(a(|∇_w u| / mu) ∇_w u)` with `a(s) = A(s)/s`. Cells
are the polygons cut by the ray bisectors and by the chords between ring
mid-levels; every face carries the flux `l a(s) g_p` where g_p is the
two-point gradient across the face, g_t the gradient along it from the
neighbouring nodes, and `s = sqrt((g_p^2 + g_t^2) / mu^2 + eps^2)`. Both are
exact for affine functions of w. The nonlinear system is solved by damped
Newton steps with an analytic sparse Jacobian.
"""
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonlines
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from asymlab.barriers.barrier_profiles import cell_integrals, singular_profile
from asymlab.barriers.profile import Endpoint
from asymlab.errors import (BoundaryOrderViolated, DimensionMismatch, IllConditioned, InvalidParams,
                            NoConvergence)
from asymlab.fields.field_synthesis import DistanceKind, Model, ScalarField, compose_field
from asymlab.geometry.hyperbolic_geometry import Horosphere, IdealPoint, Point, from_geodesic_polar
from asymlab.operators.operator_family import INVERT_CAP, OperatorSpec, estimate_sup, invert_a
from asymlab.solver.grids import DiskGrid, RadialGrid

logger = logging.getLogger(__name__)

MIN_STEP = 2.0 ** -20
ARMIJO = 1e-4
GRADIENT_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class SolverResult:
    values: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    damping_history: tuple
    grid: object
    tol: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.converged and not self.residual_norm <= self.tol:
            raise InvalidParams(f"converged result with residual {self.residual_norm:.3g} > tol {self.tol:.3g}")

    def nodes(self):
        """(r, theta, value) rows; theta is 0 for radial results."""
        if isinstance(self.grid, RadialGrid):
            r = self.grid.nodes
            return np.column_stack((r, np.zeros_like(r), self.values))
        r, theta = self.grid.polar()
        return np.column_stack((r.ravel(), theta.ravel(), self.values.ravel()))

    def to_csv(self, path):
        np.savetxt(path, self.nodes(), delimiter=",", header="r,theta,value", comments="", fmt="%.17g")

    def describe(self):
        return {"grid": self.grid.describe(), "tol": self.tol, "residual_norm": self.residual_norm,
                "iterations": self.iterations, "converged": self.converged,
                "damping_history": list(self.damping_history), **self.metadata}

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.describe(), indent=2))


def _radial_weight(grid, n, c):
    k = math.sqrt(c)
    if grid.horospherical:
        return lambda r: np.exp(-(n - 1) * k * np.asarray(r))
    return lambda r: np.power(np.sinh(k * np.asarray(r)), n - 1.0)


def solve_radial_bvp(spec: OperatorSpec, n, c, grid: RadialGrid, u_lo, u_hi, tol=1e-8, max_iter=100):
    """
    Monotone radial solution with `u(r0) = u_lo`, `u(r1) = u_hi`.

    The flux constant K is found by Newton steps on
    `F(K) = ∫ A^-1(K/J(r)) dr - |u_hi - u_lo|`, kept inside the bracket
    `(0, K_max)` by Armijo backtracking and bisection.

    Raises:
        NoConvergence: no K reaches the data (a bounded flux cannot climb
            arbitrarily steep radial data) or the iteration cap is hit.
    """
    nodes = grid.nodes
    if not (math.isfinite(u_lo) and math.isfinite(u_hi)):
        raise InvalidParams("radial boundary values must be finite")
    if u_lo == u_hi:
        return SolverResult(np.full(nodes.size, float(u_lo)), 0.0, 0, True, (), grid, tol)

    sign = math.copysign(1.0, u_hi - u_lo)
    gap = abs(u_hi - u_lo)
    weight = _radial_weight(grid, n, c)
    quad_tol = 1e-3 * tol

    def mismatch(k):
        return float(np.sum(cell_integrals(lambda r: invert_a(spec, k / weight(r)), nodes, quad_tol))) - gap

    def slope_of_mismatch(k):
        def integrand(r):
            w = weight(r)
            return 1.0 / (np.asarray(spec.a_prime(invert_a(spec, k / w))) * w)
        return float(np.sum(cell_integrals(integrand, nodes, quad_tol)))

    lo = 0.0
    k0 = estimate_sup(spec)
    if math.isfinite(k0):
        hi = INVERT_CAP * (1.0 - 1e-12) * k0 * float(np.min(weight(nodes)))
        if mismatch(hi) < 0:
            raise NoConvergence(f"{spec.name}: radial data with jump {gap:.6g} is too steep for sup A = {k0:.6g}")
    else:
        hi = float(spec.a(gap / (grid.r1 - grid.r0))) * float(np.max(weight(nodes)))
        while mismatch(hi) < 0:
            lo, hi = hi, 2.0 * hi

    k = 0.5 * (lo + hi)
    f = mismatch(k)
    damping = []
    history = [abs(f)]
    for it in range(1, max_iter + 1):
        if abs(f) <= tol:
            break
        lo, hi = (k, hi) if f < 0 else (lo, k)
        step = -f / slope_of_mismatch(k)
        t = 1.0
        while t >= MIN_STEP:
            trial = k + t * step
            if lo < trial < hi:
                f_trial = mismatch(trial)
                if abs(f_trial) <= (1.0 - ARMIJO * t) * abs(f):
                    break
            t *= 0.5
        else:
            t = 0.0
            trial = 0.5 * (lo + hi)
            f_trial = mismatch(trial)
        k, f = trial, f_trial
        damping.append(t)
        history.append(abs(f))
        logger.debug(f"radial newton {it}: K = {k:.17g}, |F| = {abs(f):.3g}, step {t:g}")
    if abs(f) > tol:
        raise NoConvergence(f"radial BVP for {spec.name} did not reach {tol:g} in {max_iter} iterations",
                            best=k, history=history)

    cells = cell_integrals(lambda r: invert_a(spec, k / weight(r)), nodes, quad_tol)
    values = u_lo + sign * np.concatenate(([0.0], np.cumsum(cells)))
    logger.info(f"radial BVP for {spec.name}: K = {k:.12g} after {len(damping)} iterations")
    return SolverResult(values, abs(f), len(damping), True, tuple(damping), grid, tol,
                        {"flux_constant": k, "operator": spec.name})


@dataclass(frozen=True)
class _Faces:
    left: np.ndarray
    right: np.ndarray
    length: np.ndarray
    scale: np.ndarray
    gp_idx: np.ndarray
    gp_coef: np.ndarray
    gt_idx: np.ndarray
    gt_coef: np.ndarray


def _disk_faces(grid: DiskGrid):
    nr, nt = grid.n_r, grid.n_theta
    lev = grid.levels
    mid = 0.5 * (lev[:-1] + lev[1:])
    half = 0.5 * grid.dtheta
    tan_h, sin_h, cos_h = math.tan(half), math.sin(half), math.cos(half)

    def node(i, j):
        return np.where(i == 0, 0, 1 + (i - 1) * nt + np.mod(j, nt))

    # chords between rings i and i+1 (ring 0 is the centre)
    i, j = (a.ravel() for a in np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij"))
    ones = np.ones(i.shape)
    # the centre has no tangential difference, ring i+1 alone carries g_t there
    chord_in = 2.0 * math.sin(grid.dtheta) * np.where(i == 0, 1.0, lev[i])
    inner = np.where(i == 0, 0.0, 0.5) / chord_in
    outer = np.where(i == 0, 1.0, 0.5) / (2.0 * math.sin(grid.dtheta) * lev[i + 1])
    radial = _Faces(
        left=node(i, j), right=node(i + 1, j), length=2.0 * mid[i] * tan_h,
        scale=grid.metric_factor(mid[i] * np.exp(1j * grid.angles[j])),
        gp_idx=np.column_stack((node(i + 1, j), node(i, j))),
        gp_coef=np.column_stack((ones, -ones)) / (lev[i + 1] - lev[i])[:, None],
        gt_idx=np.column_stack((node(i, j + 1), node(i, j - 1), node(i + 1, j + 1), node(i + 1, j - 1))),
        gt_coef=np.column_stack((inner, -inner, outer, -outer)),
    )

    # ray segments between angles j and j+1 on interior rings
    i, j = (a.ravel() for a in np.meshgrid(np.arange(1, nr), np.arange(nt), indexing="ij"))
    ones = np.ones(i.shape)
    span = (lev[i + 1] - lev[i - 1])[:, None]
    angular = _Faces(
        left=node(i, j), right=node(i, j + 1), length=(mid[i] - mid[i - 1]) / cos_h,
        scale=grid.metric_factor(0.5 * (mid[i] + mid[i - 1]) / cos_h * np.exp(1j * (grid.angles[j] + half))),
        gp_idx=np.column_stack((node(i, j + 1), node(i, j))),
        gp_coef=np.column_stack((ones, -ones)) / (2.0 * sin_h * lev[i])[:, None],
        gt_idx=np.column_stack((node(i + 1, j), node(i - 1, j), node(i + 1, j + 1), node(i - 1, j + 1))),
        gt_coef=np.column_stack((ones, -ones, ones, -ones)) / (2.0 * cos_h * span),
    )
    return _Faces(*(np.concatenate((getattr(radial, k), getattr(angular, k)))
                    for k in _Faces.__dataclass_fields__))


class _DiskProblem:
    def __init__(self, spec, grid, data, eps):
        self.spec = spec
        self.grid = grid
        self.data = data
        self.eps = eps
        self.faces = _disk_faces(grid)
        self.n_unknown = 1 + (grid.n_r - 1) * grid.n_theta
        self.n_total = self.n_unknown + grid.n_theta
        centre, rings = grid.cell_areas()
        self.areas = np.concatenate(([centre], rings.ravel()))

    def full(self, u):
        return np.concatenate((u, self.data))

    def _gradients(self, v):
        fc = self.faces
        gp = np.sum(fc.gp_coef * v[fc.gp_idx], axis=1)
        gt = np.sum(fc.gt_coef * v[fc.gt_idx], axis=1)
        s = np.sqrt((gp * gp + gt * gt) / (fc.scale * fc.scale) + self.eps * self.eps)
        return gp, gt, s

    def _scatter(self, flux):
        fc = self.faces
        out = (np.bincount(fc.left, flux, minlength=self.n_total)
               - np.bincount(fc.right, flux, minlength=self.n_total))
        return out[:self.n_unknown]

    def residual(self, u):
        gp, _, s = self._gradients(self.full(u))
        return self._scatter(self.faces.length * np.asarray(self.spec.a(s)) / s * gp)

    def norm(self, u):
        return float(np.max(np.abs(self.residual(u) / self.areas)))

    def _matrix(self, cols, vals):
        fc = self.faces
        rows = np.concatenate((np.repeat(fc.left, cols.shape[1]), np.repeat(fc.right, cols.shape[1])))
        cols = np.concatenate((cols.ravel(), cols.ravel()))
        vals = np.concatenate((vals.ravel(), -vals.ravel()))
        keep = rows < self.n_unknown
        return coo_matrix((vals[keep], (rows[keep], cols[keep])),
                          shape=(self.n_unknown, self.n_total)).tocsr()

    def jacobian(self, u):
        fc = self.faces
        gp, gt, s = self._gradients(self.full(u))
        a_val = np.asarray(self.spec.a(s))
        ratio = a_val / s
        bend = (np.asarray(self.spec.a_prime(s)) * s - a_val) / (s ** 3 * fc.scale * fc.scale)
        d_gp = fc.length * (ratio + bend * gp * gp)
        d_gt = fc.length * bend * gt * gp
        cols = np.concatenate((fc.gp_idx, fc.gt_idx), axis=1)
        vals = np.concatenate((d_gp[:, None] * fc.gp_coef, d_gt[:, None] * fc.gt_coef), axis=1)
        return self._matrix(cols, vals)[:, :self.n_unknown]

    def picard(self, u, frozen=True):
        """Solve the linear problem with `A(s)/s` frozen at u (or equal to 1)."""
        fc = self.faces
        if frozen:
            _, _, s = self._gradients(self.full(u))
            ratio = np.asarray(self.spec.a(s)) / s
        else:
            ratio = np.ones_like(fc.length)
        m = self._matrix(fc.gp_idx, (fc.length * ratio)[:, None] * fc.gp_coef)
        rhs = -(m[:, self.n_unknown:] @ self.data)
        return _solve(m[:, :self.n_unknown], rhs)

    def values(self, u):
        g = self.grid
        rows = [np.full(g.n_theta, u[0]), *u[1:].reshape(g.n_r - 1, g.n_theta), self.data]
        return np.vstack(rows)


def _solve(matrix, rhs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            out = spsolve(matrix.tocsc(), rhs)
        except (MatrixRankWarning, RuntimeError) as e:
            raise IllConditioned(f"sparse solve failed: {e}")
    if not np.all(np.isfinite(out)):
        raise IllConditioned("sparse solve returned non-finite values")
    return out


def _boundary_values(grid, boundary_data):
    if callable(boundary_data):
        data = np.asarray(boundary_data(grid.boundary_angles()), dtype=float)
    else:
        data = np.asarray(boundary_data, dtype=float)
    data = np.broadcast_to(data, (grid.n_theta,)).astype(float)
    if not np.all(np.isfinite(data)):
        raise InvalidParams("boundary data must be finite")
    return data


def solve_disk(spec: OperatorSpec, grid: DiskGrid, boundary_data, tol=1e-8, max_iter=50,
               eps_rel=GRADIENT_EPS):
    """
    Dirichlet problem on the disk of radius `grid.r_trunc` with data on its circle.

    `tol` bounds the max-norm of the cell-averaged `Q(u)` relative to
    `max(1, max|data|)`; the result records the absolute bound.

    Newton steps are damped by Armijo backtracking (factor 1/2, down to
    2^-20) on the max-norm of the cell-averaged `Q(u)`; when the Newton
    matrix is singular or no step is accepted a Picard step (frozen
    `A(s)/s`) is tried instead.

    Returns:
        SolverResult: values of shape (n_r + 1, n_theta).

    Raises:
        NoConvergence: carries the best iterate (values array) and the residual history.
        IllConditioned: both the Newton and the Picard systems are singular.
    """
    data = _boundary_values(grid, boundary_data)
    spread = float(np.max(data) - np.min(data))
    eps = eps_rel * max(spread / grid.r_trunc, 1.0)
    tol = tol * max(1.0, float(np.max(np.abs(data))))
    problem = _DiskProblem(spec, grid, data, eps)

    if spread == 0.0:
        u = np.full(problem.n_unknown, data[0])
    else:
        u = problem.picard(None, frozen=False)
    norm = problem.norm(u)
    damping, history = [], [norm]
    iterations = 0
    while norm > tol and iterations < max_iter:
        iterations += 1
        accepted = None
        try:
            delta = _solve(problem.jacobian(u), -problem.residual(u))
            t = 1.0
            while t >= MIN_STEP:
                trial = u + t * delta
                trial_norm = problem.norm(trial)
                if trial_norm <= (1.0 - ARMIJO * t) * norm:
                    accepted = (trial, trial_norm, t)
                    break
                t *= 0.5
        except IllConditioned as e:
            logger.warning(f"🔴 newton matrix singular at iteration {iterations} ({e}), trying a Picard step")
        if accepted is None:
            trial = problem.picard(u)
            trial_norm = problem.norm(trial)
            if trial_norm >= norm:
                raise NoConvergence(f"disk solve for {spec.name} stalled at residual {norm:.3g}",
                                    best=problem.values(u), history=history)
            logger.warning(f"picard step at iteration {iterations}: residual {norm:.3g} -> {trial_norm:.3g}")
            accepted = (trial, trial_norm, 0.0)
        u, norm, t = accepted
        damping.append(t)
        history.append(norm)
        logger.debug(f"disk newton {iterations}: residual {norm:.3g}, step {t:g}")

    if norm > tol:
        raise NoConvergence(f"disk solve for {spec.name} stopped at residual {norm:.3g} after {iterations} "
                            f"iterations", best=problem.values(u), history=history)
    logger.info(f"disk solve for {spec.name}: residual {norm:.3g} after {iterations} iterations")
    return SolverResult(problem.values(u), norm, iterations, True, tuple(damping), grid, tol,
                        {"operator": spec.name, "gradient_eps": eps, "residual_history": history})


ANNULUS_SAMPLES = (17, 512)


def annulus_points(r_range, c=1.0, around=0.0, samples=ANNULUS_SAMPLES):
    """Ball coordinates of a geodesic polar sample of `r_range[0] <= r <= r_range[1]`, shape (m, 2)."""
    r = np.linspace(r_range[0], r_range[1], samples[0])
    theta = around + 2.0 * math.pi * np.arange(samples[1]) / samples[1]
    return from_geodesic_polar(r[:, None], theta[None, :], c).reshape(-1, 2)


def disk_sup(result: SolverResult, r_range, around=0.0):
    """Sup over the annulus `r_range` of the piecewise-linear interpolant of a disk solution."""
    grid = result.grid
    points = annulus_points(r_range, grid.c, around)
    return float(np.max(grid.interpolator(result.values)(points)))


@dataclass(frozen=True)
class ProbeEntry:
    R: float
    width: float | None
    sup: float | None
    converged: bool
    iterations: int
    residual_norm: float
    oracle_sup: float | None = None

    @property
    def oracle_error(self):
        if self.oracle_sup is None or self.sup is None:
            return None
        return abs(self.sup - self.oracle_sup)

    def to_dict(self):
        return {"R": self.R, "width": self.width, "sup": self.sup, "converged": self.converged,
                "iterations": self.iterations, "residual_norm": self.residual_norm,
                "oracle_sup": self.oracle_sup, "oracle_error": self.oracle_error}


@dataclass(frozen=True)
class ProbeReport:
    operator: str
    mode: str
    plateau: float | None
    annulus: tuple
    entries: tuple

    @property
    def sups(self):
        return np.array([e.sup if e.sup is not None else np.nan for e in self.entries])

    def increments(self):
        return np.diff(self.sups)

    def stabilized(self, tol):
        inc = self.increments()
        return inc.size > 0 and abs(inc[-1]) <= tol

    def to_list(self):
        return [e.to_dict() for e in sorted(self.entries, key=lambda e: e.R)]

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_list(), indent=2))

    def append_jsonl(self, path, stamp=None):
        with jsonlines.open(path, mode="a") as writer:
            for row in self.to_list():
                writer.write({"operator": self.operator, "mode": self.mode, "stamp": stamp, **row})


def _angular_distance(theta, theta0):
    return np.abs(np.angle(np.exp(1j * (np.asarray(theta) - theta0))))


SPIKE_WIDTH_RULES = ("horoball", "inverse")


def spike_width(R, c=1.0, rule="horoball"):
    """
    Angular half-width of the spike arc on the circle of radius R.

    `horoball`: the arc inside the horoball at the ideal point through
    distance `ln cosh(sqrt(c) R)/sqrt(c)` on its axis, `2 arctan(exp(-sqrt(c) R))`.
    `inverse`: `2/R`.
    """
    if rule not in SPIKE_WIDTH_RULES:
        raise InvalidParams(f"unknown spike width rule `{rule}`")
    if rule == "inverse":
        return 2.0 / R
    return 2.0 * math.atan(math.exp(-math.sqrt(c) * R))


def spike_data(grid: DiskGrid, p: IdealPoint, plateau, width):
    """`plateau` on the boundary nodes within angular distance `width` of p's direction, 0 elsewhere."""
    theta_p = math.atan2(p.xi[1], p.xi[0])
    near = _angular_distance(grid.boundary_angles(), theta_p) <= width * (1.0 + 1e-9)
    return np.where(near, float(plateau), 0.0)


def removability_probe(spec: OperatorSpec, p1: IdealPoint, plateau, R_sequence, grid_params=None,
                       mode="spike", annulus=(0.5, 1.5), tol=1e-8, max_workers=None, width_rule="horoball"):
    """
    Solve on disks of growing radius with data concentrating at `p1` and
    report the sup of each solution on the fixed annulus `annulus`.

    `spike` data equals `plateau` on the arc of half-width
    `spike_width(R, c, width_rule)` around p1's direction and 0 elsewhere.
    `trace` data is the trace of the exact singular solution `g0 ∘ busemann`
    (horosphere at p1 through the origin, unbounded A only); its entries also
    carry the oracle sup of `g0 ∘ busemann` on the same annulus samples.

    Every disk is recentred towards p1 (`DiskGrid.puncture`), so the data
    near p1 is resolved at every R.

    `grid_params`: `radial_density` (rings per unit radius) and `n_theta`.
    """
    if p1.n != 2:
        raise DimensionMismatch("removability probe works in H^2")
    R_sequence = [float(r) for r in R_sequence]
    if not R_sequence or np.any(np.diff(R_sequence) <= 0):
        raise InvalidParams("R_sequence must be non-empty and increasing")
    if mode not in ("spike", "trace"):
        raise InvalidParams(f"unknown probe mode `{mode}`")
    if width_rule not in SPIKE_WIDTH_RULES:
        raise InvalidParams(f"unknown spike width rule `{width_rule}`")
    if mode == "spike" and not plateau >= 0:
        raise InvalidParams(f"plateau must be non-negative (got {plateau})")
    params = {"radial_density": 12, "n_theta": 64, "c": 1.0, **(grid_params or {})}
    theta_p = math.atan2(p1.xi[1], p1.xi[0])
    samples = annulus_points(annulus, params["c"], theta_p)

    exact = None
    if mode == "trace":
        top = R_sequence[-1] + 1.0
        profile = singular_profile(spec, n=2, d_range=(-top, top), c=params["c"], n_nodes=2048)
        horosphere = Horosphere(p1, Point((0.0, 0.0), params["c"]))
        exact = compose_field(profile, DistanceKind.HOROSPHERICAL, horosphere, Model(2, params["c"]))

    def one(R):
        grid = DiskGrid(R, max(8, int(round(R * params["radial_density"]))), params["n_theta"],
                        params["c"], p1)
        if mode == "spike":
            width = spike_width(R, params["c"], width_rule)
            data = spike_data(grid, p1, plateau, width)
        else:
            width = None
            data = exact(grid.ball_coords()[-1])
        try:
            result = solve_disk(spec, grid, data, tol=tol)
        except NoConvergence as e:
            logger.warning(f"🔴 probe at R = {R:g} did not converge: {e}")
            return ProbeEntry(R, width, None, False, 0, math.nan)
        oracle = None if exact is None else float(np.max(exact(samples)))
        sup = float(np.max(grid.interpolator(result.values)(samples)))
        return ProbeEntry(R, width, sup, True, result.iterations, result.residual_norm, oracle)

    if max_workers:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            entries = list(pool.map(one, R_sequence))
    else:
        entries = [one(R) for R in R_sequence]
    for e in entries:
        logger.info(f"probe R = {e.R:g}: sup = {e.sup}")
    return ProbeReport(spec.name, mode, None if mode == "trace" else float(plateau), tuple(annulus),
                       tuple(entries))


@dataclass(frozen=True)
class ComparisonReport:
    passed: bool
    worst_margin: float
    allowance: float
    worst_node: tuple

    def to_dict(self):
        return {"passed": self.passed, "worst_margin": self.worst_margin, "allowance": self.allowance,
                "worst_node": list(self.worst_node)}


def _field_on_disk(v: ScalarField, grid: DiskGrid):
    coords = grid.ball_coords()
    d = v.distance(coords)
    profile = v.profile
    lo, hi = profile.grid[0], profile.grid[-1]
    # points where the profile blows up are +/- inf for comparison purposes
    out = np.empty(d.shape)
    inside = (d >= lo) & (d <= hi)
    out[inside] = v.sign * profile(d[inside])
    for mask, end, behavior in ((d < lo, 0, profile.endpoint_lo), (d > hi, -1, profile.endpoint_hi)):
        if not np.any(mask):
            continue
        if behavior.kind is Endpoint.BLOW_UP:
            out[mask] = v.sign * math.copysign(math.inf, profile.values[end] - profile.values[-1 - end])
        else:
            out[mask] = v.sign * profile(d[mask])
    return out


def comparison_check(u: SolverResult, v, domain=None, allowance=None):
    """
    Check `v >= u - allowance` on the nodes of `domain` after verifying
    `v >= u` on its discrete boundary.

    Args:
        u (SolverResult): a disk solution.
        v (ScalarField | SolverResult): the comparison function.
        domain (callable): `(r, theta) -> bool` mask of nodes; default the whole disk.
        allowance (float): discretization allowance, default `h^2 max(1, max|u|)`.

    Raises:
        BoundaryOrderViolated: `v < u` somewhere on the boundary of the domain.
    """
    grid = u.grid
    if isinstance(v, SolverResult):
        if v.values.shape != u.values.shape:
            raise DimensionMismatch("comparison of solutions on different grids")
        v_vals = v.values
    else:
        v_vals = _field_on_disk(v, grid)
    r, theta = grid.polar()
    mask = np.ones(u.values.shape, bool) if domain is None else np.asarray(domain(r, theta), bool)

    outer = np.vstack((mask[1:], np.zeros((1, mask.shape[1]), bool)))
    inner = np.vstack((np.ones((1, mask.shape[1]), bool), mask[:-1]))
    neighbours_in = outer & inner & np.roll(mask, 1, axis=1) & np.roll(mask, -1, axis=1)
    boundary = mask & ~neighbours_in
    interior = mask & ~boundary
    scale = max(1.0, float(np.max(np.abs(u.values))))
    with np.errstate(invalid="ignore"):
        gap = v_vals - u.values
    edge_gap = np.where(boundary, gap, np.inf)
    if np.min(edge_gap) < -1e-12 * scale:
        worst = np.unravel_index(int(np.argmin(edge_gap)), gap.shape)
        raise BoundaryOrderViolated(f"v < u by {-np.min(edge_gap):.3g} on the domain boundary at "
                                    f"(r, theta) = ({r[worst]:.4g}, {theta[worst]:.4g})",
                                    worst=float(np.min(edge_gap)))
    allowance = grid.h ** 2 * scale if allowance is None else allowance
    inner_gap = np.where(interior, gap, np.inf)
    worst = np.unravel_index(int(np.argmin(inner_gap)), gap.shape)
    margin = float(inner_gap[worst]) if np.any(interior) else 0.0
    return ComparisonReport(margin >= -allowance, margin, allowance, (float(r[worst]), float(theta[worst])))


def max_principle_gap(result: SolverResult, allowance=0.0):
    """How far the solution leaves [min data, max data] (<= 0 when the discrete maximum principle holds)."""
    data = result.values[-1]
    over = np.max(result.values) - np.max(data)
    under = np.min(data) - np.min(result.values)
    return float(max(over, under) - allowance)
