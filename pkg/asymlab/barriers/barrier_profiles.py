"""
The explicit one-dimensional barriers of the class S, built by quadrature of
improper integrals of `A^-1`:

    scherk     g(d)  = delta + ∫_d^∞ A^-1(K0 / cosh^(n-1)(sqrt(c) t)) dt
    annulus    f(r)  = delta + ∫_1^r A^-1(sinh^(n-1)(b alpha) / sinh^(n-1)(b s)) ds
    singular   g0(d) = ∫_-∞^d A^-1(e^((n-1) sqrt(c) s)) ds

Each profile stores the exact slope (the integrand) at its nodes, and
remembers which distance Laplacian its radial ODE

    A'(|u'|) u'' + sign(u') A(|u'|) Δd = 0

is posed with.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import optimize

from asymlab.barriers.profile import Endpoint, EndpointBehavior, Profile
from asymlab.barriers.quadrature import gauss_kronrod
from asymlab.errors import BoundedOperator, InvalidParams, NoAlpha, NotRemovableType, TooFewNodes
from asymlab.geometry.hyperbolic_geometry import laplacian_distance
from asymlab.operators.operator_family import INVERT_CAP, OperatorSpec, classify, estimate_sup, invert_a

logger = logging.getLogger(__name__)

DEFAULT_NODES = 256
# the scherk table starts at this multiple of the smallest distance A^-1 can reach
SCHERK_D_MIN_FACTOR = 2.0
ALPHA_MIN = 1e-8
ALPHA_SAFETY = 0.9
ALPHA_XTOL = 1e-13


def cell_integrals(f, grid, tol):
    """
    Integral of a vectorized integrand over every cell of `grid`.

    All cells are integrated at once by 8- and 16-point Gauss-Legendre; cells
    where the two disagree by more than their share of `tol` are redone by
    adaptive Gauss-Kronrod.
    """
    lo, hi = grid[:-1], grid[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def legendre(k):
        nodes, weights = leggauss(k)
        return half * (np.asarray(f(mid[:, None] + half[:, None] * nodes[None, :])) @ weights)

    coarse, fine = legendre(8), legendre(16)
    share = tol / lo.size
    rough = np.flatnonzero(np.abs(fine - coarse) > share)
    if rough.size:
        logger.debug(f"{rough.size} of {lo.size} cells need adaptive refinement")
    for i in rough:
        fine[i], _ = gauss_kronrod(lambda t: float(f(np.asarray(t))), lo[i], hi[i], share)
    return fine


def _laplacian_meta(mode, n, c):
    return {"mode": mode, "n": int(n), "c": float(c)}


def reference_coefficient(profile: Profile):
    """The distance Laplacian `r -> Δd(r)` the profile's ODE is posed with."""
    meta = profile.metadata["laplacian"]
    return lambda r: laplacian_distance(r, meta["c"], meta["n"], meta["mode"])


def _check_model(n, c):
    if int(n) != n or n < 2:
        raise InvalidParams(f"dimension n must be an integer >= 2 (got {n})")
    if not c > 0:
        raise InvalidParams(f"curvature magnitude c must be positive (got {c})")


def scherk_profile(spec: OperatorSpec, delta, c=1.0, n=2, quad_tol=1e-10, kind="geodesic",
                   n_nodes=DEFAULT_NODES, d_min=None, classification=None):
    """
    Scherk-type barrier profile, decreasing from `+inf` at d = 0 to `delta` at infinity.

    The upper limit is truncated at the T where the lower structural bound
    `A^-1(t) <= (t/D)^(1/q)` certifies

        (2^(n-1) K0 / D)^(1/q) q / ((n-1) sqrt(c)) e^(-(n-1) sqrt(c) T / q) < quad_tol.

    `kind` is `geodesic` or `hyperplane`: the distance the profile is meant to
    be composed with. Both share the hyperplane Laplacian
    `(n-1) sqrt(c) tanh(sqrt(c) d)`, which is the exact one for geodesics in n = 2.

    The table starts at `d_min`, by default twice the distance where
    `k0 / cosh^(n-1)` reaches the inversion cap of `invert_a`.

    Raises:
        NotRemovableType: A is unbounded.
    """
    _check_model(n, c)
    if kind not in ("geodesic", "hyperplane"):
        raise InvalidParams(f"scherk kind must be `geodesic` or `hyperplane` (got `{kind}`)")
    if not math.isfinite(delta):
        raise InvalidParams("delta must be finite")
    k0 = estimate_sup(spec)
    if math.isinf(k0):
        raise NotRemovableType(f"{spec.name} is unbounded; the scherk profile needs a finite sup A")
    classification = classification or classify(spec)
    if not classification.removable:
        logger.warning(f"{spec.name} is singular type: the scherk profile stays bounded as d -> 0")

    rate = (n - 1) * math.sqrt(c)
    if d_min is None:
        d_min = SCHERK_D_MIN_FACTOR * math.acosh(INVERT_CAP ** (-1.0 / (n - 1))) / math.sqrt(c)
    if k0 / math.cosh(math.sqrt(c) * d_min) ** (n - 1) >= INVERT_CAP * k0:
        raise InvalidParams(f"d_min = {d_min:g} is too close to 0 for the inversion of A near sup A")

    def integrand(t):
        with np.errstate(over="ignore"):
            level = k0 * np.power(np.cosh(math.sqrt(c) * np.asarray(t)), -(n - 1.0))
        return invert_a(spec, level)

    q, d_bar = spec.lower_q, spec.lower_Dbar
    amplitude = (2.0 ** (n - 1) * k0 / d_bar) ** (1.0 / q) * q / rate
    t_tail = q / rate * math.log(amplitude / quad_tol)
    at_delta0 = float(spec.a(spec.lower_delta0))
    t_bound = math.acosh((k0 / at_delta0) ** (1.0 / (n - 1))) / math.sqrt(c) if k0 > at_delta0 else 0.0
    d_max = max(t_tail, t_bound, 2.0 * d_min)
    tail_bound = amplitude * math.exp(-rate * d_max / q)

    grid = np.geomspace(d_min, d_max, n_nodes)
    cells = cell_integrals(integrand, grid, quad_tol)
    values = delta + np.concatenate((np.cumsum(cells[::-1])[::-1], [0.0]))
    lo = (EndpointBehavior(Endpoint.BLOW_UP) if classification.removable
          else EndpointBehavior(Endpoint.FINITE_LIMIT, None))
    logger.info(f"scherk profile for {spec.name}: d in [{d_min:g}, {d_max:.4g}], tail <= {tail_bound:.3g}")
    return Profile(grid=grid, values=values, slopes=-integrand(grid), domain=(0.0, math.inf),
                   endpoint_lo=lo, endpoint_hi=EndpointBehavior(Endpoint.FINITE_LIMIT, float(delta)),
                   quad_tol=quad_tol, label=f"scherk[{spec.name}]",
                   metadata={"family": "scherk", "kind": kind, "delta": float(delta), "operator": spec.name,
                             "tail_bound": tail_bound, "removable": classification.removable,
                             "laplacian": _laplacian_meta("hyperplane", n, c)})


@dataclass(frozen=True)
class AnnulusBarrierSpec:
    alpha: float
    h0: float
    h1: float
    delta: float
    rho: float
    K: float
    b: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidParams(f"alpha must lie in (0, 1] (got {self.alpha})")
        if not (self.rho > 0 and self.b > 0):
            raise InvalidParams("rho and b must be positive")
        if not self.delta < self.h1 < self.h0 < self.K / 2.0 + self.delta / 2.0:
            raise InvalidParams(f"annulus constants break delta < h1 < h0 < K/2 + delta/2: "
                                f"{self.delta:.6g}, {self.h1:.6g}, {self.h0:.6g}, {self.K / 2 + self.delta / 2:.6g}")

    def to_dict(self):
        return {k: getattr(self, k) for k in ("alpha", "h0", "h1", "delta", "rho", "K", "b", "n")}


def annulus_profile(spec: OperatorSpec, delta, b=1.0, n=2, rho=1.0, K=None, quad_tol=1e-10,
                    n_nodes=DEFAULT_NODES + 1, safety=ALPHA_SAFETY, alpha_min=ALPHA_MIN):
    """
    Annulus barrier `f` on [1, 2 rho + 1] with `f(1) = delta`.

    `alpha` is the largest value in [alpha_min, 1] (found by `brentq`) with
    `f(2 rho + 1) <= delta + safety (K - delta) / 2`. For n > 2 the curvature
    is fixed to 1 and `b` is ignored.

    Returns:
        tuple: (Profile, AnnulusBarrierSpec)

    Raises:
        NoAlpha: even alpha_min breaks the ceiling.
    """
    _check_model(n, 1.0)
    if K is None or not K > delta:
        raise InvalidParams(f"annulus barrier needs K > delta (got K = {K}, delta = {delta})")
    if not rho > 0:
        raise InvalidParams(f"rho must be positive (got {rho})")
    if not b > 0:
        raise InvalidParams(f"b must be positive (got {b})")
    if n > 2 and b != 1.0:
        logger.info(f"n = {n}: annulus barrier uses curvature 1, ignoring b = {b}")
        b = 1.0
    outer = 2.0 * rho + 1.0
    ceiling = delta + safety * (K - delta) / 2.0

    def make_integrand(alpha):
        numerator = math.sinh(b * alpha) ** (n - 1)
        return lambda s: invert_a(spec, numerator / np.power(np.sinh(b * np.asarray(s)), n - 1.0))

    def top(alpha):
        if spec.bounded and math.sinh(b * alpha) ** (n - 1) / math.sinh(b) ** (n - 1) >= INVERT_CAP * spec.k0:
            return math.inf
        f = make_integrand(alpha)
        value, _ = gauss_kronrod(lambda s: float(f(s)), 1.0, outer, quad_tol)
        return delta + value

    if top(alpha_min) > ceiling:
        raise NoAlpha(f"alpha = {alpha_min:g} still gives f({outer:g}) > {ceiling:.6g}; K - delta is too small")
    if top(1.0) <= ceiling:
        alpha = 1.0
    else:
        # f(2 rho + 1) increases with alpha
        alpha = optimize.brentq(lambda a: min(top(a) - ceiling, K - delta), alpha_min, 1.0,
                                xtol=ALPHA_XTOL, rtol=4.0 * np.finfo(float).eps)
        if top(alpha) > ceiling:
            alpha = max(alpha_min, alpha - 2.0 * ALPHA_XTOL)
    logger.info(f"annulus barrier for {spec.name}: alpha = {alpha:.12g}")

    n_nodes = n_nodes | 1
    grid = np.linspace(1.0, outer, n_nodes)
    integrand = make_integrand(alpha)
    values = delta + np.concatenate(([0.0], np.cumsum(cell_integrals(integrand, grid, quad_tol))))
    barrier = AnnulusBarrierSpec(alpha=alpha, h0=float(values[-1]), h1=float(values[n_nodes // 2]),
                                 delta=float(delta), rho=float(rho), K=float(K), b=float(b), n=int(n))
    profile = Profile(grid=grid, values=values, slopes=integrand(grid), domain=(1.0, outer),
                      endpoint_lo=EndpointBehavior(Endpoint.FINITE_LIMIT, float(delta)),
                      endpoint_hi=EndpointBehavior(Endpoint.FINITE_LIMIT, barrier.h0),
                      quad_tol=quad_tol, label=f"annulus[{spec.name}]",
                      metadata={"family": "annulus", "operator": spec.name, **barrier.to_dict(),
                                "laplacian": _laplacian_meta("sphere", n, b * b)})
    return profile, barrier


def shifted_annulus_field(profile: Profile, barrier: AnnulusBarrierSpec, epsilon):
    """
    The translated annulus barrier `f + K + epsilon - h0` used against a
    bounded solution, and the gap `nu = h0 - h1 - epsilon > 0` it leaves on
    the inner sphere.
    """
    lo = barrier.h0 - barrier.h1 - (barrier.K - barrier.delta) / 2.0
    hi = barrier.h0 - barrier.h1
    if not lo <= epsilon < hi:
        raise InvalidParams(f"epsilon must lie in [{lo:.6g}, {hi:.6g}) (got {epsilon})")
    shifted = profile.shifted(barrier.K + epsilon - barrier.h0, label=f"{profile.label}+shift")
    return shifted, hi - epsilon


def singular_profile(spec: OperatorSpec, n=2, d_range=(-4.0, 4.0), quad_tol=1e-10, c=1.0,
                     n_nodes=DEFAULT_NODES):
    """
    Increasing profile `g0`, vanishing at -inf and blowing up at +inf, for
    unbounded A. The part of the integral below

        T = (q/k) ln(quad_tol k D^(1/q) / q),   k = (n-1) sqrt(c)

    is dropped (certified smaller than quad_tol by the lower structural bound).

    Raises:
        BoundedOperator: sup A is finite.
    """
    _check_model(n, c)
    lo, hi = float(d_range[0]), float(d_range[1])
    if not lo < hi:
        raise InvalidParams(f"empty profile range [{lo}, {hi}]")
    k0 = estimate_sup(spec)
    if math.isfinite(k0):
        raise BoundedOperator(f"{spec.name} is bounded by {k0:.6g}; A^-1(e^((n-1)s)) is undefined for large s")

    rate = (n - 1) * math.sqrt(c)
    q, d_bar = spec.lower_q, spec.lower_Dbar

    def integrand(s):
        return invert_a(spec, np.exp(rate * np.asarray(s)))

    t_tail = q / rate * math.log(quad_tol * rate * d_bar ** (1.0 / q) / q)
    t_bound = math.log(float(spec.a(spec.lower_delta0))) / rate
    cutoff = min(t_tail, t_bound)
    tail_bound = (math.exp(rate * cutoff) / d_bar) ** (1.0 / q) * q / rate

    head = 0.0
    if cutoff < lo:
        head = float(np.sum(cell_integrals(integrand, np.linspace(cutoff, lo, 65), quad_tol)))
    grid = np.linspace(lo, hi, n_nodes)
    values = head + np.concatenate(([0.0], np.cumsum(cell_integrals(integrand, grid, quad_tol))))
    logger.info(f"singular profile for {spec.name}: lower limit cut at {cutoff:.4g}, tail <= {tail_bound:.3g}")
    return Profile(grid=grid, values=values, slopes=integrand(grid), domain=(-math.inf, math.inf),
                   endpoint_lo=EndpointBehavior(Endpoint.DECAY_TO_ZERO),
                   endpoint_hi=EndpointBehavior(Endpoint.BLOW_UP), quad_tol=quad_tol,
                   label=f"singular[{spec.name}]",
                   metadata={"family": "singular", "operator": spec.name, "cutoff": cutoff,
                             "tail_bound": tail_bound, "laplacian": _laplacian_meta("horosphere", n, c)})


def fd_weights(z, x, order):
    """
    Finite-difference weights for the `order`-th derivative at z from the
    nodes x (Fornberg's recursion), vectorized over rows: z has shape (m,),
    x shape (m, k); returns (m, k).
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    m, k = x.shape
    c = np.zeros((m, k, order + 1))
    c[:, 0, 0] = 1.0
    c1 = np.ones(m)
    c4 = x[:, 0] - z
    for i in range(1, k):
        mn = min(i, order)
        c2 = np.ones(m)
        c5 = c4
        c4 = x[:, i] - z
        for j in range(i):
            c3 = x[:, i] - x[:, j]
            c2 = c2 * c3
            if j == i - 1:
                for d in range(mn, 0, -1):
                    c[:, i, d] = c1 * (d * c[:, i - 1, d - 1] - c5 * c[:, i - 1, d]) / c2
                c[:, i, 0] = -c1 * c5 * c[:, i - 1, 0] / c2
            for d in range(mn, 0, -1):
                c[:, j, d] = (c4 * c[:, j, d] - d * c[:, j, d - 1]) / c3
            c[:, j, 0] = c4 * c[:, j, 0] / c3
        c1 = c2
    return c[:, :, order]


def ode_residual(profile: Profile, spec: OperatorSpec, coefficient=None):
    """
    `max |A'(|u'|) u'' + sign(u') A(|u'|) coefficient(r)|` over interior nodes.

    `u'` are the stored exact slopes, `u''` their 5-point (4th order)
    finite-difference derivative on the (possibly nonuniform) grid.
    `coefficient` defaults to the profile's own distance Laplacian.
    """
    if profile.size < 5:
        raise TooFewNodes(f"ode_residual needs at least 5 nodes (profile has {profile.size})")
    coefficient = coefficient or reference_coefficient(profile)
    x, slopes = profile.grid, profile.slopes
    idx = np.arange(2, x.size - 2)
    stencil = idx[:, None] + np.arange(-2, 3)[None, :]
    second = np.sum(fd_weights(x[idx], x[stencil], 1) * slopes[stencil], axis=1)
    first = slopes[idx]
    mag = np.abs(first)
    coef = np.array([float(coefficient(r)) for r in x[idx]])
    with np.errstate(invalid="ignore", over="ignore"):
        stiff = np.where(second == 0.0, 0.0, np.asarray(spec.a_prime(mag)) * second)
        residual = np.abs(stiff + np.sign(first) * np.asarray(spec.a(mag)) * coef)
    return float(np.max(residual))
