"""
The operator class S: `Q(u) = div(A(|∇u|)/|∇u| ∇u)` with `A` obeying the
structural conditions, inversion of `A`, and the removable/singular
classification by the integral condition

    ∫_0^K0 A^-1(t) / sqrt(K0 - t) dt = +inf,   K0 = sup A.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from asymlab.barriers.quadrature import SingularEnd, improper_quadrature
from asymlab.errors import Inconclusive, InvalidParams, NoConvergence, OutOfRange, StructureViolation
from asymlab.operators.flux import Flux
from asymlab.operators.fluxes.flux_loader import build_flux

logger = logging.getLogger(__name__)

# invert_a refuses t >= INVERT_CAP * k0 for bounded A
INVERT_CAP = 1.0 - 1e-6
INVERT_TOL = 1e-12
MAX_BRACKET_EXPANSIONS = 2048


class OperatorKind(Enum):
    P_LAPLACIAN = "pLaplacian"
    MINIMAL_GRAPH = "minimalGraph"
    CUSTOM = "custom"


class OperatorClass(Enum):
    REMOVABLE = "RemovableType"
    SINGULAR = "SingularType"


@dataclass(frozen=True)
class OperatorSpec:
    """
    Immutable description of one operator of the class S.

    `k0` caches `sup A` (`math.inf` for unbounded fluxes, None when it still
    has to be estimated). `ratio_at_zero` is the limit of `A(s)/s` at 0, None
    when infinite.
    """
    kind: OperatorKind
    a: Callable
    a_prime: Callable
    growth_C: float
    growth_p: float
    lower_q: float
    lower_delta0: float
    lower_Dbar: float
    k0: float | None = None
    name: str = "custom"
    ratio_at_zero: float | None = None
    params: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_flux(cls, kind, flux: Flux, k0=None):
        return cls(kind=kind, a=flux.a, a_prime=flux.a_prime, k0=flux.sup if k0 is None else k0,
                   name=flux.name, ratio_at_zero=flux.ratio_at_zero, params=flux.params(),
                   **flux.constants)

    @property
    def bounded(self):
        return self.k0 is not None and math.isfinite(self.k0)

    def describe(self):
        return {
            "name": self.name,
            "kind": self.kind.value,
            "params": dict(self.params),
            "growth_C": self.growth_C,
            "growth_p": self.growth_p,
            "lower_q": self.lower_q,
            "lower_delta0": self.lower_delta0,
            "lower_Dbar": self.lower_Dbar,
            "k0": self.k0,
        }


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    worst_margin: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    operator: str
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class ClassificationResult:
    operator_class: OperatorClass
    k0: float
    divergence_exponent: float
    partial_integrals: tuple = ()

    @property
    def removable(self):
        return self.operator_class is OperatorClass.REMOVABLE


def make_operator(kind, params=None, n_samples=64):
    """
    Build and validate an operator.

    Args:
        kind (str | OperatorKind): `pLaplacian`, `minimalGraph`, `custom`; the
            combinators `blend` and `scaled` are reported as custom.
        params (dict): kind parameters (see `build_flux`).

    Returns:
        OperatorSpec: a spec that passed `validate_structure`.

    Raises:
        InvalidParams: bad parameters, e.g. p <= 1.
        StructureViolation: the declared constants do not hold.
    """
    kind_name = kind.value if isinstance(kind, OperatorKind) else str(kind)
    flux = build_flux(kind_name, params)
    try:
        op_kind = OperatorKind(kind_name)
    except ValueError:
        op_kind = OperatorKind.CUSTOM
    spec = OperatorSpec.from_flux(op_kind, flux)
    if spec.k0 is None:
        spec = replace(spec, k0=estimate_sup(spec))
    report = validate_structure(spec, n_samples)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures())
        raise StructureViolation(f"{spec.name} violates the structural conditions: {names}", report)
    return spec


def blend(first: OperatorSpec, second: OperatorSpec, t):
    """Convex combination `t A1 + (1-t) A2`; the class S is linearly convex."""
    params = {"first": _as_flux(first), "second": _as_flux(second), "t": t}
    return make_operator("blend", params)


def scaled(spec: OperatorSpec, lam):
    """The operator with flux `lam * A`."""
    return make_operator("scaled", {"base": _as_flux(spec), "lam": lam})


def _as_flux(spec):
    return build_flux("custom", {
        "a": spec.a, "a_prime": spec.a_prime, "k0": spec.k0, "name": spec.name,
        "ratio_at_zero": spec.ratio_at_zero,
        "growth_C": spec.growth_C, "growth_p": spec.growth_p, "lower_q": spec.lower_q,
        "lower_delta0": spec.lower_delta0, "lower_Dbar": spec.lower_Dbar,
    })


def invert_a(spec: OperatorSpec, t, tol=INVERT_TOL, max_iter=200):
    """
    Solve `A(s) = t` for s >= 0; works elementwise on arrays.

    The root is bracketed by geometric expansion from the lower-bound hint
    `(t/D)^(1/q)` and then polished by Newton steps on `a_prime`, falling back
    to bisection whenever a step leaves the bracket.

    Raises:
        OutOfRange: t < 0, or t >= INVERT_CAP * k0 for bounded A.
        NoConvergence: |A(s) - t| > tol * max(1, t) after the iteration cap.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(~np.isfinite(t_arr)):
        raise OutOfRange(f"A^-1 is defined on [0, k0); got t = {np.min(t_arr):.6g}")
    if spec.bounded and np.any(t_arr >= INVERT_CAP * spec.k0):
        raise OutOfRange(f"t = {np.max(t_arr):.17g} too close to k0 = {spec.k0:.17g} for {spec.name}")

    flat = np.atleast_1d(t_arr).ravel()
    s = np.zeros_like(flat)
    positive = flat > 0
    if np.any(positive):
        s[positive] = _newton_invert(spec, flat[positive], tol, max_iter)
    if t_arr.ndim == 0:
        return float(s[0])
    return s.reshape(t_arr.shape)


def _newton_invert(spec, t, tol, max_iter):
    hint = np.power(t / spec.lower_Dbar, 1.0 / spec.lower_q)
    hi = np.maximum(hint, np.finfo(float).tiny)
    lo = np.zeros_like(t)
    for _ in range(MAX_BRACKET_EXPANSIONS):
        short = spec.a(hi) < t
        if not np.any(short):
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2.0 * hi, hi)
    else:
        raise NoConvergence(f"could not bracket A^-1 for {spec.name}")

    s = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f = spec.a(s) - t
        lo = np.where(f < 0, s, lo)
        hi = np.where(f > 0, s, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = s - f / spec.a_prime(s)
        inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
        s_new = np.where(f == 0, s, np.where(inside, newton, 0.5 * (lo + hi)))
        done = np.abs(s_new - s) <= 4.0 * np.finfo(float).eps * np.maximum(s_new, np.finfo(float).tiny)
        s = s_new
        if np.all(done):
            break

    residual = np.abs(spec.a(s) - t)
    if np.any(residual > tol * np.maximum(1.0, t)):
        worst = int(np.argmax(residual))
        raise NoConvergence(f"A^-1({t[worst]:.6g}) for {spec.name}: residual {residual[worst]:.3g}",
                            best=s)
    return s


def validate_structure(spec: OperatorSpec, n_samples=64, s_max=1e3, rtol=1e-12):
    """
    Check the structural conditions on log-spaced samples of (0, s_max].

    Strict inequalities are checked as >= / <= with a relative tolerance; the
    worst margin of each condition is reported. Failures are report entries,
    never exceptions.
    """
    if n_samples < 16:
        raise InvalidParams(f"n_samples must be at least 16 (got {n_samples})")
    s = np.logspace(-6.0, math.log10(s_max), n_samples)
    checks = []

    with np.errstate(all="ignore"):
        values = np.asarray(spec.a(s), dtype=float)
        slopes = np.asarray(spec.a_prime(s), dtype=float)
        at_zero = float(spec.a(0.0))
        increments = np.diff(values)
        margin = float(min(np.min(slopes), np.min(increments)))
        ok = at_zero == 0.0 and bool(np.all(slopes > 0)) and bool(np.all(increments > 0))
        checks.append(ConditionCheck("zero_and_monotone", ok, margin,
                                     f"A(0) = {at_zero:.3g}, min A' = {np.min(slopes):.3g}"))

        bound = spec.growth_C * (np.power(s, spec.growth_p - 1.0) + 1.0)
        gap = bound - values
        checks.append(ConditionCheck("growth_bound", bool(np.all(gap >= -rtol * bound)),
                                     float(np.min(gap)), f"C = {spec.growth_C:g}, p = {spec.growth_p:g}"))

        s_low = spec.lower_delta0 * np.logspace(-6.0, 0.0, n_samples)
        floor = spec.lower_Dbar * np.power(s_low, spec.lower_q)
        gap = np.asarray(spec.a(s_low), dtype=float) - floor
        checks.append(ConditionCheck("lower_bound", bool(np.all(gap >= -rtol * floor)),
                                     float(np.min(gap)),
                                     f"D = {spec.lower_Dbar:g}, q = {spec.lower_q:g}, delta0 = {spec.lower_delta0:g}"))

    checks.append(_check_sup(spec, values))
    return ValidationReport(spec.name, tuple(checks))


def _check_sup(spec, values):
    try:
        k0 = estimate_sup(spec)
    except Inconclusive as e:
        return ConditionCheck("sup_consistency", False, math.nan, str(e))
    if math.isinf(k0):
        return ConditionCheck("sup_consistency", bool(np.all(np.isfinite(values))), math.inf, "A unbounded")
    below = k0 - values
    decades = np.asarray(spec.a(10.0 ** np.arange(0, 13)), dtype=float)
    gaps = k0 - decades
    approaching = bool(np.all(np.diff(gaps) <= 0)) and gaps[-1] <= 1e-3 * k0
    ok = bool(np.all(below > 0)) and approaching
    return ConditionCheck("sup_consistency", ok, float(np.min(below)),
                          f"k0 = {k0:.17g}, gap at s = 1e12: {gaps[-1]:.3g}")


def estimate_sup(spec: OperatorSpec, growth_tol=1e-6, power_threshold=0.05):
    """
    Return `sup A`: the declared k0 if any, otherwise an estimate from A(10^k), k = 0..12.

    A local power-law exponent above `power_threshold` over the last decades
    means unbounded (`math.inf`); relative growth below `growth_tol` means
    saturation, and the limit is extrapolated by Richardson in 1/s.

    Raises:
        Inconclusive: growth is too slow to call unbounded but does not saturate.
    """
    if spec.k0 is not None:
        return spec.k0
    with np.errstate(all="ignore"):
        values = np.asarray(spec.a(10.0 ** np.arange(0, 13)), dtype=float)
    if not np.all(np.isfinite(values)):
        return math.inf
    powers = np.log10(values[1:] / values[:-1])
    if np.all(powers[-3:] >= power_threshold):
        return math.inf
    if values[-1] / values[-2] - 1.0 <= growth_tol:
        return float(max((10.0 * values[-1] - values[-2]) / 9.0, values[-1]))
    raise Inconclusive(f"{spec.name}: A grows like s^{powers[-1]:.3g} near s = 1e12, "
                       "neither saturating nor clearly unbounded", exponent=float(powers[-1]))


def classify(spec: OperatorSpec, quad_tol=1e-10, depth=24, band=0.05):
    """
    Removable type iff `∫_0^K0 A^-1(t)/sqrt(K0 - t) dt` diverges.

    Unbounded fluxes are singular type outright (the integral condition forces
    K0 = sup A finite). Otherwise the integral is evaluated on dyadic cutoffs
    `K0 (1 - 2^-j)`; the local exponent of the integrand fitted on the last 4
    cutoffs decides: beta >= 1 - band diverges.
    """
    k0 = estimate_sup(spec)
    if math.isinf(k0):
        logger.info(f"{spec.name}: A unbounded, singular type")
        return ClassificationResult(OperatorClass.SINGULAR, k0, math.nan, ())

    def integrand(t):
        return invert_a(spec, t) / math.sqrt(k0 - t)

    outcome = improper_quadrature(integrand, (0.0, k0), SingularEnd.HI, tol=quad_tol,
                                  depth=depth, fit_points=4, band=band)
    verdict = OperatorClass.REMOVABLE if outcome.divergent else OperatorClass.SINGULAR
    logger.info(f"{spec.name}: exponent {outcome.exponent:.4f}, {verdict.value}")
    return ClassificationResult(verdict, k0, outcome.exponent, outcome.partial_integrals)
