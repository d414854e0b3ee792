"""
Improper-integral engine shared by the classification integral and the
barrier profiles.

Finite singular ends are approached through dyadic panels
[L 2^-(j+1), L 2^-j] (distance u to the singular end), each integrated by
adaptive Gauss-Kronrod (QUADPACK through `scipy.integrate.quad`). After every
panel the local exponent beta of `f ~ u^-beta` is refitted on the last few
panel boundaries; beta >= 1 - band means divergence, otherwise the remaining
tail is closed with the fitted power law. Infinite ends use doubling panels
and the mirrored criterion `f ~ w^-beta`, beta > 1 + band.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from asymlab.errors import Inconclusive, InvalidParams

logger = logging.getLogger(__name__)

QUAD_LIMIT = 200
# t = end + u is trusted while u stays this many ulps away from `end`
RESOLUTION = 1e4 * np.finfo(float).eps


class SingularEnd(Enum):
    NONE = "none"
    LO = "lo"
    HI = "hi"


@dataclass(frozen=True)
class QuadratureOutcome:
    value: float | None
    divergent: bool
    exponent: float | None
    error: float
    partial_integrals: tuple = ()

    @property
    def converged(self):
        return not self.divergent


def gauss_kronrod(f, a, b, tol):
    """Adaptive Gauss-Kronrod on a finite or infinite interval; returns (value, error)."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, error = quad(f, a, b, epsabs=tol, epsrel=1e-13, limit=QUAD_LIMIT)
    for w in caught:
        logger.debug(f"quad on [{a:.6g}, {b:.6g}]: {w.message}")
    return value, error


def improper_quadrature(integrand, interval, singular_end=SingularEnd.NONE, tol=1e-10,
                        depth=48, min_depth=8, fit_points=4, band=0.05):
    """
    Integrate a positive integrand that may blow up (or extend) at one end.

    Args:
        integrand (callable): scalar function of t.
        interval (tuple): (lo, hi); either may be infinite.
        singular_end (SingularEnd): which end is singular or infinite.
        tol (float): absolute tolerance of the returned value.
        depth (int): maximal number of dyadic panels.
        fit_points (int): panel boundaries used by the exponent regression.
        band (float): half width of the inconclusive zone around exponent 1.

    Returns:
        QuadratureOutcome: value and error, or a divergent verdict carrying the
        fitted exponent; `partial_integrals` lists (cutoff, partial value).
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise InvalidParams(f"empty integration interval [{lo}, {hi}]")

    if singular_end is SingularEnd.NONE:
        value, error = gauss_kronrod(integrand, lo, hi, tol)
        return QuadratureOutcome(value, False, None, error, ((hi, value),))

    end, other = (lo, hi) if singular_end is SingularEnd.LO else (hi, lo)
    inward = 1.0 if singular_end is SingularEnd.LO else -1.0

    if math.isinf(end):
        return _infinite_end(integrand, other, -inward, tol, depth, min_depth, fit_points, band)

    head = 0.0
    if math.isinf(other):
        split = end + inward
        head, _ = gauss_kronrod(integrand, *sorted((split, other)), tol)
        other = split
    outcome = _finite_end(integrand, end, other, inward, tol, depth, min_depth, fit_points, band)
    if outcome.divergent or head == 0.0:
        return outcome
    return QuadratureOutcome(outcome.value + head, False, outcome.exponent, outcome.error,
                             tuple((c, v + head) for c, v in outcome.partial_integrals))


def _fit_exponent(us, fs, k):
    """Exponent beta of f ~ u^-beta from the last k samples, and its drift against the k before."""

    def fit(x, y):
        if np.any(np.asarray(y) <= 0.0):
            return 0.0
        slope, _ = np.polyfit(np.log(x), np.log(y), 1)
        return -float(slope)

    beta = fit(us[-k:], fs[-k:])
    if len(us) >= 2 * k:
        spread = abs(beta - fit(us[-2 * k:-k], fs[-2 * k:-k]))
    else:
        spread = 0.0
    return beta, spread


def _finite_end(integrand, end, other, inward, tol, depth, min_depth, fit_points, band):
    length = abs(other - end)
    resolvable = int(math.floor(math.log2(length / (max(abs(end), 1.0) * RESOLUTION))))
    depth = max(min_depth + fit_points, min(depth, resolvable))
    threshold = 1.0 - band

    def f(u):
        return integrand(end + inward * u)

    partial = 0.0
    total_error = 0.0
    history, us, fs = [], [], []
    previous = None
    u_hi = length
    for j in range(depth):
        u_lo = length * 2.0 ** -(j + 1)
        a, b = sorted((end + inward * u_lo, end + inward * u_hi))
        value, error = gauss_kronrod(integrand, a, b, tol)
        partial += value
        total_error += error
        history.append((end + inward * u_lo, partial))
        us.append(u_lo)
        fs.append(float(f(u_lo)))
        u_hi = u_lo
        if j + 1 < min_depth:
            continue
        beta, _ = _fit_exponent(us, fs, fit_points)
        if beta >= threshold:
            previous = None
            continue
        estimate = partial + fs[-1] * u_lo / (1.0 - beta)
        if previous is not None and abs(estimate - previous) <= tol:
            return QuadratureOutcome(estimate, False, beta, total_error + abs(estimate - previous),
                                     tuple(history))
        previous = estimate

    beta, spread = _fit_exponent(us, fs, fit_points)
    if beta - spread >= threshold:
        logger.info(f"divergent at t = {end:.6g}: local exponent {beta:.4f}")
        return QuadratureOutcome(None, True, beta, total_error, tuple(history))
    if beta + spread < threshold:
        estimate = partial + fs[-1] * us[-1] / (1.0 - beta)
        drift = abs(estimate - previous) if previous is not None else abs(estimate - partial)
        logger.warning(f"tail closed after {depth} panels with error {drift:.3g} > tol {tol:.3g}")
        return QuadratureOutcome(estimate, False, beta, total_error + drift, tuple(history))
    raise Inconclusive(
        f"local exponent {beta:.4f} +/- {spread:.4f} straddles the divergence threshold {threshold:.2f}",
        exponent=beta, partial_integrals=history)


def _infinite_end(integrand, start, outward, tol, depth, min_depth, fit_points, band):
    threshold = 1.0 + band

    def f(w):
        return integrand(start + outward * w)

    partial = 0.0
    total_error = 0.0
    history, ws, fs = [], [], []
    previous = None
    w_lo = 0.0
    for j in range(depth):
        w_hi = 2.0 ** j
        a, b = sorted((start + outward * w_lo, start + outward * w_hi))
        value, error = gauss_kronrod(integrand, a, b, tol)
        partial += value
        total_error += error
        history.append((start + outward * w_hi, partial))
        ws.append(w_hi)
        fs.append(float(f(w_hi)))
        w_lo = w_hi
        if j + 1 < min_depth:
            continue
        if fs[-1] == 0.0:
            return QuadratureOutcome(partial, False, math.inf, total_error, tuple(history))
        beta, _ = _fit_exponent(ws, fs, fit_points)
        if beta <= threshold:
            previous = None
            continue
        estimate = partial + fs[-1] * w_hi / (beta - 1.0)
        if previous is not None and abs(estimate - previous) <= tol:
            return QuadratureOutcome(estimate, False, beta, total_error + abs(estimate - previous),
                                     tuple(history))
        previous = estimate

    beta, spread = _fit_exponent(ws, fs, fit_points)
    if beta + spread <= threshold:
        return QuadratureOutcome(None, True, beta, total_error, tuple(history))
    if beta - spread > threshold:
        estimate = partial + fs[-1] * ws[-1] / (beta - 1.0)
        return QuadratureOutcome(estimate, False, beta, total_error + abs(estimate - partial),
                                 tuple(history))
    raise Inconclusive(
        f"decay exponent {beta:.4f} +/- {spread:.4f} straddles the divergence threshold {threshold:.2f}",
        exponent=beta, partial_integrals=history)
