"""Integrals of the time-map kernel and the shared monotone root solver.

All time maps in this package are built from

    I(ref, beta; a, b) = integral_a^b  dphi / sqrt(beta + F(ref) - F(phi))

whose integrand has an inverse-square-root singularity wherever the gap
vanishes (at ``phi == ref`` when ``beta == 0``).  Each finite interval is split
at its midpoint and each half is mapped with ``phi = endpoint +- t**2``; the
resulting integrand is bounded whenever ``f(endpoint) != 0`` and is handed to
QUADPACK's adaptive Gauss-Kronrod rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy.integrate import quad

from ._roots import monotone_root
from .errors import DivergenceError, DomainError, NumericalError
from .model import Electrolyte

__all__ = ["IntegralSpec", "singular_integral", "level_integral", "monotone_root",
           "SOLVER_REL_TOL", "SWEEP_REL_TOL"]

SOLVER_REL_TOL = 1e-10
SWEEP_REL_TOL = 1e-8
_SADDLE_GUARD = 1e-13


def near_saddle(system: Electrolyte, phi: float) -> bool:
    return abs(system.f(phi)) < _SADDLE_GUARD * (1.0 + abs(phi))


def _scale_points(gap0, f0, f2, tmax):
    # characteristic widths of 2t / sqrt(gap0 + f0 t^2 + f2 t^4 / 2)
    scales = []
    if gap0 > 0 and f0 > 0:
        scales.append(math.sqrt(gap0 / f0))
    if f0 > 0 and f2 > 0:
        scales.append(math.sqrt(f0 / f2))
    if gap0 > 0 and f2 > 0:
        scales.append((gap0 / f2) ** 0.25)
    pts = set()
    for s in scales:
        p = 0.1 * s
        while 0 < p < 0.5 * tmax:
            pts.add(p)
            p *= 10.0
    return sorted(pts) or None


def _quad(fun, a, b, rel_tol, points=None):
    kwargs = dict(epsabs=0.0, epsrel=rel_tol, limit=1000, full_output=1)
    if points is not None and math.isfinite(b):
        kwargs["points"] = points
    res = quad(fun, a, b, **kwargs)
    val, err = res[0], res[1]
    if not math.isfinite(val) or err > 1e3 * rel_tol * max(abs(val), 1e-300):
        raise NumericalError(f"quadrature did not converge on [{a}, {b}]: {val} +- {err}")
    return val


def _half(system, ref, beta, endpoint, direction, length, rel_tol):
    """Integral over [endpoint, endpoint + direction*length] via phi = endpoint + direction*t^2."""
    if length <= 0:
        return 0.0
    tmax = math.sqrt(length)
    base_d = (ref - endpoint) if math.isfinite(ref) else None

    if base_d is None:
        def gap_at(s):
            return beta - system.F(endpoint + direction * s)
    else:
        def gap_at(s):
            return system.gap_offset(ref, base_d - direction * s, beta)

    def integrand(t):
        g = gap_at(t * t)
        if g <= 0:
            if t == 0:
                return 0.0
            raise DomainError(f"kernel gap is not positive at phi = {endpoint + direction * t * t}")
        return 2.0 * t / math.sqrt(g)

    gap0 = max(gap_at(0.0), 0.0)
    f0 = abs(system.f(endpoint))
    f2 = abs(system.fprime(endpoint))
    return _quad(integrand, 0.0, tmax, rel_tol, _scale_points(gap0, f0, f2, tmax))


def level_integral(system: Electrolyte, ref: float, lower: float, upper: float,
                   beta: float = 0.0, rel_tol: float = SOLVER_REL_TOL) -> float:
    """``integral_lower^upper dphi / sqrt(beta + F(ref) - F(phi))``.

    ``ref`` may be +-inf for an equilibrium at infinity (level F = 0).  Either
    limit may be infinite; the integral then converges only when the gap grows
    exponentially in that direction.
    """
    if lower == upper:
        return 0.0
    if not lower < upper:
        raise DomainError("lower limit exceeds upper limit")
    if beta < 0:
        raise DomainError("beta must be nonnegative")

    for end in (lower, upper):
        if math.isfinite(end) and beta == 0 and end == ref and near_saddle(system, end):
            raise DivergenceError(
                f"turning point {ref} sits on the equilibrium; the time map diverges",
                lower_bound=0.0)

    if math.isinf(upper) and not system.has_anions:
        raise DivergenceError("integral to +inf diverges without anions", lower_bound=0.0)
    if math.isinf(lower) and not system.has_cations:
        raise DivergenceError("integral to -inf diverges without cations", lower_bound=0.0)

    total = 0.0
    a, b = lower, upper
    if math.isinf(b) and math.isinf(a):
        raise DomainError("at most one infinite limit is supported")
    if math.isinf(b):
        cut = a + 1.0
        total += _tail(system, ref, beta, cut, math.inf, rel_tol)
        b = cut
    elif math.isinf(a):
        cut = b - 1.0
        total += _tail(system, ref, beta, -math.inf, cut, rel_tol)
        a = cut

    mid = 0.5 * (a + b)
    if system.gap(ref, mid, beta) <= 0:
        raise DomainError(f"kernel gap is not positive inside [{lower}, {upper}]")
    total += _half(system, ref, beta, a, +1.0, mid - a, rel_tol)
    total += _half(system, ref, beta, b, -1.0, b - mid, rel_tol)
    return total


def _tail(system, ref, beta, a, b, rel_tol):
    def integrand(phi):
        g = system.gap(ref, phi, beta)
        if g <= 0:
            raise DomainError(f"kernel gap is not positive at phi = {phi}")
        return 1.0 / math.sqrt(g)

    return _quad(integrand, a, b, rel_tol)


@dataclass(frozen=True)
class IntegralSpec:
    """One kernel integral.  ``alpha`` is the level point: the gap is
    ``beta + F(alpha) - F(phi)``."""

    system: Electrolyte
    alpha: float
    lower: float
    upper: float
    singular_at: Optional[frozenset] = None
    rel_tol: float = SOLVER_REL_TOL
    beta: float = 0.0

    def __post_init__(self):
        if self.lower > self.upper:
            raise DomainError("lower must not exceed upper")
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        actual = frozenset(name for name, end in (("lower", self.lower), ("upper", self.upper))
                           if self.beta == 0 and end == self.alpha)
        if self.singular_at is None:
            object.__setattr__(self, "singular_at", actual)
        elif frozenset(self.singular_at) != actual:
            raise DomainError(f"singular endpoints {set(self.singular_at)} do not match "
                              f"the level point (expected {set(actual)})")


def singular_integral(spec: IntegralSpec) -> float:
    """Evaluate ``integral dphi / sqrt(beta + F(alpha) - F(phi))`` for ``spec``.

    Raises DivergenceError at the log-divergent saddle level.
    """
    return level_integral(spec.system, spec.alpha, spec.lower, spec.upper,
                          spec.beta, spec.rel_tol)
