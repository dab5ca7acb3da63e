"""Derived double-layer quantities: layer widths, surface charge, pressure, length scales."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from scipy import constants

from . import bvp
from .errors import DivergenceError, DomainError, PBError, RegimeError
from .model import (DimensionalContext, Electrolyte, IonSpecies, PortraitKind, F_inverse,
                    classify, decreasing_branch)
from .quadrature import SOLVER_REL_TOL, level_integral, monotone_root

SQRT2 = math.sqrt(2.0)
DEFAULT_RHO = 0.25


class LayerRegime(str, enum.Enum):
    LAYERED = "Layered"
    NO_LAYER = "NoLayer"


@dataclass(frozen=True)
class GCReport:
    delta: float
    limit_delta: Optional[float]
    rho: float
    regime: LayerRegime
    L: float
    # finite-L width already indistinguishable from the L -> inf limit
    at_limit: bool = False


def _check_rho(rho):
    if not 0.0 < rho < 0.5:
        raise DomainError("layer fraction rho must lie in (0, 1/2)")


def _regime(portrait):
    return LayerRegime.LAYERED if portrait.has_equilibrium else LayerRegime.NO_LAYER


def _at_limit(delta, limit):
    return limit is not None and abs(delta - limit) <= 10 * SOLVER_REL_TOL * max(1.0, abs(limit))


# Neumann layer --------------------------------------------------------------------

def gc_width_neumann(system: Electrolyte, sigma: float, L: float,
                     rho: float = DEFAULT_RHO) -> GCReport:
    """Distance from a plate over which |phi'| drops to (1 - 2 rho) of its wall value."""
    _check_rho(rho)
    if sigma <= 0:
        raise DomainError("gc_width_neumann takes sigma > 0")
    sol = bvp.solve_neumann(system, sigma, L)
    portrait = classify(system)
    a = _path_turning_point(sol)
    outer = sol.path[0].start
    inner = bvp.boundary_map_G(system, a, (1.0 - 2.0 * rho) * sigma)
    delta = level_integral(system, a, inner, outer) / SQRT2
    limit = gc_width_neumann_limit(system, sigma, rho) if portrait.has_equilibrium else None
    return GCReport(delta, limit, rho, _regime(portrait), L, _at_limit(delta, limit))


def _path_turning_point(sol):
    # the level point of the legs (offset from the saddle when saturated)
    for piece in sol.path:
        if isinstance(piece, bvp.Leg):
            return piece.ref
    return sol.alpha


def _equilibrium_ref(portrait):
    if portrait.kind is PortraitKind.SADDLE:
        return portrait.phi_star
    return portrait.phi_e


def gc_width_neumann_limit(system: Electrolyte, sigma: float, rho: float = DEFAULT_RHO) -> float:
    """Layer width of the isolated charged wall (L -> inf)."""
    _check_rho(rho)
    if sigma <= 0:
        raise DomainError("gc_width_neumann_limit takes sigma > 0")
    portrait = classify(system)
    if not portrait.has_equilibrium:
        raise RegimeError("no equilibrium, so no layer forms")
    try:
        branch = decreasing_branch(portrait)
    except DomainError as exc:
        raise RegimeError(str(exc)) from None
    Fe = portrait.F_e
    lo = F_inverse(system, Fe - 0.5 * ((1.0 - 2.0 * rho) * sigma) ** 2, branch, portrait)
    hi = F_inverse(system, Fe - 0.5 * sigma * sigma, branch, portrait)
    return level_integral(system, _equilibrium_ref(portrait), lo, hi) / SQRT2


# Dirichlet layer ------------------------------------------------------------------

def _inner_point(system, ref, phi_s, rho):
    """Point between phi_s and ref where the gap is (1 - 2 rho)^2 of its wall value."""
    target = (1.0 - 2.0 * rho) ** 2 * system.gap(ref, phi_s)
    if math.isfinite(ref):
        span = ref - phi_s

        def resid(t):
            # t in (0, 1) along the segment from ref to phi_s
            return system.gap_offset(ref, t * span) - target

        t = monotone_root(resid, (0.25, 0.75), tol=1e-300, domain=(0.0, 1.0),
                          boundary_gap=lambda b: 0.0)
        return ref - t * span
    direction = 1.0 if ref > 0 else -1.0

    def resid_inf(phi):
        return system.gap(ref, phi) - target

    domain = (phi_s, math.inf) if direction > 0 else (-math.inf, phi_s)
    return monotone_root(resid_inf, (phi_s + direction * 0.5, phi_s + direction),
                         tol=1e-300, domain=domain, boundary_gap=lambda b: 0.0)


def gc_width_dirichlet(system: Electrolyte, phi_s: float, L: float,
                       rho: float = DEFAULT_RHO) -> GCReport:
    """Layer width for plates held at equal potential phi_s."""
    _check_rho(rho)
    sol = bvp.solve_dirichlet_equal(system, phi_s, L)
    portrait = classify(system)
    if sol.branch is bvp.Branch.CONSTANT:
        delta = 0.0
    else:
        ref = _path_turning_point(sol)
        inner = _inner_point(system, ref, phi_s, rho)
        delta = level_integral(system, ref, min(inner, phi_s), max(inner, phi_s)) / SQRT2
    limit = gc_width_dirichlet_limit(system, phi_s, rho) if portrait.has_equilibrium else None
    return GCReport(delta, limit, rho, _regime(portrait), L, _at_limit(delta, limit))


def gc_width_dirichlet_limit(system: Electrolyte, phi_s: float, rho: float = DEFAULT_RHO) -> float:
    _check_rho(rho)
    portrait = classify(system)
    if not portrait.has_equilibrium:
        raise RegimeError("no equilibrium, so no layer forms")
    ref = _equilibrium_ref(portrait)
    if portrait.kind is PortraitKind.SADDLE and bvp.near_saddle(system, phi_s):
        return 0.0
    inner = _inner_point(system, ref, phi_s, rho)
    return level_integral(system, ref, min(inner, phi_s), max(inner, phi_s)) / SQRT2


# surface charge -------------------------------------------------------------------

def surface_charge_equal(system: Electrolyte, phi0: float, L: float) -> float:
    """Largest |phi'| (reached at the plates) for equal plate potentials phi0."""
    sol = bvp.solve_dirichlet_equal(system, phi0, L)
    if sol.branch is bvp.Branch.CONSTANT:
        return 0.0
    return math.sqrt(2.0 * system.gap(_path_turning_point(sol), phi0)) if not sol.saturated \
        else max_surface_charge(system, phi0)


def max_surface_charge(system: Electrolyte, phi0: float) -> float:
    """Saturated surface charge, sqrt(2 (F_e - F(phi0)))."""
    portrait = classify(system)
    if not portrait.has_equilibrium:
        raise RegimeError("without an equilibrium the surface charge grows without bound")
    return math.sqrt(2.0 * max(system.gap(_equilibrium_ref(portrait), phi0), 0.0))


def _saddle_persists(system, q0):
    zs = system.z
    if all(z > 0 for z in zs):
        return q0 < 0
    if all(z < 0 for z in zs):
        return q0 > 0
    return True


def saturation_rate_ratio(system: Electrolyte, phi0: float, q0_values) -> list:
    """sigma(q0)**2 / (q0 ln|q0|) for each fixed charge, from the saturated surface charge."""
    out = []
    for q0 in q0_values:
        q0 = float(q0)
        if abs(q0) <= 1.0 or not math.isfinite(q0):
            raise DomainError("rate ratios need |q0| > 1")
        if not _saddle_persists(system, q0):
            raise DomainError(f"q0 = {q0} removes the saddle for these valences")
        s = max_surface_charge(Electrolyte(system.species, q0, system.scale), phi0)
        out.append(s * s / (q0 * math.log(abs(q0))))
    return out


def rate_limit(system: Electrolyte, positive: bool) -> float:
    """Limit of the rate ratio as q0 -> +inf (positive) or -inf."""
    return -2.0 / (min(system.z) if positive else max(system.z))


# pressure -------------------------------------------------------------------------

@dataclass(frozen=True)
class PressureReport:
    P_dimensionless: float
    P_physical: Optional[float]
    P_e: Optional[float]
    P_L: Optional[float]
    alpha: float
    alpha_L: Optional[float] = None

    @property
    def P_net(self):
        return None if self.P_e is None else self.P_dimensionless - self.P_e


def _pressure_unit(system, ctx: DimensionalContext):
    # k_B T times the physical ionic strength (number density)
    if ctx.concentrations_mM:
        lam = sum(z * z * c for z, c in zip(system.z, ctx.concentrations_mM))
        if len(ctx.concentrations_mM) != len(system.z):
            raise DomainError("one concentration per species is required")
    else:
        lam = system.scale * ctx.characteristic_concentration_mM
    return ctx.thermal_energy * lam * constants.N_A


def max_length_integral(system: Electrolyte, alpha: float) -> float:
    """sqrt(2) * integral from alpha outward to infinity on the side where the gap opens."""
    portrait = classify(system)
    if portrait.kind is PortraitKind.SADDLE and alpha < portrait.phi_star:
        return SQRT2 * level_integral(system, alpha, -math.inf, alpha)
    if system.f(alpha) > 0 and not bvp.near_saddle(system, alpha):
        raise DomainError("F(alpha) - F(phi) is negative just above alpha")
    return SQRT2 * level_integral(system, alpha, alpha, math.inf)


def alpha_at_length(system: Electrolyte, L: float) -> float:
    """Turning value whose one-sided escape length equals L (needs anions)."""
    if not system.has_anions:
        raise RegimeError("without anions the escape length is infinite")
    portrait = classify(system)
    lo = portrait.phi_star if portrait.kind is PortraitKind.SADDLE else -math.inf

    def resid(a):
        try:
            return SQRT2 * level_integral(system, a, a, math.inf) - L
        except DivergenceError:
            return math.inf

    hint = (lo + 0.5, lo + 1.0) if math.isfinite(lo) else (-1.0, 0.0)
    return monotone_root(resid, hint, tol=1e-300, domain=(lo, math.inf))


def electric_pressure(system: Electrolyte, sigma: float, L: float,
                      ctx: Optional[DimensionalContext] = None) -> PressureReport:
    sol = bvp.solve_neumann(system, sigma, L)
    portrait = classify(system)
    P = portrait.F_e if sol.saturated else system.F(sol.alpha)
    P = -P
    P_e = 0.0 - portrait.F_e if portrait.F_e is not None else None
    P_L = alpha_L = None
    probe = system if sigma >= 0 else _reflected(system)
    if probe.has_anions:
        try:
            alpha_L = alpha_at_length(probe, L)
            P_L = -probe.F(alpha_L)
            if sigma < 0:
                alpha_L = -alpha_L
        except PBError:
            P_L = alpha_L = None
    ctx = ctx or system.dimensional
    P_phys = P * _pressure_unit(system, ctx) if ctx is not None else None
    return PressureReport(P, P_phys, P_e, P_L, sol.alpha, alpha_L)


def _reflected(system):
    from .model import reflect
    return reflect(system)


# critical lengths -----------------------------------------------------------------

@dataclass(frozen=True)
class CriticalLengths:
    L_c: Optional[float] = None
    L_max: Optional[float] = None
    L0: Optional[float] = None
    L0_form: Optional[str] = None
    L0_condition: Optional[str] = None
    reasons: dict = field(default_factory=dict)


def critical_lengths(system: Electrolyte, sigma: Optional[float] = None,
                     alpha: Optional[float] = None, phi0: Optional[float] = None,
                     phi1: Optional[float] = None) -> CriticalLengths:
    portrait = classify(system)
    reasons = {}
    L_c = L_max = L0 = form = cond = None

    if sigma is None:
        reasons["L_c"] = "sigma not given"
    elif portrait.has_equilibrium:
        reasons["L_c"] = "system has an equilibrium; no separation bound"
    elif sigma == 0:
        reasons["L_c"] = "sigma = 0"
    else:
        L_c = abs(2.0 * sigma / system.q0)

    if alpha is None:
        reasons["L_max"] = "alpha not given"
    else:
        saddle_left = portrait.kind is PortraitKind.SADDLE and alpha < portrait.phi_star
        needed = system.has_cations if saddle_left else system.has_anions
        if not needed:
            reasons["L_max"] = "no anions: the separation grows without bound" if not saddle_left \
                else "no cations: the separation grows without bound"
        else:
            try:
                L_max = max_length_integral(system, alpha)
            except DivergenceError:
                reasons["L_max"] = "alpha sits on the equilibrium; the separation is unbounded"
            except DomainError as exc:
                reasons["L_max"] = str(exc)

    if phi0 is None or phi1 is None:
        reasons["L0"] = "plate potentials not given"
    elif abs(phi0 - phi1) <= 1e-14 * (1.0 + abs(phi0)):
        reasons["L0"] = "equal plate potentials"
    else:
        crit = bvp.critical_L0(system, min(phi0, phi1), max(phi0, phi1), portrait)
        form, cond = crit.form.value, crit.condition
        if math.isfinite(crit.L0):
            L0 = crit.L0
        else:
            reasons["L0"] = "plates straddle or touch the equilibrium: monotone for every L"
    return CriticalLengths(L_c, L_max, L0, form, cond, reasons)


# sensitivity of L0 ----------------------------------------------------------------

@dataclass(frozen=True)
class Sensitivity:
    parameter: str
    derivative: Optional[float]
    sign: Optional[int]
    expected: Optional[int]

    @property
    def conclusive(self):
        return self.sign is not None

    @property
    def matches(self):
        return self.conclusive and self.expected is not None and self.sign == self.expected


def _raw_L0(species, q0, phi0, phi1, rel_tol):
    system = Electrolyte(species, q0)
    crit = bvp.critical_L0(system, phi0, phi1)
    if crit.form is bvp.L0Form.NOT_APPLICABLE:
        return None, None
    ref = phi1 if crit.form is bvp.L0Form.PLUS else phi0
    return bvp._integral(system, ref, phi0, phi1, rel_tol=rel_tol) / SQRT2, crit.form


def L0_sensitivity(system: Electrolyte, phi0: float, phi1: float, step: float = 1e-5) -> list:
    """Centered finite-difference signs of dL0 with respect to q0, phi0, phi1 and each c_j.

    The electrolyte is perturbed as given (no renormalization).  A derivative
    is inconclusive when a perturbed point leaves the configuration where L0
    is finite, or when it is below the quadrature noise.
    """
    if not phi0 < phi1:
        raise DomainError("L0_sensitivity needs phi0 < phi1")
    if not step > 0:
        raise DomainError("step must be positive")
    rel_tol = 1e-12
    species = system.species
    base, base_form = _raw_L0(species, system.q0, phi0, phi1, rel_tol)
    if base is None:
        raise DomainError("L0 is infinite at the base point")

    def perturbations():
        yield "q0", system.q0, -1, lambda v: (species, v, phi0, phi1)
        yield "phi0", phi0, -1, lambda v: (species, system.q0, v, phi1)
        yield "phi1", phi1, +1, lambda v: (species, system.q0, phi0, v)
        for j, s in enumerate(species):
            def build(v, j=j):
                sp = list(species)
                sp[j] = IonSpecies(sp[j].z, v)
                return tuple(sp), system.q0, phi0, phi1
            yield f"c{j}", s.c, (-1 if s.z > 0 else +1), build

    out = []
    for name, value, expected, build in perturbations():
        h = step * max(1.0, abs(value))
        try:
            if name.startswith("c") and value - h <= 0:
                raise DomainError("perturbation makes a concentration nonpositive")
            plus, fp = _raw_L0(*build(value + h), rel_tol)
            minus, fm = _raw_L0(*build(value - h), rel_tol)
            if plus is None or minus is None or fp is not base_form or fm is not base_form:
                raise DomainError("perturbation changes the L0 configuration")
            if name.startswith("phi") and not build(value + h)[2] < build(value + h)[3]:
                raise DomainError("perturbation reorders the plates")
        except (PBError, DomainError):
            out.append(Sensitivity(name, None, None, expected))
            continue
        d = (plus - minus) / (2.0 * h)
        noise = 10.0 * rel_tol * base / h
        sign = None if abs(d) <= noise else (1 if d > 0 else -1)
        out.append(Sensitivity(name, d, sign, expected))
    return out
