"""Dirichlet and symmetric Neumann problems solved by inverting time maps.

A solution is stored as the orbit it traces in the phase plane: a list of
legs, each monotone in phi at a fixed energy ``h = beta + F(ref)``, plus an
optional plateau sitting on a saddle (used for the saturated large-L limit).
``reconstruct_profile`` turns that description into samples on a uniform x
grid by inverting ``x(phi) = integral dphi / sqrt(2 (h - F(phi)))`` leg by leg.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .errors import DivergenceError, DomainError, NoSolutionError, NumericalError, UsageError
from .model import Electrolyte, PhasePortrait, PortraitKind, classify, reflect
from .quadrature import SOLVER_REL_TOL, level_integral, monotone_root, near_saddle

SQRT2 = math.sqrt(2.0)
_SAT_GUARD = 1e-13
_PLATEAU_OFFSET = 1e-11
_MIN_BETA = 1e-30


@dataclass(frozen=True)
class DirichletBC:
    phi0: float
    phi1: float
    L: float

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise DomainError("plate separation L must be positive")
        if not (math.isfinite(self.phi0) and math.isfinite(self.phi1)):
            raise DomainError("plate potentials must be finite")


@dataclass(frozen=True)
class NeumannBC:
    sigma: float
    L: float

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise DomainError("plate separation L must be positive")
        if not math.isfinite(self.sigma):
            raise DomainError("surface charge must be finite")


class Branch(str, enum.Enum):
    INCREASING = "MonotoneIncreasing"
    DECREASING = "MonotoneDecreasing"
    INTERIOR_MAX = "NonMonotoneInteriorMax"
    INTERIOR_MIN = "NonMonotoneInteriorMin"
    CONSTANT = "Constant"


_BRANCH_MIRROR_X = {Branch.INCREASING: Branch.DECREASING, Branch.DECREASING: Branch.INCREASING}
_BRANCH_NEGATE = {
    Branch.INCREASING: Branch.DECREASING, Branch.DECREASING: Branch.INCREASING,
    Branch.INTERIOR_MAX: Branch.INTERIOR_MIN, Branch.INTERIOR_MIN: Branch.INTERIOR_MAX,
    Branch.CONSTANT: Branch.CONSTANT,
}


@dataclass(frozen=True)
class Leg:
    """Monotone stretch of the orbit from ``start`` to ``end`` at energy
    ``beta + F(ref)``.  ``u_sign`` is the sign of phi' along it."""

    start: float
    end: float
    ref: float
    beta: float
    u_sign: int


@dataclass(frozen=True)
class Plateau:
    phi: float
    length: float


@dataclass(frozen=True)
class Solution:
    branch: Branch
    alpha: float
    h: float
    L: float
    beta: Optional[float] = None
    saturated: bool = False
    phi_s: Optional[float] = None
    path: tuple = field(default=(), repr=False)

    @property
    def monotone(self):
        return self.branch in (Branch.INCREASING, Branch.DECREASING, Branch.CONSTANT)


@dataclass(frozen=True)
class Profile:
    x: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    concentrations: np.ndarray

    @property
    def samples(self):
        return [(float(x), float(p), float(u), [float(c) for c in cs])
                for x, p, u, cs in zip(self.x, self.phi, self.u, self.concentrations)]

    def __len__(self):
        return len(self.x)


# kernel helpers -----------------------------------------------------------------

def _integral(system, ref, lo, hi, beta=0.0, rel_tol=SOLVER_REL_TOL):
    """Kernel integral over [lo, hi], split at ``ref`` when it lies inside."""
    if lo > hi:
        lo, hi = hi, lo
    if math.isfinite(ref) and lo < ref < hi:
        return (level_integral(system, ref, lo, ref, beta, rel_tol)
                + level_integral(system, ref, ref, hi, beta, rel_tol))
    return level_integral(system, ref, lo, hi, beta, rel_tol)


def _leg_length(system, leg, rel_tol=SOLVER_REL_TOL):
    return _integral(system, leg.ref, leg.start, leg.end, leg.beta, rel_tol) / SQRT2


def _equilibrium_bound(portrait, direction):
    """Limit of the turning point on the side ``direction`` (+1/-1)."""
    if portrait.kind is PortraitKind.SADDLE:
        return portrait.phi_star
    return math.inf if direction > 0 else -math.inf


def _sign_f(system, portrait, phi):
    if portrait.kind is PortraitKind.SADDLE:
        if near_saddle(system, phi):
            return 0
        return 1 if phi < portrait.phi_star else -1
    fv = system.f(phi)
    return 1 if fv > 0 else (-1 if fv < 0 else 0)


def _sat_gap(bound):
    return _SAT_GUARD * (1.0 + abs(bound))


class _Saturated(Exception):
    pass


def _saturating(fn):
    # the kernel only diverges on the saddle guard, which is the saturation regime
    def wrapped(x):
        try:
            return fn(x)
        except DivergenceError:
            raise _Saturated from None
    return wrapped


# equal-potential Dirichlet ------------------------------------------------------

def time_map_T(system: Electrolyte, phi0: float, alpha: float,
               portrait: Optional[PhasePortrait] = None) -> float:
    """Plate separation of the equal-potential problem with turning value ``alpha``."""
    portrait = portrait or classify(system)
    direction = _sign_f(system, portrait, phi0)
    if direction == 0:
        raise DomainError("phi0 is the equilibrium; only the constant solution exists")
    bound = _equilibrium_bound(portrait, direction)
    lo, hi = (phi0, bound) if direction > 0 else (bound, phi0)
    if not lo < alpha < hi:
        raise DomainError(f"alpha must lie strictly between {lo} and {hi}")
    return SQRT2 * _integral(system, alpha, phi0, alpha)


def _constant_solution(phi, L, system):
    return Solution(Branch.CONSTANT, phi, system.F(phi), L, path=(Plateau(phi, L),))


def solve_dirichlet_equal(system: Electrolyte, phi0: float, L: float) -> Solution:
    DirichletBC(phi0, phi0, L)
    portrait = classify(system)
    direction = _sign_f(system, portrait, phi0)
    if direction == 0:
        return _constant_solution(phi0, L, system)
    bound = _equilibrium_bound(portrait, direction)
    domain = (phi0, bound) if direction > 0 else (bound, phi0)

    def resid(alpha):
        return time_map_T(system, phi0, alpha, portrait) - L

    hint_step = min(1.0, 0.5 * abs(bound - phi0)) if math.isfinite(bound) else 1.0
    hint = (phi0 + direction * 0.5 * hint_step, phi0 + direction * hint_step)
    branch = Branch.INTERIOR_MAX if direction > 0 else Branch.INTERIOR_MIN
    try:
        alpha = monotone_root(_saturating(resid), hint, tol=1e-300, domain=domain,
                              boundary_gap=_boundary_gap(phi0, bound))
    except (NoSolutionError, _Saturated):
        if not math.isfinite(bound):
            raise NumericalError("turning point escaped past the exponent clamp") from None
        return _saturated_equal(system, portrait, phi0, L, direction, branch)
    legs = (Leg(phi0, alpha, alpha, 0.0, direction), Leg(alpha, phi0, alpha, 0.0, -direction))
    return Solution(branch, alpha, system.F(alpha), L, path=legs)


def _boundary_gap(anchor, bound):
    # no guard at the plate side, the saturation guard at the equilibrium side
    def gap(b):
        return _sat_gap(b) if b == bound else 0.0
    return gap


def _saturated_equal(system, portrait, phi0, L, direction, branch):
    ps = portrait.phi_star
    a = ps - direction * _PLATEAU_OFFSET * (1.0 + abs(ps))
    legs = [Leg(phi0, a, a, 0.0, direction), Leg(a, phi0, a, 0.0, -direction)]
    used = sum(_leg_length(system, leg) for leg in legs)
    if used > L:
        raise NumericalError("saturation reached below the plateau offset")
    path = (legs[0], Plateau(a, L - used), legs[1])
    return Solution(branch, ps, portrait.F_e, L, saturated=True, path=path)


# general Dirichlet --------------------------------------------------------------

class L0Form(str, enum.Enum):
    PLUS = "PlusForm"
    MINUS = "MinusForm"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class CriticalL0:
    L0: float
    form: L0Form
    condition: Optional[str]


def _condition_label(system, form):
    zs, q0 = system.z, system.q0
    tag = "a" if form is L0Form.PLUS else "b"
    if all(z > 0 for z in zs):
        return "a.1" if q0 >= 0 else f"{tag}.2"
    if all(z < 0 for z in zs):
        return "b.1" if q0 <= 0 else f"{tag}.3"
    return f"{tag}.4"


def critical_L0(system: Electrolyte, phi0: float, phi1: float,
                portrait: Optional[PhasePortrait] = None) -> CriticalL0:
    """Largest separation for which the potential between unequal plates is monotone.

    Requires ``phi0 < phi1``.  Straddling the saddle (or touching it) gives
    ``NotApplicable`` with ``L0 = inf``: the potential is monotone for every L.
    """
    if not phi0 < phi1:
        raise DomainError("critical_L0 needs phi0 < phi1; reflect x first")
    portrait = portrait or classify(system)
    if _sign_f(system, portrait, phi1) > 0:
        form, ref = L0Form.PLUS, phi1
    elif _sign_f(system, portrait, phi0) < 0:
        form, ref = L0Form.MINUS, phi0
    else:
        return CriticalL0(math.inf, L0Form.NOT_APPLICABLE, None)
    L0 = _integral(system, ref, phi0, phi1) / SQRT2
    return CriticalL0(L0, form, _condition_label(system, form))


def _monotone_ref(system, portrait, phi0, phi1, form):
    if form is L0Form.PLUS:
        return phi1
    if form is L0Form.MINUS:
        return phi0
    return portrait.phi_star


def time_map_T1(system: Electrolyte, phi0: float, phi1: float, beta: float) -> float:
    """Length of the monotone orbit from phi0 to phi1 with energy beta above the top of F."""
    if not phi0 < phi1:
        raise DomainError("time_map_T1 needs phi0 < phi1")
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    portrait = classify(system)
    form = critical_L0(system, phi0, phi1, portrait).form
    ref = _monotone_ref(system, portrait, phi0, phi1, form)
    if form is L0Form.NOT_APPLICABLE and beta == 0:
        raise DivergenceError("the orbit through the saddle takes infinite length")
    return _integral(system, ref, phi0, phi1, beta) / SQRT2


def _T2_domain(system, portrait, phi0, phi1, form):
    if form is L0Form.PLUS:
        return phi1, _equilibrium_bound(portrait, +1)
    if form is L0Form.MINUS:
        return _equilibrium_bound(portrait, -1), phi0
    raise DomainError("no non-monotone solutions exist for this configuration")


def time_map_T2_parts(system: Electrolyte, phi0: float, phi1: float, alpha: float):
    """The two pieces of the non-monotone time map: plate 0 to the turning point,
    and plate 1 to the turning point."""
    if not phi0 < phi1:
        raise DomainError("time_map_T2 needs phi0 < phi1")
    portrait = classify(system)
    form = critical_L0(system, phi0, phi1, portrait).form
    lo, hi = _T2_domain(system, portrait, phi0, phi1, form)
    if not lo < alpha < hi:
        raise DomainError(f"alpha must lie strictly between {lo} and {hi}")
    t21 = _integral(system, alpha, phi0, alpha) / SQRT2
    t22 = _integral(system, alpha, phi1, alpha) / SQRT2
    return t21, t22


def time_map_T2(system: Electrolyte, phi0: float, phi1: float, alpha: float) -> float:
    t21, t22 = time_map_T2_parts(system, phi0, phi1, alpha)
    return t21 + t22


def solve_dirichlet_general(system: Electrolyte, phi0: float, phi1: float, L: float) -> Solution:
    DirichletBC(phi0, phi1, L)
    if abs(phi0 - phi1) <= 1e-14 * (1.0 + abs(phi0)):
        return solve_dirichlet_equal(system, phi0, L)
    if phi0 > phi1:
        return _mirror_x(solve_dirichlet_general(system, phi1, phi0, L))

    portrait = classify(system)
    crit = critical_L0(system, phi0, phi1, portrait)
    if L <= crit.L0:
        return _solve_monotone(system, portrait, phi0, phi1, L, crit)
    return _solve_nonmonotone(system, portrait, phi0, phi1, L, crit)


def _solve_monotone(system, portrait, phi0, phi1, L, crit):
    ref = _monotone_ref(system, portrait, phi0, phi1, crit.form)
    if crit.form is not L0Form.NOT_APPLICABLE and crit.L0 - L <= 1e-12 * crit.L0:
        beta = 0.0
    else:
        def resid(log_beta):
            return _integral(system, ref, phi0, phi1, math.exp(log_beta)) / SQRT2 - L

        try:
            log_beta = monotone_root(resid, (-1.0, 1.0), tol=1e-13,
                                     domain=(math.log(_MIN_BETA), 700.0),
                                     boundary_gap=lambda b: 1e-9)
        except NoSolutionError:
            if crit.form is L0Form.NOT_APPLICABLE:
                return _saturated_straddle(system, portrait, phi0, phi1, L)
            raise NumericalError("monotone branch root search failed") from None
        beta = math.exp(log_beta)
    h = beta + system.F(ref)
    alpha = ref
    return Solution(Branch.INCREASING, alpha, h, L, beta=beta,
                    path=(Leg(phi0, phi1, ref, beta, +1),))


def _saturated_straddle(system, portrait, phi0, phi1, L):
    ps = portrait.phi_star
    beta = _MIN_BETA
    legs = [Leg(phi0, ps, ps, beta, +1), Leg(ps, phi1, ps, beta, +1)]
    used = sum(_leg_length(system, leg) for leg in legs)
    path = (legs[0], Plateau(ps, L - used), legs[1])
    return Solution(Branch.INCREASING, ps, portrait.F_e + beta, L, beta=beta,
                    saturated=True, path=path)


def _solve_nonmonotone(system, portrait, phi0, phi1, L, crit):
    lo, hi = _T2_domain(system, portrait, phi0, phi1, crit.form)
    plus = crit.form is L0Form.PLUS
    anchor = phi1 if plus else phi0
    bound = hi if plus else lo
    direction = 1 if plus else -1

    def resid(alpha):
        t21 = _integral(system, alpha, phi0, alpha) / SQRT2
        t22 = _integral(system, alpha, phi1, alpha) / SQRT2
        return t21 + t22 - L

    hint_step = min(1.0, 0.5 * abs(bound - anchor)) if math.isfinite(bound) else 1.0
    hint = (anchor + direction * 0.5 * hint_step, anchor + direction * hint_step)
    branch = Branch.INTERIOR_MAX if plus else Branch.INTERIOR_MIN
    try:
        alpha = monotone_root(_saturating(resid), hint, tol=1e-300, domain=(lo, hi),
                              boundary_gap=_boundary_gap(anchor, bound))
    except (NoSolutionError, _Saturated):
        if not math.isfinite(bound):
            raise NumericalError("turning point escaped past the exponent clamp") from None
        ps = portrait.phi_star
        a = ps - direction * _PLATEAU_OFFSET * (1.0 + abs(ps))
        legs = [Leg(phi0, a, a, 0.0, direction), Leg(a, phi1, a, 0.0, -direction)]
        used = sum(_leg_length(system, leg) for leg in legs)
        path = (legs[0], Plateau(a, L - used), legs[1])
        return Solution(branch, ps, portrait.F_e, L, saturated=True, path=path)
    legs = (Leg(phi0, alpha, alpha, 0.0, direction), Leg(alpha, phi1, alpha, 0.0, -direction))
    return Solution(branch, alpha, system.F(alpha), L, path=legs)


def _mirror_x(sol: Solution) -> Solution:
    """Solution of the problem with the plates swapped (x -> -x)."""
    path = []
    for piece in reversed(sol.path):
        if isinstance(piece, Leg):
            path.append(Leg(piece.end, piece.start, piece.ref, piece.beta, -piece.u_sign))
        else:
            path.append(piece)
    return replace(sol, branch=_BRANCH_MIRROR_X.get(sol.branch, sol.branch), path=tuple(path))


def _negate(sol: Solution) -> Solution:
    """Solution for the reflected electrolyte: phi -> -phi."""
    path = []
    for piece in sol.path:
        if isinstance(piece, Leg):
            path.append(Leg(-piece.start, -piece.end, -piece.ref, piece.beta, -piece.u_sign))
        else:
            path.append(Plateau(-piece.phi, piece.length))
    return replace(sol, branch=_BRANCH_NEGATE[sol.branch], alpha=-sol.alpha,
                   phi_s=None if sol.phi_s is None else -sol.phi_s, path=tuple(path))


# Neumann ------------------------------------------------------------------------

def boundary_map_G(system: Electrolyte, alpha: float, sigma: float) -> float:
    """Plate potential phi_s > alpha with sigma**2 / 2 + F(phi_s) = F(alpha)."""
    if sigma < 0:
        raise DomainError("boundary_map_G takes sigma >= 0")
    if sigma == 0:
        return alpha
    fa = system.f(alpha)
    target = 0.5 * sigma * sigma
    if fa > 0 and not near_saddle(system, alpha):
        # F(alpha) - F(phi) is negative just above alpha
        raise NoSolutionError(
            f"no phi_s > alpha reaches the level: f(alpha) = {fa} >= 0",
            constraint="f(alpha) < 0 is required for a boundary potential above alpha")

    def resid(d):
        return system.gap_offset(alpha, -d) - target

    if fa < 0:
        upper = -target / fa
    else:
        upper = math.sqrt(2.0 * target / abs(system.fprime(alpha)))
    return alpha + monotone_root(resid, (0.5 * upper, upper), tol=1e-300,
                                 domain=(0.0, math.inf), boundary_gap=lambda b: 0.0)


def neumann_time_map_M(system: Electrolyte, alpha: float, sigma: float) -> float:
    """``integral_alpha^G(alpha, sigma) dphi / sqrt(F(alpha) - F(phi))``; equals L / sqrt(2)."""
    G = boundary_map_G(system, alpha, sigma)
    return _integral(system, alpha, alpha, G)


@dataclass(frozen=True)
class NeumannExistence:
    case: Optional[str]
    constraint: str

    @property
    def solvable(self):
        return self.case is not None


def neumann_existence(system: Electrolyte, sigma: float, L: float) -> NeumannExistence:
    NeumannBC(sigma, L)
    if sigma < 0:
        return neumann_existence(reflect(system), -sigma, L)
    zs, q0 = system.z, system.q0
    all_pos = all(z > 0 for z in zs)
    all_neg = all(z < 0 for z in zs)
    if sigma == 0:
        if classify(system).kind is PortraitKind.SADDLE:
            return NeumannExistence("I" if not all_pos else "II",
                                    "sigma = 0: constant potential at the saddle")
        return NeumannExistence(None, "sigma = 0 needs a finite equilibrium")
    if not (all_pos or all_neg):
        return NeumannExistence("I", "z_i z_j < 0 for some i, j")
    if all_neg and q0 >= 0:
        return NeumannExistence("I", "all z_j < 0 and q0 >= 0")
    bound = -2.0 * sigma / q0 if q0 != 0 else math.inf
    if all_pos and q0 < 0:
        ok = L > bound
        return NeumannExistence("II" if ok else None,
                                f"L>−2σ/q₀ (−2σ/q₀ = {bound:.17g}, L = {L:.17g})")
    if all_neg and q0 < 0:
        ok = L < bound
        return NeumannExistence("III" if ok else None,
                                f"L<−2σ/q₀ (−2σ/q₀ = {bound:.17g}, L = {L:.17g})")
    return NeumannExistence(None, "all z_j > 0 and q0 >= 0: f > 0 everywhere, so phi' "
                                  "cannot rise from -sigma to +sigma")


def solve_neumann(system: Electrolyte, sigma: float, L: float) -> Solution:
    existence = neumann_existence(system, sigma, L)
    if not existence.solvable:
        raise NoSolutionError(f"Neumann problem has no solution: {existence.constraint}",
                              constraint=existence.constraint)
    if sigma < 0:
        return _negate(solve_neumann(reflect(system), -sigma, L))
    portrait = classify(system)
    if sigma == 0:
        sol = _constant_solution(portrait.phi_star, L, system)
        return replace(sol, phi_s=portrait.phi_star)

    if portrait.kind is PortraitKind.SADDLE:
        lo = portrait.phi_star
        hint = (lo + 0.5, lo + 1.0)
    else:
        lo = -math.inf
        hint = (-1.0, 0.0)

    def resid(alpha):
        return SQRT2 * neumann_time_map_M(system, alpha, sigma) - L

    try:
        alpha = monotone_root(_saturating(resid), hint, tol=1e-300,
                              domain=(lo, math.inf), boundary_gap=_sat_gap)
    except (NoSolutionError, _Saturated):
        if portrait.kind is not PortraitKind.SADDLE:
            raise NumericalError("Neumann root search failed") from None
        return _saturated_neumann(system, portrait, sigma, L)
    phi_s = boundary_map_G(system, alpha, sigma)
    legs = (Leg(phi_s, alpha, alpha, 0.0, -1), Leg(alpha, phi_s, alpha, 0.0, +1))
    return Solution(Branch.INTERIOR_MIN, alpha, system.F(alpha), L, phi_s=phi_s, path=legs)


def _saturated_neumann(system, portrait, sigma, L):
    ps = portrait.phi_star
    a = ps + _PLATEAU_OFFSET * (1.0 + abs(ps))
    phi_s = boundary_map_G(system, a, sigma)
    legs = [Leg(phi_s, a, a, 0.0, -1), Leg(a, phi_s, a, 0.0, +1)]
    used = sum(_leg_length(system, leg) for leg in legs)
    path = (legs[0], Plateau(a, L - used), legs[1])
    return Solution(Branch.INTERIOR_MIN, ps, portrait.F_e, L, saturated=True,
                    phi_s=boundary_map_G(system, ps, sigma), path=path)


# profiles -----------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


class _HalfLeg:
    """phi = endpoint + direction * t**2 for t in [0, tmax], with cumulative x(t)."""

    def __init__(self, system, ref, beta, endpoint, direction, length):
        self.system, self.ref, self.beta = system, ref, beta
        self.endpoint, self.direction = endpoint, direction
        self.tmax = math.sqrt(max(length, 0.0))
        self.base_d = ref - endpoint if math.isfinite(ref) else None
        if self.tmax == 0:
            self.nodes = np.array([0.0])
            self.cum = np.array([0.0])
            return
        geo = self.tmax * np.geomspace(1e-14, 1.0, 90)
        lin = np.linspace(0.0, self.tmax, 65)
        self.nodes = np.unique(np.concatenate(([0.0], geo, lin)))
        self.cum = np.concatenate(([0.0], np.cumsum(self._segment(self.nodes[:-1], self.nodes[1:]))))

    def gap(self, t):
        t = np.asarray(t, dtype=float)
        s = t * t
        if self.base_d is None:
            return self.beta - self.system.F_array(self.endpoint + self.direction * s)
        return self.system.gap_offset_array(self.ref, self.base_d - self.direction * s, self.beta)

    def speed_inv(self, t):
        # dx/dt = 2 t / sqrt(2 gap)
        t = np.asarray(t, dtype=float)
        g = np.maximum(self.gap(t), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 2.0 * t / np.sqrt(2.0 * g)
        limit = math.sqrt(2.0 / abs(self.system.f(self.endpoint))) if self.system.f(self.endpoint) != 0 else 0.0
        return np.where(t == 0, limit if self.beta == 0 and self.base_d == 0 else 0.0, out)

    def _segment(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        t = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = self.speed_inv(t.ravel()).reshape(t.shape)
        return half * (vals @ _GL_WEIGHTS)

    @property
    def length(self):
        return float(self.cum[-1])

    def invert(self, X):
        """t with x(t) = X for an array of targets in [0, length]."""
        X = np.clip(np.asarray(X, dtype=float), 0.0, self.length)
        if self.tmax == 0:
            return np.zeros_like(X)
        k = np.clip(np.searchsorted(self.cum, X, side="right") - 1, 0, len(self.nodes) - 2)
        t_lo, t_hi = self.nodes[k], self.nodes[k + 1]
        c_lo = self.cum[k]
        seg = self.cum[k + 1] - c_lo
        frac = np.where(seg > 0, (X - c_lo) / np.where(seg > 0, seg, 1.0), 0.0)
        t = t_lo + frac * (t_hi - t_lo)
        for _ in range(30):
            val = c_lo + self._segment(t_lo, t)
            deriv = self.speed_inv(t)
            step = np.where(deriv > 0, (val - X) / np.where(deriv > 0, deriv, 1.0), 0.0)
            t_new = np.clip(t - step, t_lo, t_hi)
            done = np.all(np.abs(t_new - t) <= 1e-15 * np.maximum(1.0, t_hi))
            t = t_new
            if done:
                break
        return t


class _LegSampler:
    def __init__(self, system, leg):
        self.leg = leg
        a, b = leg.start, leg.end
        # halves are parametrized from where the gap is smallest: the level
        # point when it lies inside the leg, else the leg ends
        self.centered = math.isfinite(leg.ref) and min(a, b) < leg.ref < max(a, b)
        if self.centered:
            m = leg.ref
            self.first = _HalfLeg(system, m, leg.beta, m, 1.0 if a > m else -1.0, abs(m - a))
            self.second = _HalfLeg(system, m, leg.beta, m, 1.0 if b > m else -1.0, abs(m - b))
        else:
            m = 0.5 * (a + b)
            self.first = _HalfLeg(system, leg.ref, leg.beta, a, 1.0 if m >= a else -1.0, abs(m - a))
            self.second = _HalfLeg(system, leg.ref, leg.beta, b, 1.0 if m >= b else -1.0, abs(m - b))

    @property
    def length(self):
        return self.first.length + self.second.length

    def sample(self, s):
        s = np.asarray(s, dtype=float)
        n1 = self.first.length
        in_first = s <= n1
        phi = np.empty_like(s)
        gap = np.empty_like(s)
        for half, mask, dist in (
                (self.first, in_first, (n1 - s) if self.centered else s),
                (self.second, ~in_first, (s - n1) if self.centered else (self.length - s))):
            if np.any(mask):
                t = half.invert(dist[mask])
                phi[mask] = half.endpoint + half.direction * t * t
                gap[mask] = half.gap(t)
        # pin the plates exactly
        phi[s <= 0] = self.leg.start
        phi[s >= self.length] = self.leg.end
        u = self.leg.u_sign * np.sqrt(2.0 * np.maximum(gap, 0.0))
        return phi, u


def reconstruct_profile(system: Electrolyte, solution: Solution,
                        bc: Union[DirichletBC, NeumannBC], n_samples: int = 201) -> Profile:
    if n_samples < 3:
        raise UsageError("n_samples must be at least 3")
    if abs(bc.L - solution.L) > 1e-12 * bc.L:
        raise UsageError("boundary condition does not match the solution's separation")
    L = bc.L
    x = np.linspace(-0.5 * L, 0.5 * L, n_samples)
    pieces = []
    for piece in solution.path:
        if isinstance(piece, Leg):
            sampler = _LegSampler(system, piece)
            pieces.append((sampler, sampler.length))
        else:
            pieces.append((piece, piece.length))
    total = sum(length for _, length in pieces)
    if not total > 0 or abs(total - L) > 1e-6 * L:
        raise NumericalError(f"orbit length {total} does not match L = {L}")
    scale = total / L

    phi = np.empty(n_samples)
    u = np.empty(n_samples)
    pos = (x + 0.5 * L) * scale
    start = 0.0
    assigned = np.zeros(n_samples, dtype=bool)
    for i, (piece, length) in enumerate(pieces):
        last = i == len(pieces) - 1
        mask = (~assigned) & ((pos <= start + length) | last)
        if np.any(mask):
            s = np.clip(pos[mask] - start, 0.0, length)
            if isinstance(piece, Plateau):
                phi[mask] = piece.phi
                u[mask] = 0.0
            else:
                phi[mask], u[mask] = piece.sample(s)
            assigned |= mask
        start += length

    first, last = solution.path[0], solution.path[-1]
    phi[0] = first.start if isinstance(first, Leg) else first.phi
    phi[-1] = last.end if isinstance(last, Leg) else last.phi
    conc = np.array([system.concentrations(p) for p in phi])
    return Profile(x, phi, u, conc)
