"""Electrolyte description, field functions and phase-portrait classification.

Dimensionless Poisson-Boltzmann problem::

    phi'' + f(phi) = 0,   f(phi) = sum_j z_j c_j exp(-z_j phi) + q0
    F(phi) = q0 phi - sum_j c_j exp(-z_j phi)      (F' = f, F'' = f' < 0)
    H(phi, u) = u**2 / 2 + F(phi)

Every exponent ``-z_j phi`` is clamped to [-700, 700]; evaluations that hit
the clamp carry ``saturated=True``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import constants

from ._roots import monotone_root
from .errors import DomainError, UsageError

EXP_CLAMP = 700.0


def _clamped(e):
    if e > EXP_CLAMP:
        return EXP_CLAMP, True
    if e < -EXP_CLAMP:
        return -EXP_CLAMP, True
    return e, False


def _exp(e):
    return math.exp(e) if e < 709.0 else math.inf


def _psi(x):
    """expm1(x) - x without cancellation for small x."""
    if abs(x) < 0.05:
        term, total = x * x / 2.0, 0.0
        for k in range(3, 12):
            total += term
            term *= x / k
        return total
    return math.expm1(x) - x


def _psi_array(x):
    x = np.minimum(np.asarray(x, dtype=float), EXP_CLAMP)
    small = np.abs(x) < 0.05
    xs = np.where(small, x, 0.0)
    term = xs * xs / 2.0
    series = np.zeros_like(xs)
    for k in range(3, 12):
        series = series + term
        term = term * xs / k
    return np.where(small, series, np.expm1(x) - x)


@dataclass(frozen=True)
class IonSpecies:
    z: float
    c: float

    def __post_init__(self):
        if not math.isfinite(self.z) or self.z == 0:
            raise DomainError(f"valence must be finite and nonzero, got {self.z!r}")
        if not math.isfinite(self.c) or self.c <= 0:
            raise DomainError(f"bulk concentration must be positive, got {self.c!r}")


@dataclass(frozen=True)
class DimensionalContext:
    """Physical parameters used to attach units to dimensionless results.

    ``concentrations_mM`` are bulk concentrations in mol/m^3 (= mM), one per
    species.  ``characteristic_concentration_mM`` only appears in the
    electrochemical potential and never changes dimensionless results.
    """

    temperature_K: float = 298.15
    epsilon_r: float = 78.5
    concentrations_mM: tuple = ()
    characteristic_concentration_mM: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "concentrations_mM", tuple(float(c) for c in self.concentrations_mM))
        vals = (self.temperature_K, self.epsilon_r, self.characteristic_concentration_mM,
                *self.concentrations_mM)
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise DomainError("dimensional parameters must be strictly positive")

    @property
    def thermal_energy(self):
        return constants.k * self.temperature_K


@dataclass(frozen=True)
class Electrolyte:
    """Ion species plus a uniform fixed charge, in dimensionless form.

    The constructor stores concentrations as given.  Use ``from_lists`` (or
    ``normalized()``) to rescale so that ``sum z_j**2 c_j == 1``; the divisor is
    kept in ``scale`` for going back to physical units.
    """

    species: tuple
    q0: float = 0.0
    scale: float = 1.0
    dimensional: Optional[DimensionalContext] = field(default=None, compare=False)

    def __post_init__(self):
        sp = tuple(s if isinstance(s, IonSpecies) else IonSpecies(*s) for s in self.species)
        if not sp:
            raise DomainError("an electrolyte needs at least one ion species")
        if not math.isfinite(self.q0):
            raise DomainError("fixed charge must be finite")
        object.__setattr__(self, "species", sp)
        object.__setattr__(self, "q0", float(self.q0))

    @classmethod
    def from_lists(cls, z: Sequence[float], c: Sequence[float], q0: float = 0.0,
                   normalize: bool = True, dimensional=None) -> "Electrolyte":
        if len(z) != len(c):
            raise DomainError("valences and concentrations differ in length")
        system = cls(tuple(IonSpecies(float(zj), float(cj)) for zj, cj in zip(z, c)), q0,
                     dimensional=dimensional)
        return system.normalized() if normalize else system

    def normalized(self) -> "Electrolyte":
        lam = self.ionic_strength
        if lam <= 0 or not math.isfinite(lam):
            raise DomainError("total ionic strength must be positive")
        sp = tuple(IonSpecies(s.z, s.c / lam) for s in self.species)
        return Electrolyte(sp, self.q0 / lam, self.scale * lam, self.dimensional)

    @property
    def z(self):
        return tuple(s.z for s in self.species)

    @property
    def c(self):
        return tuple(s.c for s in self.species)

    @cached_property
    def _pairs(self):
        return tuple((s.z, s.c) for s in self.species)

    @cached_property
    def z_array(self):
        return np.array(self.z)

    @cached_property
    def c_array(self):
        return np.array(self.c)

    @property
    def ionic_strength(self):
        return sum(s.z * s.z * s.c for s in self.species)

    @property
    def is_normalized(self):
        return abs(self.ionic_strength - 1.0) <= 1e-12

    @property
    def has_anions(self):
        return any(s.z < 0 for s in self.species)

    @property
    def has_cations(self):
        return any(s.z > 0 for s in self.species)

    # field functions -------------------------------------------------------

    def _f_raw(self, phi):
        total = self.q0
        for z, c in self._pairs:
            e, _ = _clamped(-z * phi)
            total += z * c * math.exp(e)
        return total

    @cached_property
    def _anchor(self):
        # (phi*, [(z, c e^{-z phi*})]) for saddle systems, else None
        zs, q0 = self.z, self.q0
        all_pos = all(z > 0 for z in zs)
        all_neg = all(z < 0 for z in zs)
        if not ((all_pos and q0 < 0) or (all_neg and q0 > 0) or not (all_pos or all_neg)):
            return None
        ps = find_phi_star(self)
        return ps, tuple((z, c * math.exp(_clamped(-z * ps)[0])) for z, c in self._pairs)

    def f(self, phi):
        anchor = self._anchor
        if anchor is not None and abs(phi - anchor[0]) <= 1.0:
            # measured from the saddle, where f vanishes by construction;
            # avoids the cancellation of the direct sum near phi*
            delta = phi - anchor[0]
            return sum(z * cs * math.expm1(-z * delta) for z, cs in anchor[1])
        return self._f_raw(phi)

    def fprime(self, phi):
        total = 0.0
        for z, c in self._pairs:
            e, _ = _clamped(-z * phi)
            total -= z * z * c * math.exp(e)
        return total

    def F(self, phi):
        total = self.q0 * phi
        for z, c in self._pairs:
            e, _ = _clamped(-z * phi)
            total -= c * math.exp(e)
        return total

    def gap(self, ref, phi, beta=0.0):
        """``beta + F(ref) - F(phi)`` without cancellation near ``phi == ref``.

        An infinite ``ref`` stands for an equilibrium at infinity, whose level
        is ``F = 0``.
        """
        if math.isinf(ref):
            return beta - self.F(phi)
        return self.gap_offset(ref, ref - phi, beta)

    def gap_offset(self, ref, d, beta=0.0):
        """Same as ``gap`` with ``phi = ref - d``; exact for tiny ``d``.

        Uses ``F(ref) - F(ref - d) = f(ref) d + sum_j c_j e^{-z_j ref} psi(z_j d)``
        with ``psi(x) = e^x - 1 - x >= 0``, so the only rounding in the linear
        term is that of ``f(ref)`` itself.
        """
        total = beta + self.f(ref) * d
        for z, c in self._pairs:
            e, x = -z * ref, z * d
            if abs(x) < 30.0:
                total += c * _exp(e) * _psi(x)
            else:
                # large offsets: e^{e+x} stays representable where e^e and e^x may not
                total += c * (_exp(e + x) - _exp(e) * (1.0 + x))
        return total

    def gap_array(self, ref, phi, beta=0.0):
        phi = np.asarray(phi, dtype=float)
        if math.isinf(ref):
            return beta - self.F_array(phi)
        return self.gap_offset_array(ref, ref - phi, beta)

    def gap_offset_array(self, ref, d, beta=0.0):
        d = np.asarray(d, dtype=float)
        total = beta + self.f(ref) * d
        for z, c in self._pairs:
            e, x = -z * ref, z * d
            with np.errstate(over="ignore", invalid="ignore"):
                big = c * (np.exp(np.minimum(e + x, 709.0)) - _exp(e) * (1.0 + x))
                small = c * _exp(e) * _psi_array(np.clip(x, -30.0, 30.0))
            total = total + np.where(np.abs(x) < 30.0, small, big)
        return total

    def F_array(self, phi):
        phi = np.asarray(phi, dtype=float)
        e = np.clip(-self.z_array[:, None] * phi[None, :], -EXP_CLAMP, EXP_CLAMP)
        return self.q0 * phi - np.sum(self.c_array[:, None] * np.exp(e), axis=0)

    def concentrations(self, phi):
        """Boltzmann concentrations ``c_j exp(-z_j phi)`` at one potential."""
        return [c * math.exp(_clamped(-z * phi)[0]) for z, c in self._pairs]

    # json ------------------------------------------------------------------

    def to_json(self):
        out = {"species": [{"z": s.z, "c": s.c} for s in self.species], "q0": self.q0}
        if self.scale != 1.0:
            out["scale"] = self.scale
        if self.dimensional is not None:
            d = self.dimensional
            out["dimensional"] = {"temperature_K": d.temperature_K, "epsilon_r": d.epsilon_r,
                                  "concentrations_mM": list(d.concentrations_mM)}
        return out

    @classmethod
    def from_json(cls, data, normalize=True) -> "Electrolyte":
        try:
            if "species" in data:
                z = [float(s["z"]) for s in data["species"]]
                c = [float(s["c"]) for s in data["species"]]
            else:
                z = [float(v) for v in data["z"]]
                c = [float(v) for v in data["c"]]
            q0 = float(data.get("q0", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed electrolyte: {exc}") from None
        dim = None
        if data.get("dimensional") is not None:
            block = data["dimensional"]
            dim = DimensionalContext(
                temperature_K=float(block.get("temperature_K", 298.15)),
                epsilon_r=float(block.get("epsilon_r", 78.5)),
                concentrations_mM=tuple(block.get("concentrations_mM", ())),
            )
        system = cls.from_lists(z, c, q0, normalize=False, dimensional=dim)
        if "scale" in data:
            system = cls(system.species, system.q0, float(data["scale"]), dim)
        return system.normalized() if normalize else system


class Evaluation(NamedTuple):
    f: float
    f_prime: float
    F: float
    saturated: bool


def evaluate(system: Electrolyte, phi: float) -> Evaluation:
    f = fp = 0.0
    F = system.q0 * phi
    saturated = False
    for z, c in system._pairs:
        e, hit = _clamped(-z * phi)
        saturated |= hit
        w = c * math.exp(e)
        f += z * w
        fp -= z * z * w
        F -= w
    return Evaluation(f + system.q0, fp, F, saturated)


def hamiltonian(system: Electrolyte, phi: float, u: float) -> float:
    return 0.5 * u * u + system.F(phi)


# classification ---------------------------------------------------------------

class PortraitKind(str, enum.Enum):
    SADDLE = "Saddle"
    EQ_PLUS_INF = "EquilibriumAtPlusInfinity"
    EQ_MINUS_INF = "EquilibriumAtMinusInfinity"
    NO_EQ_LEFT_BOUNDED = "NoEquilibriumLeftBounded"
    NO_EQ_RIGHT_BOUNDED = "NoEquilibriumRightBounded"

    def mirror(self):
        return _MIRROR[self]


_MIRROR = {
    PortraitKind.SADDLE: PortraitKind.SADDLE,
    PortraitKind.EQ_PLUS_INF: PortraitKind.EQ_MINUS_INF,
    PortraitKind.EQ_MINUS_INF: PortraitKind.EQ_PLUS_INF,
    PortraitKind.NO_EQ_LEFT_BOUNDED: PortraitKind.NO_EQ_RIGHT_BOUNDED,
    PortraitKind.NO_EQ_RIGHT_BOUNDED: PortraitKind.NO_EQ_LEFT_BOUNDED,
}


@dataclass(frozen=True)
class PhasePortrait:
    kind: PortraitKind
    phi_star: Optional[float] = None
    F_e: Optional[float] = None

    @property
    def has_equilibrium(self):
        return self.F_e is not None

    @property
    def phi_e(self):
        """Equilibrium location, +-inf for equilibria at infinity, None otherwise."""
        if self.kind is PortraitKind.SADDLE:
            return self.phi_star
        if self.kind is PortraitKind.EQ_PLUS_INF:
            return math.inf
        if self.kind is PortraitKind.EQ_MINUS_INF:
            return -math.inf
        return None

    def to_json(self):
        return {"kind": self.kind.value, "phi_star": self.phi_star, "F_e": self.F_e}


def find_phi_star(system: Electrolyte) -> float:
    """Root of the strictly decreasing f: expanding bisection, Newton polish."""
    f = system._f_raw
    lo, hi = -1.0, 1.0
    for _ in range(2000):
        if f(lo) > 0:
            break
        lo *= 2.0
    for _ in range(2000):
        if f(hi) < 0:
            break
        hi *= 2.0
    if not (f(lo) > 0 > f(hi)):
        raise DomainError("f has no sign change; the system has no finite equilibrium")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= 1e-15 * (1.0 + abs(mid)):
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(5):
        fx, fpx = f(x), system.fprime(x)
        if fx == 0 or fpx == 0:
            break
        nxt = x - fx / fpx
        if not lo <= nxt <= hi:
            break
        x = nxt
    return x


def classify(system: Electrolyte) -> PhasePortrait:
    zs, q0 = system.z, system.q0
    all_pos = all(z > 0 for z in zs)
    all_neg = all(z < 0 for z in zs)
    mixed = not (all_pos or all_neg)
    if mixed or (all_pos and q0 < 0) or (all_neg and q0 > 0):
        phi_star = system._anchor[0]
        return PhasePortrait(PortraitKind.SADDLE, phi_star, system.F(phi_star))
    if q0 == 0:
        kind = PortraitKind.EQ_PLUS_INF if all_pos else PortraitKind.EQ_MINUS_INF
        return PhasePortrait(kind, None, 0.0)
    kind = PortraitKind.NO_EQ_LEFT_BOUNDED if all_pos else PortraitKind.NO_EQ_RIGHT_BOUNDED
    return PhasePortrait(kind, None, None)


def level_curve(system: Electrolyte, h: float, phi_samples):
    """Points of the level set H = h over the given potentials.

    Returns ``(phi, u_plus, u_minus)`` for each sample with ``h >= F(phi)``.
    """
    out = []
    for phi in phi_samples:
        g = h - system.F(phi)
        if g < 0:
            continue
        u = math.sqrt(2.0 * g)
        out.append((float(phi), u, -u if u else 0.0))
    return out


class InverseBranch(str, enum.Enum):
    RIGHT = "RightOfEquilibrium"
    LEFT = "LeftOfEquilibrium"
    GLOBAL = "Global"


def decreasing_branch(portrait: PhasePortrait) -> InverseBranch:
    """Branch on which F is decreasing (the side positive surface charge lives on)."""
    if portrait.kind is PortraitKind.SADDLE:
        return InverseBranch.RIGHT
    if portrait.kind in (PortraitKind.EQ_MINUS_INF, PortraitKind.NO_EQ_RIGHT_BOUNDED):
        return InverseBranch.GLOBAL
    raise DomainError(f"F is increasing everywhere for a {portrait.kind.value} system")


def F_inverse(system: Electrolyte, y: float, branch=InverseBranch.GLOBAL,
              portrait: Optional[PhasePortrait] = None) -> float:
    portrait = portrait or classify(system)
    branch = InverseBranch(branch)
    if portrait.kind is PortraitKind.SADDLE:
        if branch is InverseBranch.GLOBAL:
            raise UsageError("F is not monotone for a saddle system; pick a side")
        if y > portrait.F_e:
            raise DomainError(f"{y} exceeds the maximum F_e = {portrait.F_e}")
        ps = portrait.phi_star
        if y == portrait.F_e:
            return ps
        domain = (ps, math.inf) if branch is InverseBranch.RIGHT else (-math.inf, ps)
        hint = (ps + 0.5, ps + 1.0) if branch is InverseBranch.RIGHT else (ps - 1.0, ps - 0.5)
    else:
        phi_e = portrait.phi_e
        allowed = {InverseBranch.GLOBAL}
        if phi_e == -math.inf:
            allowed.add(InverseBranch.RIGHT)
        if phi_e == math.inf:
            allowed.add(InverseBranch.LEFT)
        if branch not in allowed:
            raise UsageError(f"branch {branch.value} undefined for {portrait.kind.value}")
        if portrait.F_e is not None and y >= portrait.F_e:
            raise DomainError(f"{y} is outside the range of F (sup {portrait.F_e})")
        domain, hint = (-math.inf, math.inf), (-1.0, 1.0)

    def resid(phi):
        return system.F(phi) - y

    return monotone_root(resid, hint, tol=1e-15, domain=domain,
                         boundary_gap=lambda b: 0.0)


# units ------------------------------------------------------------------------

class Nondimensionalized(NamedTuple):
    system: Electrolyte
    debye_length: float


def debye_length(ctx: DimensionalContext, valences) -> float:
    """Debye length in metres for bulk concentrations in mol/m^3."""
    lam = sum(z * z * c for z, c in zip(valences, ctx.concentrations_mM)) * constants.N_A
    if lam <= 0:
        raise DomainError("total ionic strength must be positive")
    return math.sqrt(ctx.epsilon_r * constants.epsilon_0 * ctx.thermal_energy
                     / (constants.e ** 2 * lam))


def nondimensionalize(ctx: DimensionalContext, valences, q0_physical: float = 0.0) -> Nondimensionalized:
    """Dimensionless electrolyte and Debye length from physical data.

    ``q0_physical`` is the fixed charge in mol/m^3 of elementary charges, the
    same unit as the concentrations.
    """
    if len(valences) != len(ctx.concentrations_mM):
        raise DomainError("one concentration per valence is required")
    lam = sum(z * z * c for z, c in zip(valences, ctx.concentrations_mM))
    if lam <= 0:
        raise DomainError("total ionic strength must be positive")
    system = Electrolyte.from_lists(valences, ctx.concentrations_mM, q0_physical,
                                    normalize=True, dimensional=ctx)
    return Nondimensionalized(system, debye_length(ctx, valences))


def reflect(system: Electrolyte) -> Electrolyte:
    """(phi, z, q0) -> (-phi, -z, -q0), which leaves the PB equation invariant."""
    sp = tuple(IonSpecies(-s.z, s.c) for s in system.species)
    return Electrolyte(sp, -system.q0, system.scale, system.dimensional)
