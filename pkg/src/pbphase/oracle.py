"""Brute-force reference solutions: fixed-step RK4 on phi' = u, u' = -f(phi), plus shooting.

Nothing here touches the quadrature or root-finding code used by the solvers,
so agreement between the two paths is a meaningful check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .bvp import DirichletBC, Profile
from .errors import DomainError, NumericalError

PHI_CLAMP = 500.0
U_CLAMP = 1e150
MAX_STEP = 1e-3


class IVPState(NamedTuple):
    x: float
    phi: float
    u: float


@dataclass(frozen=True)
class Trajectory:
    x: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    blew_up: bool

    @property
    def states(self):
        return [IVPState(float(a), float(b), float(c)) for a, b, c in zip(self.x, self.phi, self.u)]

    @property
    def end(self):
        return IVPState(float(self.x[-1]), float(self.phi[-1]), float(self.u[-1]))


@njit(cache=True)
def _rhs_f(z, c, q0, phi):
    s = q0
    for j in range(z.shape[0]):
        e = -z[j] * phi
        if e > 700.0:
            e = 700.0
        s += z[j] * c[j] * math.exp(e)
    return s


@njit(cache=True)
def _rk4(z, c, q0, phi0, u0, h, nsteps, stride):
    """Integrate nsteps of size h, keeping every stride-th state.

    Returns (phi, u, kept) where kept is the number of valid stored states.
    """
    nout = nsteps // stride + 1
    phis = np.empty(nout)
    us = np.empty(nout)
    phi, u = phi0, u0
    phis[0], us[0] = phi, u
    k = 1
    for i in range(1, nsteps + 1):
        k1p = u
        k1u = -_rhs_f(z, c, q0, phi)
        k2p = u + 0.5 * h * k1u
        k2u = -_rhs_f(z, c, q0, phi + 0.5 * h * k1p)
        k3p = u + 0.5 * h * k2u
        k3u = -_rhs_f(z, c, q0, phi + 0.5 * h * k2p)
        k4p = u + h * k3u
        k4u = -_rhs_f(z, c, q0, phi + h * k3p)
        phi = phi + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        u = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        if not (abs(phi) < PHI_CLAMP and abs(u) < U_CLAMP):
            phis[k] = phi
            us[k] = u
            return phis, us, -(k + 1)
        if i % stride == 0:
            phis[k] = phi
            us[k] = u
            k += 1
    return phis, us, k


def _arrays(system):
    return (np.asarray(system.z, dtype=np.float64), np.asarray(system.c, dtype=np.float64),
            float(system.q0))


def _run(system, phi0, u0, x0, h, nsteps, stride):
    z, c, q0 = _arrays(system)
    phis, us, kept = _rk4(z, c, q0, float(phi0), float(u0), float(h), int(nsteps), int(stride))
    blew_up = kept < 0
    n = -kept if blew_up else kept
    x = x0 + h * stride * np.arange(n)
    return Trajectory(x, phis[:n].copy(), us[:n].copy(), blew_up)


def integrate_ivp(system, start: IVPState, x_end: float, step: float) -> Trajectory:
    """Classical RK4 from ``start`` to ``x_end``.  The step is shrunk so an
    integer number of steps lands exactly on ``x_end``."""
    span = x_end - start.x
    if not step > 0:
        raise DomainError("step must be positive")
    if not span >= step:
        raise DomainError("step exceeds the integration span")
    nsteps = int(math.ceil(span / step - 1e-9))
    return _run(system, start.phi, start.u, start.x, span / nsteps, nsteps, 1)


def _grid(L, n_samples):
    spacing = L / (n_samples - 1)
    per = max(1, int(math.ceil(spacing / min(MAX_STEP, L / 2000.0) - 1e-9)))
    return spacing / per, per * (n_samples - 1), per


def _endpoint(traj):
    # blow-ups count as overshooting in the direction of escape
    if traj.blew_up:
        return math.copysign(math.inf, traj.phi[-1])
    return float(traj.phi[-1])


def solve_dirichlet_shooting(system, bc: DirichletBC, tol: float = 1e-10,
                             n_samples: int = 201, max_expand: int = 200) -> Profile:
    """Bisection on u(-L/2) until phi(L/2) matches phi1.

    phi(L/2) increases with the initial slope, so a bracket always exists;
    failing to find one within ``max_expand`` doublings raises NumericalError.
    """
    if n_samples < 3:
        raise DomainError("n_samples must be at least 3")
    h, nsteps, stride = _grid(bc.L, n_samples)
    x0 = -0.5 * bc.L

    def shoot(u0):
        traj = _run(system, bc.phi0, u0, x0, h, nsteps, stride)
        return traj, _endpoint(traj)

    target = bc.phi1
    lo, hi = -1.0, 1.0
    _, e_lo = shoot(lo)
    _, e_hi = shoot(hi)
    for _ in range(max_expand):
        if e_lo <= target <= e_hi:
            break
        if e_lo > target:
            hi, e_hi = lo, e_lo
            lo *= 2.0
            _, e_lo = shoot(lo)
        else:
            lo, e_lo = hi, e_hi
            hi *= 2.0
            _, e_hi = shoot(hi)
    else:
        raise NumericalError("shooting bracket not found")

    u0 = 0.5 * (lo + hi)
    for _ in range(400):
        u0 = 0.5 * (lo + hi)
        if u0 in (lo, hi):
            break
        _, e = shoot(u0)
        if abs(e - target) <= tol:
            break
        if e < target:
            lo = u0
        else:
            hi = u0
    traj, e = shoot(u0)
    if traj.blew_up or len(traj.x) != n_samples:
        raise NumericalError("shooting trajectory blew up at the converged slope")
    x = np.linspace(x0, -x0, n_samples)
    conc = np.asarray(system.c)[None, :] * np.exp(-np.asarray(system.z)[None, :] * traj.phi[:, None])
    return Profile(x, traj.phi, traj.u, conc)


def hamiltonian_drift(profile: Profile, system) -> float:
    """max |H_i - H_0| along the samples, with H = u^2/2 + F(phi)."""
    if len(profile.x) == 0:
        raise DomainError("empty profile")
    z, c, q0 = _arrays(system)
    phi = np.asarray(profile.phi, dtype=float)
    F = q0 * phi - np.sum(c[:, None] * np.exp(np.clip(-z[:, None] * phi[None, :], -700, 700)), axis=0)
    H = 0.5 * np.asarray(profile.u) ** 2 + F
    return float(np.max(np.abs(H - H[0])))


# differential testing --------------------------------------------------------------

_KIND_SIGNS = {
    # (valence sign pattern, fixed-charge sign) for each portrait kind
    "Saddle": ("mixed", None),
    "EquilibriumAtPlusInfinity": ("pos", 0),
    "EquilibriumAtMinusInfinity": ("neg", 0),
    "NoEquilibriumLeftBounded": ("pos", 1),
    "NoEquilibriumRightBounded": ("neg", -1),
}


@dataclass(frozen=True)
class DiffCase:
    system: object
    bc: DirichletBC
    kind: str


@dataclass(frozen=True)
class DiffResult:
    case: DiffCase
    max_deviation: float
    drift: float
    h: float

    def passed(self, phi_tol=1e-6, drift_tol=1e-8):
        return self.max_deviation <= phi_tol and self.drift <= drift_tol * (1.0 + abs(self.h))


def random_cases(seed: int, count: int = 50):
    """Deterministic batch of Dirichlet problems cycling through the five portrait kinds.

    Potentials and separations are kept moderate so that shooting stays well
    conditioned (its sensitivity grows like exp(L sqrt|f'|)).
    """
    from .model import Electrolyte

    rng = np.random.default_rng(seed)
    kinds = list(_KIND_SIGNS)
    cases = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        pattern, qsign = _KIND_SIGNS[kind]
        n = int(rng.integers(1, 4)) if pattern != "mixed" else int(rng.integers(2, 4))
        mags = rng.choice([1.0, 2.0], size=n)
        if pattern == "pos":
            z = mags
        elif pattern == "neg":
            z = -mags
        else:
            signs = np.ones(n)
            signs[: int(rng.integers(1, n))] = -1.0
            z = mags * signs
        c = rng.uniform(0.2, 1.0, size=n)
        if qsign is None:
            q0 = float(rng.uniform(-0.5, 0.5))
        else:
            q0 = qsign * float(rng.uniform(0.1, 0.8))
        system = Electrolyte.from_lists(list(z), list(c), q0)
        phi0 = float(rng.uniform(-1.5, 1.5))
        phi1 = phi0 if rng.random() < 0.3 else float(rng.uniform(-1.5, 1.5))
        L = float(rng.uniform(0.5, 4.0))
        cases.append(DiffCase(system, DirichletBC(phi0, phi1, L), kind))
    return cases


def differential_check(case: DiffCase, n_samples: int = 201) -> DiffResult:
    from .bvp import reconstruct_profile, solve_dirichlet_general

    sol = solve_dirichlet_general(case.system, case.bc.phi0, case.bc.phi1, case.bc.L)
    fast = reconstruct_profile(case.system, sol, case.bc, n_samples)
    slow = solve_dirichlet_shooting(case.system, case.bc, n_samples=n_samples)
    dev = float(np.max(np.abs(fast.phi - slow.phi)))
    return DiffResult(case, dev, hamiltonian_drift(fast, case.system), sol.h)
