import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pbphase.bvp import (
    Branch, DirichletBC, L0Form, NeumannBC, boundary_map_G, critical_L0,
    neumann_existence, neumann_time_map_M, reconstruct_profile, solve_dirichlet_equal,
    solve_dirichlet_general, solve_neumann, time_map_T, time_map_T1, time_map_T2,
    time_map_T2_parts,
)
from pbphase.errors import DivergenceError, DomainError, NoSolutionError, UsageError
from pbphase.model import Electrolyte, reflect
from pbphase.oracle import IVPState, hamiltonian_drift, integrate_ivp
from pbphase.quadrature import level_integral

from conftest import LN2

SQ2 = math.sqrt(2.0)


def counterion_equal_L(phi0, alpha):
    # phi'' = -e^{-phi}: phi = alpha + 2 ln cos(kx), k^2 = e^{-alpha} / 2
    return 2 * SQ2 * math.exp(alpha / 2) * math.acos(math.exp((phi0 - alpha) / 2))


def counterion_L0(phi0, phi1):
    return SQ2 * math.exp(phi1 / 2) * math.acos(math.exp((phi0 - phi1) / 2))


def drift_ok(profile, system, h):
    return hamiltonian_drift(profile, system) <= 1e-8 * (1 + abs(h))


# boundary conditions ----------------------------------------------------------

def test_bc_validation():
    with pytest.raises(DomainError):
        DirichletBC(0.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        NeumannBC(1.0, -1.0)
    with pytest.raises(DomainError):
        DirichletBC(math.nan, 1.0, 1.0)


# equal-potential Dirichlet ----------------------------------------------------

class TestTimeMapT:
    def test_counterion_closed_form(self, cation_only):
        L = time_map_T(cation_only, 0.0, 2 * LN2)
        assert L == pytest.approx(4 * SQ2 * math.pi / 3, rel=1e-12)
        assert L == pytest.approx(counterion_equal_L(0.0, 2 * LN2), rel=1e-12)

    def test_vanishes_at_plate(self, cation_only):
        vals = [time_map_T(cation_only, 0.0, d) for d in (1e-2, 1e-4, 1e-6)]
        assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-2

    def test_symmetric_salt_against_ivp(self, sym11):
        L = time_map_T(sym11, -1.0, -0.5)
        # integrate from the turning point (alpha, 0) for half the separation
        traj = integrate_ivp(sym11, IVPState(0.0, -0.5, 0.0), L / 2, 1e-4)
        assert traj.end.phi == pytest.approx(-1.0, abs=1e-9)

    def test_wrong_side(self, sym11):
        with pytest.raises(DomainError):
            time_map_T(sym11, -1.0, -1.5)
        with pytest.raises(DomainError):
            time_map_T(sym11, -1.0, 0.5)

    def test_saddle_guard(self, sym11):
        with pytest.raises(DivergenceError):
            time_map_T(sym11, -1.0, -1e-16)

    @pytest.mark.parametrize("which", ["sym11", "cation_only", "anion_only"])
    def test_strictly_increasing(self, which, request):
        s = request.getfixturevalue(which)
        phi0 = -1.0 if which != "anion_only" else 1.0
        end = {"sym11": 0.0, "cation_only": 6.0, "anion_only": -6.0}[which]
        alphas = phi0 + (end - phi0) * np.linspace(0.02, 0.98, 25)
        T = [time_map_T(s, phi0, a) for a in alphas]
        assert np.all(np.diff(T) > 0)


class TestSolveEqual:
    def test_constant_at_saddle(self, sym11):
        sol = solve_dirichlet_equal(sym11, 0.0, 3.0)
        assert sol.branch is Branch.CONSTANT and sol.alpha == 0.0
        prof = reconstruct_profile(sym11, sol, DirichletBC(0.0, 0.0, 3.0), 11)
        assert np.all(prof.phi == 0.0) and np.all(prof.u == 0.0)
        assert np.allclose(prof.concentrations, 0.5)

    def test_counterion_inverse(self, cation_only):
        L = 4 * SQ2 * math.pi / 3
        sol = solve_dirichlet_equal(cation_only, 0.0, L)
        assert sol.branch is Branch.INTERIOR_MAX
        assert sol.alpha == pytest.approx(2 * LN2, abs=1e-10)

    def test_counterion_profile(self, cation_only):
        L = 4 * SQ2 * math.pi / 3
        sol = solve_dirichlet_equal(cation_only, 0.0, L)
        prof = reconstruct_profile(cation_only, sol, DirichletBC(0.0, 0.0, L), 401)
        k = math.exp(-LN2) / SQ2  # sqrt(e^{-alpha} / 2) with alpha = 2 ln 2
        exact = 2 * LN2 + 2 * np.log(np.cos(k * prof.x))
        assert np.max(np.abs(prof.phi - exact)) < 1e-9
        assert np.max(np.abs(prof.u + 2 * k * np.tan(k * prof.x))) < 1e-8
        assert drift_ok(prof, cation_only, sol.h)

    def test_approaches_saddle(self, sym11):
        a10 = solve_dirichlet_equal(sym11, -2.0, 10.0).alpha
        a20 = solve_dirichlet_equal(sym11, -2.0, 20.0).alpha
        assert a10 < 0 and a20 < 0 and abs(a20) < abs(a10)

    def test_boundary_slope(self, sym11):
        sol = solve_dirichlet_equal(sym11, 1.0, 2.0)
        prof = reconstruct_profile(sym11, sol, DirichletBC(1.0, 1.0, 2.0), 101)
        slope = math.sqrt(2 * (sym11.F(sol.alpha) - sym11.F(1.0)))
        assert abs(prof.u[0]) == pytest.approx(slope, rel=1e-8)

    def test_saturates_for_huge_L(self, sym11):
        sol = solve_dirichlet_equal(sym11, -2.0, 200.0)
        assert sol.saturated and sol.alpha == 0.0
        prof = reconstruct_profile(sym11, sol, DirichletBC(-2.0, -2.0, 200.0), 201)
        assert prof.phi[0] == -2.0 and prof.phi[-1] == -2.0
        assert abs(prof.phi[100]) < 1e-9


# Neumann ------------------------------------------------------------------------

class TestBoundaryMap:
    def test_symmetric_salt(self, sym11):
        assert boundary_map_G(sym11, 0.0, 2.0) == pytest.approx(math.acosh(3.0), rel=1e-13)

    def test_anion_only(self, anion_only):
        assert boundary_map_G(anion_only, 0.0, 1.0) == pytest.approx(math.log(1.5), rel=1e-13)

    def test_small_sigma(self, sym11):
        assert boundary_map_G(sym11, 0.4, 1e-9) == pytest.approx(0.4, abs=1e-8)
        assert boundary_map_G(sym11, 0.4, 0.0) == 0.4

    def test_out_of_range(self, cation_only):
        # sigma^2 >= 2 e^{-alpha} can never be reached from above
        with pytest.raises(NoSolutionError):
            boundary_map_G(cation_only, 0.0, 1.5)

    @given(st.floats(0.05, 3.0), st.floats(0.01, 5.0))
    def test_bound_chain(self, alpha, sigma):
        s = Electrolyte.from_lists([1, -1], [0.5, 0.5])
        G = boundary_map_G(s, alpha, sigma)
        lower = -sigma * sigma / (2 * s.f(G))
        assert 0 < lower < G - alpha


class TestNeumannM:
    def test_anion_closed_form(self, anion_only):
        M = neumann_time_map_M(anion_only, LN2, 2.0)
        assert M == pytest.approx(math.pi / (2 * SQ2), rel=1e-12)

    def test_diverges_near_saddle(self, sym11):
        vals = [neumann_time_map_M(sym11, a, 1.0) for a in (1e-2, 1e-5, 1e-9)]
        assert vals[0] < vals[1] < vals[2] and vals[2] > 20

    def test_limit_no_equilibrium(self):
        s = Electrolyte.from_lists([-1], [1], -0.5)
        sigma = 1.0
        M = neumann_time_map_M(s, -40.0, sigma)
        assert M == pytest.approx(-SQ2 * sigma / -0.5, rel=1e-6)

    @given(st.floats(0.05, 2.0), st.floats(0.1, 3.0))
    def test_decreasing_in_alpha_and_bounded(self, alpha, sigma):
        s = Electrolyte.from_lists([1, -1], [0.5, 0.5])
        m1 = neumann_time_map_M(s, alpha, sigma)
        m2 = neumann_time_map_M(s, alpha + 0.05, sigma)
        assert m2 < m1
        G = boundary_map_G(s, alpha, sigma)
        assert -SQ2 * sigma / s.f(G) / SQ2 < m1 * SQ2 / SQ2 < -SQ2 * sigma / s.f(alpha)


class TestNeumannExistence:
    def test_case_I(self, sym11):
        assert neumann_existence(sym11, 0.7, 5.0).case == "I"

    def test_case_II(self):
        s = Electrolyte.from_lists([1], [1], -1.0)
        assert neumann_existence(s, 1.0, 3.0).case == "II"
        res = neumann_existence(s, 1.0, 2.0)
        assert res.case is None and "L>−2σ/q₀" in res.constraint

    def test_case_III(self):
        s = Electrolyte.from_lists([-1], [1], -0.5)
        assert neumann_existence(s, 1.0, 3.0).case == "III"
        assert neumann_existence(s, 1.0, 5.0).case is None

    def test_none_for_counterion(self, cation_only):
        assert neumann_existence(cation_only, 1.0, 7.0).case is None

    def test_negative_sigma_reflects(self, cation_only, anion_only):
        assert neumann_existence(anion_only, -1.0, 2.0).case is None
        assert neumann_existence(cation_only, -1.0, 2.0).case == "I"


class TestSolveNeumann:
    def test_anion_closed_form(self, anion_only):
        sol = solve_neumann(anion_only, 2.0, math.pi / 2)
        assert sol.branch is Branch.INTERIOR_MIN
        assert sol.alpha == pytest.approx(LN2, abs=1e-11)
        assert sol.phi_s == pytest.approx(boundary_map_G(anion_only, LN2, 2.0), abs=1e-10)
        bc = NeumannBC(2.0, math.pi / 2)
        prof = reconstruct_profile(anion_only, sol, bc, 201)
        exact = LN2 - 2 * np.log(np.cos(prof.x))
        assert np.max(np.abs(prof.phi - exact)) < 1e-9

    def test_large_L_limit(self, sym11):
        # alpha decays like e^{-L/2}
        alphas = [solve_neumann(sym11, 2.0, L).alpha for L in (10.0, 20.0, 40.0)]
        assert alphas[0] > alphas[1] > alphas[2] > 0 and alphas[2] < 1e-7
        phi_s = solve_neumann(sym11, 2.0, 40.0).phi_s
        assert phi_s == pytest.approx(math.acosh(3.0), abs=1e-7)
        # Grahame: sigma = 2 sinh(phi_s / 2)
        assert 2 * math.sinh(phi_s / 2) == pytest.approx(2.0, abs=1e-7)

    def test_excluded_boundary(self):
        s = Electrolyte.from_lists([1], [1], -1.0)
        with pytest.raises(NoSolutionError) as info:
            solve_neumann(s, 1.0, 2.0)
        assert "L>−2σ/q₀" in info.value.constraint

    def test_boundary_slopes(self, sym11):
        sol = solve_neumann(sym11, 2.0, 10.0)
        prof = reconstruct_profile(sym11, sol, NeumannBC(2.0, 10.0), 201)
        assert prof.u[0] == pytest.approx(-2.0, abs=1e-8)
        assert prof.u[-1] == pytest.approx(2.0, abs=1e-8)

    @pytest.mark.parametrize("system,sigma,L", [
        (Electrolyte.from_lists([1, -1], [0.5, 0.5]), 2.0, 10.0),
        (Electrolyte.from_lists([-1], [1]), 2.0, math.pi / 2),
        (Electrolyte.from_lists([1], [1], -1.0), 1.0, 3.0),
        (Electrolyte.from_lists([2, -1], [0.3, 0.6]), -1.5, 4.0),
    ])
    def test_total_charge(self, system, sigma, L):
        sol = solve_neumann(system, sigma, L)
        prof = reconstruct_profile(system, sol, NeumannBC(sigma, L), 20001)
        rho = system.q0 + np.sum(np.asarray(system.z) * prof.concentrations, axis=1)
        assert np.trapezoid(rho, prof.x) == pytest.approx(-2 * sigma, abs=1e-6)

    def test_zero_sigma(self, sym11):
        sol = solve_neumann(sym11, 0.0, 3.0)
        assert sol.branch is Branch.CONSTANT

    def test_alpha_monotone_in_sigma_and_L(self, sym11):
        by_sigma = [solve_neumann(sym11, s, 2.0).alpha for s in np.linspace(0.2, 4.0, 12)]
        by_L = [solve_neumann(sym11, 1.0, L).alpha for L in np.linspace(0.5, 8.0, 12)]
        assert np.all(np.diff(by_sigma) > 0)
        assert np.all(np.diff(by_L) < 0)

    @given(st.floats(0.1, 3.0), st.floats(0.3, 6.0), st.floats(0.1, 3.0), st.floats(0.3, 6.0))
    def test_alpha_monotone_property(self, s1, L1, s2, L2):
        sys = Electrolyte.from_lists([1, -1, 2], [0.4, 0.8, 0.2])
        lo_s, hi_s = sorted((s1, s2))
        if hi_s - lo_s > 1e-3:
            assert solve_neumann(sys, lo_s, L1).alpha < solve_neumann(sys, hi_s, L1).alpha
        lo_L, hi_L = sorted((L1, L2))
        if hi_L - lo_L > 1e-3:
            assert solve_neumann(sys, s1, lo_L).alpha > solve_neumann(sys, s1, hi_L).alpha


# unequal Dirichlet --------------------------------------------------------------

class TestCriticalL0:
    def test_counterion(self, cation_only):
        res = critical_L0(cation_only, 0.0, 2 * LN2)
        assert res.form is L0Form.PLUS and res.condition == "a.1"
        assert res.L0 == pytest.approx(2 * SQ2 * math.pi / 3, rel=1e-12)
        assert res.L0 == pytest.approx(counterion_L0(0.0, 2 * LN2), rel=1e-12)

    def test_below_saddle(self, sym11):
        res = critical_L0(sym11, -2.0, -1.0)
        assert res.form is L0Form.PLUS
        dense = level_integral(sym11, -1.0, -2.0, -1.0, rel_tol=1e-12) / SQ2
        assert res.L0 == pytest.approx(dense, rel=1e-8)

    def test_above_saddle_minus(self, sym11):
        res = critical_L0(sym11, 1.0, 2.0)
        assert res.form is L0Form.MINUS and res.condition == "b.4"
        assert res.L0 == pytest.approx(critical_L0(sym11, -2.0, -1.0).L0, rel=1e-10)

    def test_straddle(self, sym11):
        res = critical_L0(sym11, -1.0, 1.0)
        assert res.form is L0Form.NOT_APPLICABLE and res.L0 == math.inf

    def test_order_required(self, sym11):
        with pytest.raises(DomainError):
            critical_L0(sym11, 1.0, -1.0)


class TestT1T2:
    def test_T1_at_zero(self, cation_only):
        assert time_map_T1(cation_only, 0.0, 2 * LN2, 0.0) == pytest.approx(
            counterion_L0(0.0, 2 * LN2), rel=1e-12)

    def test_T1_decreasing_to_zero(self, cation_only):
        betas = np.geomspace(1e-6, 1e6, 30)
        T = [time_map_T1(cation_only, 0.0, 2 * LN2, b) for b in betas]
        assert np.all(np.diff(T) < 0) and T[-1] < 1e-2

    def test_T1_domain(self, cation_only):
        with pytest.raises(DomainError):
            time_map_T1(cation_only, 0.0, 1.0, -1.0)

    def test_T2_parts(self, sym11):
        a = (-1.0 + 0.0) / 2
        t21, t22 = time_map_T2_parts(sym11, -2.0, -1.0, a)
        i1 = level_integral(sym11, a, -2.0, a) / SQ2
        i2 = level_integral(sym11, a, -1.0, a) / SQ2
        assert t21 + t22 == pytest.approx(i1 + i2, rel=1e-12)

    def test_T2_increasing_from_L0(self, sym11):
        L0 = critical_L0(sym11, -2.0, -1.0).L0
        alphas = -1.0 + np.linspace(1e-6, 1 - 1e-6, 20)
        T = [time_map_T2(sym11, -2.0, -1.0, a) for a in alphas]
        assert np.all(np.diff(T) > 0)
        assert T[0] == pytest.approx(L0, rel=1e-2)
        with pytest.raises(DomainError):
            time_map_T2(sym11, -2.0, -1.0, -1.5)


class TestSolveGeneral:
    def test_monotone_counterion(self, cation_only):
        sol = solve_dirichlet_general(cation_only, 0.0, 2 * LN2, 2.0)
        assert sol.branch is Branch.INCREASING
        assert time_map_T1(cation_only, 0.0, 2 * LN2, sol.beta) == pytest.approx(2.0, rel=1e-10)

    def test_nonmonotone_counterion(self, cation_only):
        sol = solve_dirichlet_general(cation_only, 0.0, 2 * LN2, 4.0)
        assert sol.branch is Branch.INTERIOR_MAX and sol.alpha > 2 * LN2
        assert time_map_T2(cation_only, 0.0, 2 * LN2, sol.alpha) == pytest.approx(4.0, rel=1e-10)

    @pytest.mark.parametrize("L", [0.5, 3.0, 12.0])
    def test_straddle_monotone(self, sym11, L):
        sol = solve_dirichlet_general(sym11, -1.0, 1.0, L)
        assert sol.branch is Branch.INCREASING
        prof = reconstruct_profile(sym11, sol, DirichletBC(-1.0, 1.0, L), 201)
        assert np.all(np.diff(prof.phi) > 0)
        # u first decreases then increases
        k = int(np.argmin(prof.u))
        assert 0 < k < 200
        assert np.all(np.diff(prof.u[: k + 1]) <= 1e-12)
        assert np.all(np.diff(prof.u[k:]) >= -1e-12)

    def test_decreasing_by_mirror(self, sym11):
        sol = solve_dirichlet_general(sym11, 1.0, -1.0, 2.0)
        assert sol.branch is Branch.DECREASING
        prof = reconstruct_profile(sym11, sol, DirichletBC(1.0, -1.0, 2.0), 101)
        ref = reconstruct_profile(sym11, solve_dirichlet_general(sym11, -1.0, 1.0, 2.0),
                                  DirichletBC(-1.0, 1.0, 2.0), 101)
        assert np.allclose(prof.phi, ref.phi[::-1], atol=1e-10)

    def test_equal_routing(self, sym11):
        sol = solve_dirichlet_general(sym11, -1.0, -1.0 + 1e-16, 2.0)
        assert sol.alpha == pytest.approx(solve_dirichlet_equal(sym11, -1.0, 2.0).alpha)

    def test_branch_switch_at_L0(self, sym11):
        L0 = critical_L0(sym11, -2.0, -1.0).L0
        assert solve_dirichlet_general(sym11, -2.0, -1.0, 0.99 * L0).monotone
        assert solve_dirichlet_general(sym11, -2.0, -1.0, 1.01 * L0).branch is Branch.INTERIOR_MAX

    def test_boundary_values(self, sym11):
        bc = DirichletBC(-2.0, -0.3, 5.0)
        sol = solve_dirichlet_general(sym11, bc.phi0, bc.phi1, bc.L)
        prof = reconstruct_profile(sym11, sol, bc, 101)
        assert prof.phi[0] == pytest.approx(-2.0, abs=1e-8)
        assert prof.phi[-1] == pytest.approx(-0.3, abs=1e-8)
        assert drift_ok(prof, sym11, sol.h)


class TestProfile:
    def test_sample_count(self, sym11):
        sol = solve_dirichlet_equal(sym11, 1.0, 1.0)
        with pytest.raises(UsageError):
            reconstruct_profile(sym11, sol, DirichletBC(1.0, 1.0, 1.0), 2)

    def test_samples_and_concentrations(self, sym11):
        bc = DirichletBC(0.5, 1.5, 2.0)
        sol = solve_dirichlet_general(sym11, *bc.__dict__.values())
        prof = reconstruct_profile(sym11, sol, bc, 21)
        assert len(prof) == 21 and np.all(np.diff(prof.x) > 0)
        assert prof.x[0] == -1.0 and prof.x[-1] == 1.0
        for x, p, u, cs in prof.samples:
            assert cs == pytest.approx([0.5 * math.exp(-p), 0.5 * math.exp(p)], rel=1e-14)


SYSTEMS = [
    Electrolyte.from_lists([1, -1], [0.5, 0.5]),
    Electrolyte.from_lists([2, -1, 1], [0.2, 0.7, 0.3], 0.1),
    Electrolyte.from_lists([1], [1]),
    Electrolyte.from_lists([-1, -2], [0.6, 0.3]),
    Electrolyte.from_lists([1, 2], [0.5, 0.5], 0.4),
    Electrolyte.from_lists([-1], [1], -0.3),
]


@given(st.sampled_from(range(len(SYSTEMS))), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5),
       st.floats(0.3, 6.0))
def test_energy_exactness(idx, phi0, phi1, L):
    s = SYSTEMS[idx]
    bc = DirichletBC(phi0, phi1, L)
    sol = solve_dirichlet_general(s, phi0, phi1, L)
    prof = reconstruct_profile(s, sol, bc, 101)
    assert drift_ok(prof, s, sol.h)
    assert prof.phi[0] == pytest.approx(phi0, abs=1e-8)
    assert prof.phi[-1] == pytest.approx(phi1, abs=1e-8)
    if sol.branch is Branch.INCREASING:
        assert np.all(np.diff(prof.phi) >= 0)


@given(st.sampled_from(range(len(SYSTEMS))), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5),
       st.floats(0.3, 6.0))
def test_reflection_equivariance(idx, phi0, phi1, L):
    s = SYSTEMS[idx]
    a = solve_dirichlet_general(s, phi0, phi1, L)
    b = solve_dirichlet_general(reflect(s), -phi0, -phi1, L)
    pa = reconstruct_profile(s, a, DirichletBC(phi0, phi1, L), 101)
    pb = reconstruct_profile(reflect(s), b, DirichletBC(-phi0, -phi1, L), 101)
    assert np.max(np.abs(pa.phi + pb.phi)) <= 1e-10


@given(st.sampled_from(range(len(SYSTEMS))), st.floats(0.1, 3.0), st.floats(0.3, 6.0))
def test_neumann_reflection(idx, sigma, L):
    s = SYSTEMS[idx]
    if not neumann_existence(s, sigma, L).solvable:
        return
    a = solve_neumann(s, sigma, L)
    b = solve_neumann(reflect(s), -sigma, L)
    pa = reconstruct_profile(s, a, NeumannBC(sigma, L), 101)
    pb = reconstruct_profile(reflect(s), b, NeumannBC(-sigma, L), 101)
    assert np.max(np.abs(pa.phi + pb.phi)) <= 1e-10
    assert drift_ok(pa, s, a.h)
