"""Moments, the 4x4 mode matrix, the driven steady state, and the field
profiles; includes the ODE-integration oracle and an energy-gradient
consistency check tying the cavity couplings to the atomic potentials."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from rcsoc.cavity import (AtomicMoments, atomic_moments,
                          build_cavity_matrix, cavity_steady_state,
                          field_profiles, pump_vector)
from rcsoc.meanfield import rayleigh_quotient
from rcsoc.model import (CavityState, PlaneWaveBasis, SpinorField,
                         make_symmetric_params)


def random_moments(seed):
    rng = np.random.default_rng(seed)
    n_dn = rng.uniform(0.2, 0.8)
    z = lambda s: s * (rng.standard_normal() + 1j * rng.standard_normal())
    return AtomicMoments(n_dn=n_dn, n_up=1.0 - n_dn,
                         nw_dn=z(0.2), nw_up=z(0.2), s_minus=z(0.2),
                         sw_minus_m=z(0.2), sw_minus_p=z(0.2))


def random_field(basis, seed):
    rng = np.random.default_rng(seed)
    nb = 2 * basis.cutoff + 1
    c = (rng.standard_normal((2, nb)) + 1j * rng.standard_normal((2, nb)))
    c *= np.exp(-basis.modes ** 2 / 10.0)
    return SpinorField.from_coefficients(basis, c).normalized()


class TestAtomicMoments:
    def test_uniform_superposition(self, uniform_field):
        m = atomic_moments(uniform_field)
        assert abs(m.n_dn - 0.5) < 1e-12 and abs(m.n_up - 0.5) < 1e-12
        assert abs(m.nw_dn) < 1e-12 and abs(m.nw_up) < 1e-12
        assert abs(m.s_minus - 0.5) < 1e-12
        assert abs(m.sw_minus_m) < 1e-12 and abs(m.sw_minus_p) < 1e-12

    def test_counterpropagating_spiral(self, pw_archetype):
        m = atomic_moments(pw_archetype)
        assert abs(m.s_minus) < 1e-12
        assert abs(m.sw_minus_m - 0.5) < 1e-12
        assert abs(m.sw_minus_p) < 1e-12
        assert abs(m.nw_dn) < 1e-12 and abs(m.nw_up) < 1e-12

    def test_density_wave_cross_term(self, basis):
        a, b = 0.9, 0.35
        u = 1.0 / np.sqrt((a ** 2 + b ** 2) * basis.domain_length)
        dn = (a + b * np.exp(2j * basis.z)) * u
        field = SpinorField(basis, dn, np.zeros_like(dn))
        m = atomic_moments(field)
        assert abs(m.n_dn - 1.0) < 1e-12
        # single cross term survives the projection: a b lambda u^2
        expect = a * b * basis.domain_length * u ** 2
        assert abs(m.nw_dn - expect) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_cauchy_schwarz_bounds(self, basis, seed):
        m = atomic_moments(random_field(basis, seed))
        assert abs(m.n_dn + m.n_up - 1.0) < 1e-10
        assert abs(m.nw_dn) <= m.n_dn + 1e-12
        assert abs(m.nw_up) <= m.n_up + 1e-12
        cs = np.sqrt(m.n_dn * m.n_up)
        for v in (m.s_minus, m.sw_minus_m, m.sw_minus_p):
            assert abs(v) <= cs + 1e-12
            assert abs(v) <= 0.5 + 1e-12


class TestCavityMatrix:
    def test_diagonal_case(self):
        p = make_symmetric_params(-20.0, 20.0)
        m = AtomicMoments(n_dn=0.5, n_up=0.5, nw_dn=0j, nw_up=0j,
                          s_minus=0j, sw_minus_m=0j, sw_minus_p=0j)
        M = build_cavity_matrix(m, p)
        off = M - np.diag(np.diag(M))
        assert np.max(np.abs(off)) == 0.0
        assert np.allclose(np.diag(M), 19.5 - 1j)

    def test_spiral_couples_pumped_pair_only(self):
        # homogeneous spin-spiral moments: the a_+ row couples only to
        # b_-, and the unpumped rows decouple completely
        p = make_symmetric_params(-20.0, 30.0)
        m = AtomicMoments(n_dn=0.5, n_up=0.5, nw_dn=0j, nw_up=0j,
                          s_minus=0j, sw_minus_m=0.5 + 0j,
                          sw_minus_p=0j)
        M = build_cavity_matrix(m, p)
        assert M[0, 3] == p.omega_r * 0.5
        assert M[3, 0] == np.conj(p.omega_r) * 0.5
        assert np.max(np.abs(M[1, [0, 2, 3]])) == 0.0
        assert np.max(np.abs(M[2, [0, 1, 3]])) == 0.0

    @pytest.mark.parametrize("seed", range(4))
    def test_entry_pattern(self, seed):
        p = make_symmetric_params(-17.0, 12.0)
        m = random_moments(seed)
        M = build_cavity_matrix(m, p)
        u0, om = p.u0_dn, complex(p.omega_r)
        dta = p.delta_a + 1j * p.kappa - u0 * m.n_dn
        dtb = p.delta_b + 1j * p.kappa - p.u0_up * m.n_up
        expected = np.array([
            [-dta, u0 * m.nw_dn, om * m.s_minus, om * m.sw_minus_m],
            [u0 * np.conj(m.nw_dn), -dta, om * m.sw_minus_p,
             om * m.s_minus],
            [np.conj(om * m.s_minus), np.conj(om * m.sw_minus_p), -dtb,
             p.u0_up * m.nw_up],
            [np.conj(om * m.sw_minus_m), np.conj(om * m.s_minus),
             p.u0_up * np.conj(m.nw_up), -dtb]])
        assert np.max(np.abs(M - expected)) == 0.0

    @pytest.mark.parametrize("seed", range(4))
    def test_shifted_hermiticity(self, seed):
        # M + i kappa I is Hermitian, so the driven system relaxes at
        # exactly the bare cavity rate
        p = make_symmetric_params(-17.0, 12.0)
        M = build_cavity_matrix(random_moments(seed), p)
        H = M + 1j * p.kappa * np.eye(4)
        assert np.max(np.abs(H - H.conj().T)) < 1e-14


class TestCavitySteadyState:
    def test_no_pump_no_field(self):
        p = make_symmetric_params(-20.0, 0.0)
        c = cavity_steady_state(random_moments(0), p)
        assert np.max(np.abs(c.as_vector())) == 0.0

    def test_uniform_superposition_block_solve(self, uniform_field):
        # collective spin couples (a+, b+) and (a-, b-) pairwise; solve
        # the two 2x2 blocks by elimination and compare
        p = make_symmetric_params(-20.0, 25.0)
        m = atomic_moments(uniform_field)
        c = cavity_steady_state(m, p)
        om = complex(p.omega_r)
        dt = p.delta_a + 1j * p.kappa - p.u0_dn * 0.5
        coupling = om * m.s_minus
        # block rows: -dt a_+ + coupling b_+ = -i eta ; conj(coupling) a_+ - dt b_+ = 0
        beta_p = np.conj(coupling) * c.alpha_p / dt
        assert abs(beta_p - c.beta_p) < 1e-12 * abs(c.beta_p)
        alpha_p = -1j * p.eta_p / (-dt + coupling * np.conj(coupling) / dt)
        assert abs(alpha_p - c.alpha_p) < 1e-10

    def test_decoupling_exact_zero(self):
        p = make_symmetric_params(-20.0, 30.0)
        m = AtomicMoments(n_dn=0.5, n_up=0.5, nw_dn=0j, nw_up=0j,
                          s_minus=0j, sw_minus_m=0j, sw_minus_p=0j)
        c = cavity_steady_state(m, p)
        assert c.alpha_m == 0.0 and c.beta_p == 0.0

    @pytest.mark.parametrize("seed", range(3))
    def test_ode_oracle(self, seed):
        p = make_symmetric_params(-14.0, 17.0)
        m = random_moments(seed)
        target = cavity_steady_state(m, p).as_vector()
        M = build_cavity_matrix(m, p)
        eta = pump_vector(p)

        def rhs(t, y):
            a = y[:4] + 1j * y[4:]
            dadt = -1j * (M @ a) + eta
            return np.concatenate([dadt.real, dadt.imag])

        t_end = 20.0 / p.kappa
        sol = solve_ivp(rhs, (0, t_end), np.zeros(8), rtol=1e-11,
                        atol=1e-12, dense_output=False)
        end = sol.y[:4, -1] + 1j * sol.y[4:, -1]
        assert np.max(np.abs(end - target)) < 1e-8

    @pytest.mark.parametrize("seed", range(4))
    def test_residual_bound(self, seed):
        p = make_symmetric_params(-9.0, 33.0)
        m = random_moments(seed)
        c = cavity_steady_state(m, p)
        M = build_cavity_matrix(m, p)
        res = np.max(np.abs(M @ c.as_vector() + 1j * pump_vector(p)))
        assert res <= 1e-12 * (np.max(np.abs(pump_vector(p))) + 1.0)


class TestFieldProfiles:
    def test_running_wave_pair(self, basis):
        # only the pumped running-wave pair: flat potentials and a pure
        # two-recoil Raman grating
        p = make_symmetric_params(-20.0, 30.0)
        c = CavityState(1.0 + 0j, 0j, 0j, 1.0 + 0j)
        prof = field_profiles(c, p, basis)
        assert np.allclose(prof.u_dn, p.u0_dn)
        assert np.allclose(prof.u_up, p.u0_up)
        assert np.max(np.abs(prof.raman
                             - p.omega_r * np.exp(2j * basis.z))) < 1e-14

    def test_all_dark(self, basis):
        p = make_symmetric_params(-20.0, 0.0)
        prof = field_profiles(CavityState.vacuum(), p, basis)
        assert np.max(np.abs(prof.u_dn)) == 0.0
        assert np.max(np.abs(prof.u_up)) == 0.0
        assert np.max(np.abs(prof.raman)) == 0.0

    def test_standing_wave(self, basis):
        p = make_symmetric_params(-20.0, 30.0)
        c = CavityState(1.0 + 0j, 1.0 + 0j, 0j, 0j)
        prof = field_profiles(c, p, basis)
        expect = p.u0_dn * (2.0 + 2.0 * np.cos(2.0 * basis.z))
        assert np.max(np.abs(prof.u_dn - expect)) < 1e-13
        assert np.max(np.abs(prof.raman)) == 0.0

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=15, deadline=None)
    def test_reality_and_periodicity(self, seed):
        basis = PlaneWaveBasis()
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(8)
        c = CavityState(*(vec[:4] + 1j * vec[4:]))
        p = make_symmetric_params(-12.0, 5.0)
        prof = field_profiles(c, p, basis)
        assert np.isrealobj(prof.u_dn) and np.isrealobj(prof.u_up)
        # lambda/2 periodic: shifting by half the grid reproduces values
        half = basis.n_grid // 2
        for arr in (prof.u_dn, prof.u_up, prof.raman):
            assert np.max(np.abs(arr - np.roll(arr, half))) < 1e-12


class TestEnergyGradientConsistency:
    @pytest.mark.parametrize("seed", range(3))
    def test_matrix_rows_match_coupling_energy_gradient(self, basis, seed):
        """The mode matrix's moment couplings and the optical potentials
        are two faces of one interaction: d<H_at>/d a_k^* must equal the
        non-diagonal part of row k of M a."""
        p = make_symmetric_params(-15.0, 21.0)
        field = random_field(basis, seed)
        rng = np.random.default_rng(100 + seed)
        avec = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        m = atomic_moments(field)
        M = build_cavity_matrix(m, p)
        bare = -(np.diag([p.delta_a, p.delta_a, p.delta_b, p.delta_b])
                 + 1j * p.kappa * np.eye(4))
        coupling_rows = (M - bare) @ avec

        def energy(a):
            prof = field_profiles(CavityState.from_vector(a), p, basis)
            return np.real(rayleigh_quotient(field, prof, p))

        h = 1e-6
        for k in range(4):
            e_k = np.zeros(4, complex)
            e_k[k] = 1.0
            d_re = (energy(avec + h * e_k) - energy(avec - h * e_k)) / (2 * h)
            d_im = (energy(avec + 1j * h * e_k)
                    - energy(avec - 1j * h * e_k)) / (2 * h)
            grad = 0.5 * (d_re + 1j * d_im)  # d/d a_k^*
            assert abs(grad - coupling_rows[k]) < 1e-6 * (
                1.0 + abs(coupling_rows[k]))
