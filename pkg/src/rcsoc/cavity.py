"""Cavity sector: collective atomic moments, the effective 4x4 mode
matrix, its driven steady state, and the optical potentials / Raman
coupling the photons exert back on the atoms.

Mode ordering everywhere: (a_+, a_-, b_+, b_-).  The mean-field
equations of motion are

    i d/dt a_vec = M a_vec + i (eta_p, 0, 0, eta_m)^T,

with M built from the moments below; its diagonal carries the effective
detunings -(Delta_{a,b} + i kappa - U0 N_{dn,up}).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CavitySolveError
from .model import CavityState, ModelParams, PlaneWaveBasis, SpinorField


@dataclass(frozen=True)
class AtomicMoments:
    """Collective moments of the spinor that drive the cavity modes.

    n_dn, n_up         : atom numbers per component (sum to 1)
    nw_dn, nw_up       : density-wave moments, int e^{2ikz} |psi_tau|^2 dz
    s_minus            : collective spin, int psi_dn^* psi_up dz
    sw_minus_m         : spin-wave moment, int e^{+2ikz} psi_dn^* psi_up dz
    sw_minus_p         : spin-wave moment, int e^{-2ikz} psi_dn^* psi_up dz

    The raising-side moments follow by conjugation: S_+ = S_-^*, and the
    (+/-) spin-wave partners swap under conjugation.
    """

    n_dn: float
    n_up: float
    nw_dn: complex
    nw_up: complex
    s_minus: complex
    sw_minus_m: complex
    sw_minus_p: complex

    @property
    def s_plus(self) -> complex:
        return np.conj(self.s_minus)

    @property
    def sw_plus_p(self) -> complex:
        return np.conj(self.sw_minus_m)

    @property
    def sw_plus_m(self) -> complex:
        return np.conj(self.sw_minus_p)


@dataclass(frozen=True)
class FieldProfiles:
    """Real optical potentials and complex Raman coupling on the grid."""

    basis: PlaneWaveBasis
    u_dn: np.ndarray
    u_up: np.ndarray
    raman: np.ndarray


def atomic_moments(field: SpinorField) -> AtomicMoments:
    """Grid quadrature of the e^{+-2ikz}-weighted bilinears; exact for
    band-limited fields since n_grid >= 4 cutoff + 2."""
    basis = field.basis
    dn, up = field.psi
    e2 = np.exp(2j * basis.z)
    n_dn = float(np.real(basis.integrate(np.abs(dn) ** 2)))
    n_up = float(np.real(basis.integrate(np.abs(up) ** 2)))
    cross = np.conj(dn) * up
    return AtomicMoments(
        n_dn=n_dn,
        n_up=n_up,
        nw_dn=complex(basis.integrate(e2 * np.abs(dn) ** 2)),
        nw_up=complex(basis.integrate(e2 * np.abs(up) ** 2)),
        s_minus=complex(basis.integrate(cross)),
        sw_minus_m=complex(basis.integrate(e2 * cross)),
        sw_minus_p=complex(basis.integrate(np.conj(e2) * cross)),
    )


def build_cavity_matrix(m: AtomicMoments, p: ModelParams) -> np.ndarray:
    """Effective mode matrix M (frequency units, hbar folded out).

    M + i kappa I is Hermitian for real detunings and light shifts, so
    every eigenvalue of -iM has real part exactly -kappa: the driven
    system relaxes at the bare cavity rate.
    """
    om = complex(p.omega_r)
    dta = p.delta_a + 1j * p.kappa - p.u0_dn * m.n_dn
    dtb = p.delta_b + 1j * p.kappa - p.u0_up * m.n_up
    return np.array([
        [-dta, p.u0_dn * m.nw_dn, om * m.s_minus, om * m.sw_minus_m],
        [p.u0_dn * np.conj(m.nw_dn), -dta, om * m.sw_minus_p,
         om * m.s_minus],
        [np.conj(om) * m.s_plus, np.conj(om) * m.sw_plus_m, -dtb,
         p.u0_up * m.nw_up],
        [np.conj(om) * m.sw_plus_p, np.conj(om) * m.s_plus,
         p.u0_up * np.conj(m.nw_up), -dtb],
    ])


def pump_vector(p: ModelParams) -> np.ndarray:
    return np.array([p.eta_p, 0.0, 0.0, p.eta_m], dtype=complex)


def cavity_steady_state(m: AtomicMoments, p: ModelParams) -> CavityState:
    """Stationary amplitudes solving M a = -i (eta_p, 0, 0, eta_m)^T."""
    M = build_cavity_matrix(m, p)
    rhs = -1j * pump_vector(p)
    try:
        a = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - kappa > 0
        raise CavitySolveError(f"singular cavity matrix: {exc}") from exc
    resid = float(np.max(np.abs(M @ a - rhs)))
    scale = float(np.max(np.abs(rhs))) + 1.0
    if not np.all(np.isfinite(a)) or resid > 1e-12 * scale * 100:
        raise CavitySolveError(
            f"cavity solve residual {resid:.3e} exceeds tolerance")
    return CavityState.from_vector(a)


def field_profiles(c: CavityState, p: ModelParams,
                   basis: PlaneWaveBasis) -> FieldProfiles:
    """Potentials and Raman coupling generated by the amplitudes:

        u_dn(z)  = U0_dn (|a_+|^2 + |a_-|^2 + 2 Re[e^{2ikz} a_+^* a_-])
        u_up(z)  = U0_up (|b_+|^2 + |b_-|^2 + 2 Re[e^{2ikz} b_+^* b_-])
        raman(z) = Om_0R (a_+^* b_+ + a_-^* b_- + e^{2ikz} a_+^* b_-
                          + e^{-2ikz} a_-^* b_+)

    The e^{+-2ikz} cross terms transfer -+2 hbar k to an atom; the
    position-independent ones transfer none.
    """
    e2 = np.exp(2j * basis.z)
    ap, am, bp, bm = c.alpha_p, c.alpha_m, c.beta_p, c.beta_m
    u_dn = p.u0_dn * (abs(ap) ** 2 + abs(am) ** 2
                      + 2.0 * np.real(e2 * np.conj(ap) * am))
    u_up = p.u0_up * (abs(bp) ** 2 + abs(bm) ** 2
                      + 2.0 * np.real(e2 * np.conj(bp) * bm))
    raman = complex(p.omega_r) * (np.conj(ap) * bp + np.conj(am) * bm
                                  + e2 * np.conj(ap) * bm
                                  + np.conj(e2) * np.conj(am) * bp)
    return FieldProfiles(basis=basis,
                         u_dn=np.real(u_dn + 0j),
                         u_up=np.real(u_up + 0j),
                         raman=np.asarray(raman, dtype=complex))


__all__ = ["AtomicMoments", "FieldProfiles", "atomic_moments",
           "build_cavity_matrix", "pump_vector", "cavity_steady_state",
           "field_profiles"]
