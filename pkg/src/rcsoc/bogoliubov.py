"""Collective excitations: linearisation of the coupled mean-field
equations around a stationary state.

Fluctuations are expanded as

    d_psi(z,t) = d_psi^+(z) e^{-i w t} + [d_psi^-(z)]^* e^{+i w^* t}

(and likewise for the four mode amplitudes), which closes into the
non-Hermitian eigenproblem  w f = M_B f  for the stacked vector

    f = (d_psi_dn^+, d_psi_dn^-, d_psi_up^+, d_psi_up^-,
         d_alpha_+^{+,-}, d_alpha_-^{+,-}, d_beta_+^{+,-}, d_beta_-^{+,-})

of dimension 4 (2J+1) + 8.  The atomic rows carry (H_at - mu) blocks
and the atom-field couplings are overlaps against the condensate
dressed by the stationary amplitudes,

    A_+^t = psi0_t (a_+ + e^{+2ikz} a_-),  A_-^t = psi0_t (a_- + e^{-2ikz} a_+),

with B_+- built the same way from (b_+, b_-); starred variants carry
psi0^* instead of psi0.  Every entry follows from differentiating the
nonlinear equations of motion; the finite-difference linearisation
oracle in the test suite checks the assembled matrix directly against
those equations.

The spectrum inherits the particle-hole structure: (w, f) pairs with
(-w^*, partner).  Photon-dominated modes inherit Im(w) ~ -kappa; only
positive imaginary parts signal dynamical instability.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass

import numpy as np

from .cavity import atomic_moments, field_profiles
from .errors import NotConvergedError, RcsocError
from .meanfield import dense_hamiltonian
from .model import ModelParams, PlaneWaveBasis, SteadyState

_CONVERGENCE_GATE = 1e-6


@dataclass(frozen=True)
class FluctuationLayout:
    """Slice bookkeeping for the stacked fluctuation vector: four atomic
    blocks of nb = 2J+1 coefficients (dn+, dn-, up+, up-) followed by
    the eight cavity fluctuation amplitudes."""

    nb: int

    @property
    def dim(self) -> int:
        return 4 * self.nb + 8

    def atomic_slice(self, block: int) -> slice:
        return slice(block * self.nb, (block + 1) * self.nb)

    def cavity_index(self, mode: int, pm: int) -> int:
        # mode 0..3 = a+, a-, b+, b-;  pm 0 = (+), 1 = (-)
        return 4 * self.nb + 2 * mode + pm

    def split(self, f: np.ndarray) -> dict:
        nb = self.nb
        return {"dpsi_dn_p": f[:nb], "dpsi_dn_m": f[nb:2 * nb],
                "dpsi_up_p": f[2 * nb:3 * nb], "dpsi_up_m": f[3 * nb:4 * nb],
                "dcav": f[4 * nb:]}

    def atomic_weight(self, f: np.ndarray) -> float:
        n2 = float(np.sum(np.abs(f) ** 2))
        return (float(np.sum(np.abs(f[:4 * self.nb]) ** 2)) / n2
                if n2 > 0 else 0.0)


# ----------------------------------------------------------------------
# Matrix assembly
# ----------------------------------------------------------------------

def _mult_matrix(basis: PlaneWaveBasis, fn: np.ndarray) -> np.ndarray:
    """Galerkin matrix of multiplication by fn(z)."""
    coef = np.fft.fft(fn) / basis.n_grid
    idx = np.subtract.outer(basis.modes, basis.modes) % basis.n_grid
    return coef[idx]


def _col(basis: PlaneWaveBasis, fn: np.ndarray) -> np.ndarray:
    """Coefficients of fn(z): column coupling of one scalar slot into
    the atomic rows."""
    return basis.grid_to_coefficients(fn)


def _row(basis: PlaneWaveBasis, fn: np.ndarray) -> np.ndarray:
    """Entries of the functional int fn(z) d_psi(z) dz over the basis:
    cavity-row coupling to an atomic block."""
    coef = np.fft.fft(fn) / basis.n_grid
    return (np.sqrt(basis.domain_length)
            * coef[(-basis.modes) % basis.n_grid])


def build_bogoliubov_matrix(ss: SteadyState, p: ModelParams) -> np.ndarray:
    """Assemble M_B around a converged steady state."""
    if ss.diverged or not ss.converged or ss.residual > _CONVERGENCE_GATE:
        raise NotConvergedError(
            f"steady state not converged (residual {ss.residual:.2e}); "
            "the linearised spectrum would be meaningless")
    basis = ss.spinor.basis
    nb = 2 * basis.cutoff + 1
    lay = FluctuationLayout(nb)
    e2 = np.exp(2j * basis.z)
    psi0 = ss.spinor.psi
    ap, am = ss.cavity.alpha_p, ss.cavity.alpha_m
    bp, bm = ss.cavity.beta_p, ss.cavity.beta_m
    om = complex(p.omega_r)
    u0d, u0u = p.u0_dn, p.u0_up
    mu = ss.mu

    m = atomic_moments(ss.spinor)
    prof = field_profiles(ss.cavity, p, basis)
    H = dense_hamiltonian(prof, p)
    T_dn, T_up = H[:nb, :nb], H[nb:, nb:]
    R = H[:nb, nb:]                 # multiplication by raman(z)
    Rc = R.conj().T                 # multiplication by raman(z)^*

    a_plus = ap + e2 * am
    a_minus = am + np.conj(e2) * ap
    b_plus = bp + e2 * bm
    b_minus = bm + np.conj(e2) * bp
    A_p_dn, A_m_dn = psi0[0] * a_plus, psi0[0] * a_minus
    A_p_up, A_m_up = psi0[1] * a_plus, psi0[1] * a_minus
    B_p_dn, B_m_dn = psi0[0] * b_plus, psi0[0] * b_minus
    B_p_up, B_m_up = psi0[1] * b_plus, psi0[1] * b_minus
    As_p_dn, As_m_dn = np.conj(psi0[0]) * a_plus, np.conj(psi0[0]) * a_minus
    As_p_up, As_m_up = np.conj(psi0[1]) * a_plus, np.conj(psi0[1]) * a_minus
    Bs_p_dn, Bs_m_dn = np.conj(psi0[0]) * b_plus, np.conj(psi0[0]) * b_minus
    Bs_p_up, Bs_m_up = np.conj(psi0[1]) * b_plus, np.conj(psi0[1]) * b_minus

    dta = p.delta_a + 1j * p.kappa - u0d * m.n_dn
    dtb = p.delta_b + 1j * p.kappa - u0u * m.n_up

    M = np.zeros((lay.dim, lay.dim), dtype=complex)
    eye = np.eye(nb)
    DN_P, DN_M, UP_P, UP_M = (lay.atomic_slice(i) for i in range(4))
    AP_P, AP_M = lay.cavity_index(0, 0), lay.cavity_index(0, 1)
    AM_P, AM_M = lay.cavity_index(1, 0), lay.cavity_index(1, 1)
    BP_P, BP_M = lay.cavity_index(2, 0), lay.cavity_index(2, 1)
    BM_P, BM_M = lay.cavity_index(3, 0), lay.cavity_index(3, 1)

    cc = np.conj

    # ---- atomic operator blocks ---------------------------------------
    M[DN_P, DN_P] = T_dn - mu * eye
    M[DN_P, UP_P] = R
    M[DN_M, DN_M] = -(T_dn - mu * eye)
    M[DN_M, UP_M] = -Rc
    M[UP_P, UP_P] = T_up - mu * eye
    M[UP_P, DN_P] = Rc
    M[UP_M, UP_M] = -(T_up - mu * eye)
    M[UP_M, DN_M] = -R

    # ---- atomic rows: columns of the eight amplitude slots ------------
    def col_add(rows, col, fn, scale):
        M[rows, col] += scale * _col(basis, fn)

    col_add(DN_P, AP_P, cc(As_p_dn), u0d)
    col_add(DN_P, AM_P, cc(As_m_dn), u0d)
    col_add(DN_P, AP_M, A_p_dn, u0d)
    col_add(DN_P, AM_M, A_m_dn, u0d)
    col_add(DN_P, BP_P, cc(As_p_up), om)
    col_add(DN_P, BM_P, cc(As_m_up), om)
    col_add(DN_P, AP_M, B_p_up, om)
    col_add(DN_P, AM_M, B_m_up, om)

    col_add(DN_M, AP_M, As_p_dn, -u0d)
    col_add(DN_M, AM_M, As_m_dn, -u0d)
    col_add(DN_M, AP_P, cc(A_p_dn), -u0d)
    col_add(DN_M, AM_P, cc(A_m_dn), -u0d)
    col_add(DN_M, BP_M, As_p_up, -cc(om))
    col_add(DN_M, BM_M, As_m_up, -cc(om))
    col_add(DN_M, AP_P, cc(B_p_up), -cc(om))
    col_add(DN_M, AM_P, cc(B_m_up), -cc(om))

    col_add(UP_P, BP_P, cc(Bs_p_up), u0u)
    col_add(UP_P, BM_P, cc(Bs_m_up), u0u)
    col_add(UP_P, BP_M, B_p_up, u0u)
    col_add(UP_P, BM_M, B_m_up, u0u)
    col_add(UP_P, AP_P, cc(Bs_p_dn), cc(om))
    col_add(UP_P, AM_P, cc(Bs_m_dn), cc(om))
    col_add(UP_P, BP_M, A_p_dn, cc(om))
    col_add(UP_P, BM_M, A_m_dn, cc(om))

    col_add(UP_M, BP_M, Bs_p_up, -u0u)
    col_add(UP_M, BM_M, Bs_m_up, -u0u)
    col_add(UP_M, BP_P, cc(B_p_up), -u0u)
    col_add(UP_M, BM_P, cc(B_m_up), -u0u)
    col_add(UP_M, AP_M, Bs_p_dn, -om)
    col_add(UP_M, AM_M, Bs_m_dn, -om)
    col_add(UP_M, BP_P, cc(A_p_dn), -om)
    col_add(UP_M, BM_P, cc(A_m_dn), -om)

    # ---- cavity rows ---------------------------------------------------
    def row_add(row, cols, fn, scale):
        M[row, cols] += scale * _row(basis, fn)

    # d_alpha_+^(+)
    M[AP_P, AP_P] += -dta
    M[AP_P, AM_P] += u0d * m.nw_dn
    M[AP_P, BP_P] += om * m.s_minus
    M[AP_P, BM_P] += om * m.sw_minus_m
    row_add(AP_P, DN_P, As_p_dn, u0d)
    row_add(AP_P, DN_M, A_p_dn, u0d)
    row_add(AP_P, UP_P, Bs_p_dn, om)
    row_add(AP_P, DN_M, B_p_up, om)
    # d_alpha_+^(-): negated conjugate partner
    M[AP_M, AP_M] += cc(dta)
    M[AP_M, AM_M] += -u0d * cc(m.nw_dn)
    M[AP_M, BP_M] += -cc(om) * cc(m.s_minus)
    M[AP_M, BM_M] += -cc(om) * cc(m.sw_minus_m)
    row_add(AP_M, DN_M, cc(As_p_dn), -u0d)
    row_add(AP_M, DN_P, cc(A_p_dn), -u0d)
    row_add(AP_M, UP_M, cc(Bs_p_dn), -cc(om))
    row_add(AP_M, DN_P, cc(B_p_up), -cc(om))
    # d_alpha_-^(+)
    M[AM_P, AP_P] += u0d * cc(m.nw_dn)
    M[AM_P, AM_P] += -dta
    M[AM_P, BP_P] += om * m.sw_minus_p
    M[AM_P, BM_P] += om * m.s_minus
    row_add(AM_P, DN_P, As_m_dn, u0d)
    row_add(AM_P, DN_M, A_m_dn, u0d)
    row_add(AM_P, UP_P, Bs_m_dn, om)
    row_add(AM_P, DN_M, B_m_up, om)
    # d_alpha_-^(-)
    M[AM_M, AP_M] += -u0d * m.nw_dn
    M[AM_M, AM_M] += cc(dta)
    M[AM_M, BP_M] += -cc(om) * cc(m.sw_minus_p)
    M[AM_M, BM_M] += -cc(om) * cc(m.s_minus)
    row_add(AM_M, DN_M, cc(As_m_dn), -u0d)
    row_add(AM_M, DN_P, cc(A_m_dn), -u0d)
    row_add(AM_M, UP_M, cc(Bs_m_dn), -cc(om))
    row_add(AM_M, DN_P, cc(B_m_up), -cc(om))
    # d_beta_+^(+)
    M[BP_P, AP_P] += cc(om) * m.s_plus
    M[BP_P, AM_P] += cc(om) * m.sw_plus_m
    M[BP_P, BP_P] += -dtb
    M[BP_P, BM_P] += u0u * m.nw_up
    row_add(BP_P, UP_P, Bs_p_up, u0u)
    row_add(BP_P, UP_M, B_p_up, u0u)
    row_add(BP_P, DN_P, As_p_up, cc(om))
    row_add(BP_P, UP_M, A_p_dn, cc(om))
    # d_beta_+^(-)
    M[BP_M, AP_M] += -om * cc(m.s_plus)
    M[BP_M, AM_M] += -om * cc(m.sw_plus_m)
    M[BP_M, BP_M] += cc(dtb)
    M[BP_M, BM_M] += -u0u * cc(m.nw_up)
    row_add(BP_M, UP_M, cc(Bs_p_up), -u0u)
    row_add(BP_M, UP_P, cc(B_p_up), -u0u)
    row_add(BP_M, DN_M, cc(As_p_up), -om)
    row_add(BP_M, UP_P, cc(A_p_dn), -om)
    # d_beta_-^(+)
    M[BM_P, AP_P] += cc(om) * m.sw_plus_p
    M[BM_P, AM_P] += cc(om) * m.s_plus
    M[BM_P, BP_P] += u0u * cc(m.nw_up)
    M[BM_P, BM_P] += -dtb
    row_add(BM_P, UP_P, Bs_m_up, u0u)
    row_add(BM_P, UP_M, B_m_up, u0u)
    row_add(BM_P, DN_P, As_m_up, cc(om))
    row_add(BM_P, UP_M, A_m_dn, cc(om))
    # d_beta_-^(-)
    M[BM_M, AP_M] += -om * cc(m.sw_plus_p)
    M[BM_M, AM_M] += -om * cc(m.s_plus)
    M[BM_M, BP_M] += -u0u * m.nw_up
    M[BM_M, BM_M] += cc(dtb)
    row_add(BM_M, UP_M, cc(Bs_m_up), -u0u)
    row_add(BM_M, UP_P, cc(B_m_up), -u0u)
    row_add(BM_M, DN_M, cc(As_m_up), -om)
    row_add(BM_M, UP_P, cc(A_m_dn), -om)

    return M


# ----------------------------------------------------------------------
# Diagonalisation and bookkeeping
# ----------------------------------------------------------------------

@dataclass
class ExcitationSpectrum:
    """Eigenvalues/vectors of M_B, sorted by (rounded Re, Im)."""

    omega: np.ndarray
    vectors: np.ndarray
    layout: FluctuationLayout

    def half_spectrum(self, tol: float = 1e-9):
        keep = np.real(self.omega) >= -tol
        return self.omega[keep], self.vectors[:, keep], np.where(keep)[0]

    def pairing_defect(self) -> float:
        """Largest distance of any -omega^* from the spectrum (the
        particle-hole structure of the ansatz)."""
        w = self.omega
        return float(max(np.min(np.abs(w - (-np.conj(x)))) for x in w))


def excitation_spectrum(M_B: np.ndarray) -> ExcitationSpectrum:
    """Dense non-Hermitian eigendecomposition with a deterministic
    (round(Re, 6), Im) lexicographic sort."""
    try:
        w, V = np.linalg.eig(M_B)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        dump = tempfile.NamedTemporaryFile(suffix=".npy", delete=False)
        np.save(dump, M_B)
        raise RcsocError(f"eigensolver failed: {exc}; matrix dumped to "
                         f"{dump.name}") from exc
    order = np.lexsort((np.imag(w), np.round(np.real(w), 6)))
    nb = (M_B.shape[0] - 8) // 4
    return ExcitationSpectrum(omega=w[order], vectors=V[:, order],
                              layout=FluctuationLayout(nb))


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    max_imag: float
    mode_index: int


def stability_check(spec: ExcitationSpectrum,
                    tol_im: float = 0.1) -> StabilityResult:
    """Unstable iff some collective mode grows, Im(omega) > tol_im.
    The kappa-damped photon modes only contribute negative imaginary
    parts and never trigger."""
    i = int(np.argmax(np.imag(spec.omega)))
    mx = float(np.imag(spec.omega[i]))
    return StabilityResult(stable=mx <= tol_im, max_imag=mx, mode_index=i)


# ----------------------------------------------------------------------
# Mode identification
# ----------------------------------------------------------------------

def _pack_direction(ss: SteadyState, d_dn: np.ndarray, d_up: np.ndarray,
                    dcav: np.ndarray | None = None) -> np.ndarray:
    """Stack a physical perturbation into the fluctuation layout: the
    (+) slots hold the perturbation, the (-) slots its conjugate."""
    basis = ss.spinor.basis
    g = basis.grid_to_coefficients
    parts = [g(d_dn), g(np.conj(d_dn)), g(d_up), g(np.conj(d_up))]
    if dcav is None:
        dcav = np.zeros(4, dtype=complex)
    cav = np.empty(8, dtype=complex)
    cav[0::2] = dcav
    cav[1::2] = np.conj(dcav)
    vec = np.concatenate(parts + [cav])
    return vec / np.linalg.norm(vec)


def gauge_mode_vector(ss: SteadyState) -> np.ndarray:
    """Generator of the global U(1) phase: d_psi = i psi0, fields
    untouched (all moments are phase bilinears)."""
    return _pack_direction(ss, 1j * ss.spinor.psi[0], 1j * ss.spinor.psi[1])


def screw_mode_vector(ss: SteadyState) -> np.ndarray | None:
    """Derivative of the screw orbit through the state; None when the
    state is screw-invariant (plane-wave states) so no Goldstone mode
    is expected."""
    basis = ss.spinor.basis
    f = np.fft.fft(ss.spinor.psi, axis=-1)
    dpsi_dz = np.fft.ifft(1j * basis.grid_modes * f, axis=-1)
    d_dn = 1j * ss.spinor.psi[0] - dpsi_dz[0]
    d_up = -1j * ss.spinor.psi[1] - dpsi_dz[1]
    dcav = np.array([0.0, -2j * ss.cavity.alpha_m,
                     2j * ss.cavity.beta_p, 0.0], dtype=complex)
    size = (float(np.sum(np.abs(d_dn) ** 2 + np.abs(d_up) ** 2)) * basis.dz
            + float(np.sum(np.abs(dcav) ** 2)))
    if size < 1e-16:
        return None
    return _pack_direction(ss, d_dn, d_up, dcav)


def mode_overlap(spec: ExcitationSpectrum, index: int,
                 direction: np.ndarray) -> float:
    v = spec.vectors[:, index]
    return float(abs(np.vdot(direction, v)) / np.linalg.norm(v))


def gauge_mode_indices(spec: ExcitationSpectrum, ss: SteadyState,
                       threshold: float = 0.99) -> list[int]:
    g = gauge_mode_vector(ss)
    return [i for i in range(len(spec.omega))
            if abs(spec.omega[i]) < 0.5
            and mode_overlap(spec, i, g) > threshold]


def goldstone_index(spec: ExcitationSpectrum, ss: SteadyState,
                    min_overlap: float = 0.5) -> int | None:
    """Non-gauge mode with the largest overlap against the screw
    generator; None if the generator vanishes or nothing matches."""
    direction = screw_mode_vector(ss)
    if direction is None:
        return None
    skip = set(gauge_mode_indices(spec, ss))
    cands = [(mode_overlap(spec, i, direction), i)
             for i in range(len(spec.omega)) if i not in skip]
    ov, idx = max(cands)
    return idx if ov >= min_overlap else None


def mode_sector(spec: ExcitationSpectrum, index: int,
                ss: SteadyState) -> str:
    """'even'/'odd' by the dominant momentum parity of the atomic
    content; photon-dominated modes inherit the condensate parity."""
    basis = ss.spinor.basis
    v = spec.vectors[:, index]
    parity = basis.modes % 2 == 0
    even = odd = 0.0
    for b in range(4):
        blk = v[spec.layout.atomic_slice(b)]
        even += float(np.sum(np.abs(blk[parity]) ** 2))
        odd += float(np.sum(np.abs(blk[~parity]) ** 2))
    if even + odd < 0.05 * float(np.sum(np.abs(v) ** 2)):
        c = ss.spinor.coefficients()
        ce = float(np.sum(np.abs(c[:, parity]) ** 2))
        return "even" if ce >= 0.5 else "odd"
    return "even" if even >= odd else "odd"


def lowest_branches(spec: ExcitationSpectrum, ss: SteadyState, n: int = 5,
                    exclude_gauge: bool = True, tol: float = 1e-9):
    """The n lowest Re(omega) >= 0 modes for plotting, with the global
    gauge zero mode set aside; returns (re, im, index) triples."""
    _, _, idx = spec.half_spectrum(tol)
    skip = set(gauge_mode_indices(spec, ss)) if exclude_gauge else set()
    out = [(float(np.real(spec.omega[i])), float(np.imag(spec.omega[i])), i)
           for i in idx if i not in skip]
    return out[:n]


__all__ = ["FluctuationLayout", "build_bogoliubov_matrix",
           "ExcitationSpectrum", "excitation_spectrum", "StabilityResult",
           "stability_check", "gauge_mode_vector", "screw_mode_vector",
           "mode_overlap", "gauge_mode_indices", "goldstone_index",
           "mode_sector", "lowest_branches"]
