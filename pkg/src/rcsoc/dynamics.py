"""Real-time propagation.

Two integrators, both Strang-split with exact sub-flows:

* the effective two-component + four-mode equations, used to confirm
  that accepted stationary states really are dynamically stationary;
* the microscopic three-level model (two ground states plus the
  far-detuned excited state with single-photon couplings), used to
  validate the adiabatic elimination behind the effective model.

The atomic sub-steps are unitary (kinetic phase in momentum space,
pointwise potential/Raman phase in real space), so the ground-manifold
norm is conserved to rounding; the cavity sub-step solves the linear
driven-damped mode equations exactly for frozen atomic moments.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .cavity import atomic_moments, build_cavity_matrix, field_profiles, \
    pump_vector
from .errors import StepTooLargeError
from .model import (CavityState, ModelParams, PlaneWaveBasis, SpinorField,
                    SteadyState)

_DRIFT_PER_TIME = 1e-8  # norm drift bound per unit time


# ----------------------------------------------------------------------
# Trajectory container
# ----------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    observables: dict  # name -> array over snapshots
    snapshots: list = dc_field(default_factory=list)  # optional full states

    def series(self, name: str) -> np.ndarray:
        return self.observables[name]

    def export_jsonl(self, path):
        import json
        names = sorted(self.observables)
        with open(path, "w") as fh:
            for i, t in enumerate(self.times):
                row = {"t": float(t)}
                for n in names:
                    v = self.observables[n][i]
                    row[n] = ([float(np.real(v)), float(np.imag(v))]
                              if np.iscomplexobj(v) else float(v))
                fh.write(json.dumps(row) + "\n")


def _observable_row(field: SpinorField, a: np.ndarray) -> dict:
    m = atomic_moments(field)
    return {"n_dn": m.n_dn, "n_up": m.n_up, "nw_dn": m.nw_dn,
            "s_minus": m.s_minus, "sw_minus_m": m.sw_minus_m,
            "alpha_p": a[0], "alpha_m": a[1], "beta_p": a[2],
            "beta_m": a[3], "norm": field.norm()}


# ----------------------------------------------------------------------
# Effective model
# ----------------------------------------------------------------------

def _cavity_halfstep(a: np.ndarray, field: SpinorField, p: ModelParams,
                     dt: float) -> np.ndarray:
    """Exact flow of i da/dt = M a + i eta for frozen atomic moments:
    relax toward the instantaneous steady state with exp(-i M dt)."""
    M = build_cavity_matrix(atomic_moments(field), p)
    a_ss = np.linalg.solve(M, -1j * pump_vector(p))
    w, V = np.linalg.eig(M)
    prop = (V * np.exp(-1j * dt * w)) @ np.linalg.inv(V)
    return prop @ (a - a_ss) + a_ss


def _atom_phase_factors(profiles, p: ModelParams, dt: float):
    """Entries of the pointwise unitary exp(-i dt V(z))."""
    half_delta = 0.5 * p.two_photon_detuning
    a = profiles.u_dn - half_delta
    b = profiles.u_up + half_delta
    mean, diff = 0.5 * (a + b), 0.5 * (a - b)
    r = np.sqrt(diff ** 2 + np.abs(profiles.raman) ** 2)
    cr = np.cos(dt * r)
    sr = np.where(r > 1e-300, np.sin(dt * r) / np.where(r > 0, r, 1.0), dt)
    ph = np.exp(-1j * dt * mean)
    return (ph * (cr - 1j * sr * diff), ph * (-1j * sr * profiles.raman),
            ph * (-1j * sr * np.conj(profiles.raman)),
            ph * (cr + 1j * sr * diff))


def propagate_effective(state, p: ModelParams, t_final: float,
                        dt: float = 1e-3, snapshot_every: float = 0.5,
                        store_states_every: int = 0) -> Trajectory:
    """Strang splitting: half cavity step, unitary atomic step, half
    cavity step.  The ground-manifold norm drift is monitored; a step
    violating the bound triggers adaptive halving and eventually
    StepTooLargeError."""
    if isinstance(state, SteadyState):
        field, a = state.spinor, state.cavity.as_vector()
    else:
        field, a = state
        a = a.as_vector() if isinstance(a, CavityState) else np.asarray(a)
    basis = field.basis
    psi = field.psi.copy()
    norm0 = field.norm()

    times = [0.0]
    rows = [_observable_row(field, a)]
    snaps = []
    stride = max(1, int(round(snapshot_every / dt)))
    n_steps = int(round(t_final / dt))
    ek = np.exp(-0.5j * dt * basis.kinetic_grid)

    def atom_step(psi, a, dt, ek):
        prof = field_profiles(CavityState.from_vector(a), p, basis)
        m11, m12, m21, m22 = _atom_phase_factors(prof, p, dt)
        psi = np.fft.ifft(ek * np.fft.fft(psi, axis=-1), axis=-1)
        psi = np.array([m11 * psi[0] + m12 * psi[1],
                        m21 * psi[0] + m22 * psi[1]])
        return np.fft.ifft(ek * np.fft.fft(psi, axis=-1), axis=-1)

    halvings = 0
    step = 0
    while step < n_steps:
        cur = SpinorField(basis, psi[0], psi[1], band_limit=False)
        a_mid = _cavity_halfstep(a, cur, p, 0.5 * dt)
        psi_new = atom_step(psi, a_mid, dt, ek)
        new_field = SpinorField(basis, psi_new[0], psi_new[1],
                                band_limit=False)
        a_new = _cavity_halfstep(a_mid, new_field, p, 0.5 * dt)
        elapsed = max((step + 1) * dt, dt)
        drift = abs(new_field.norm() - norm0) / elapsed
        if drift > _DRIFT_PER_TIME:
            halvings += 1
            if halvings > 6:
                raise StepTooLargeError(
                    f"norm drift {drift:.2e}/time exceeds {_DRIFT_PER_TIME}"
                    " even after adaptive halving")
            dt *= 0.5
            n_steps = (n_steps - step) * 2 + step
            stride = max(1, stride * 2)
            ek = np.exp(-0.5j * dt * basis.kinetic_grid)
            continue
        psi, a = psi_new, a_new
        step += 1
        if step % stride == 0 or step == n_steps:
            field_now = SpinorField(basis, psi[0], psi[1],
                                    band_limit=False)
            times.append(step * dt)
            rows.append(_observable_row(field_now, a))
            if store_states_every and (len(times) % store_states_every
                                       == 0):
                snaps.append((step * dt, field_now,
                              CavityState.from_vector(a)))

    names = rows[0].keys()
    obs = {n: np.array([r[n] for r in rows]) for n in names}
    return Trajectory(times=np.array(times), observables=obs,
                      snapshots=snaps)


def drift_report(traj: Trajectory) -> dict:
    """Largest change of every recorded observable along a trajectory;
    the stability regression gate compares these against 1e-4."""
    out = {}
    for name, series in traj.observables.items():
        out[name] = float(np.max(np.abs(series - series[0])))
    out["max_drift"] = max(v for k, v in out.items() if k != "norm")
    return out


def total_energy(field: SpinorField, a: np.ndarray, p: ModelParams) -> float:
    """Conserved mean-field energy for kappa = 0, eta = 0: atomic kinetic
    and Zeeman terms, bare mode energies, and the field-moment coupling
    counted once."""
    basis = field.basis
    c = field.coefficients()
    kin = float(np.sum(basis.modes.astype(float) ** 2
                       * np.sum(np.abs(c) ** 2, axis=0)))
    m = atomic_moments(field)
    half_delta = 0.5 * p.two_photon_detuning
    zeeman = half_delta * (m.n_up - m.n_dn)
    ap, am, bp, bm = a
    bare = (-p.delta_a * (abs(ap) ** 2 + abs(am) ** 2)
            - p.delta_b * (abs(bp) ** 2 + abs(bm) ** 2))
    coup = (p.u0_dn * ((abs(ap) ** 2 + abs(am) ** 2) * m.n_dn
                       + 2 * np.real(np.conj(ap) * am * m.nw_dn))
            + p.u0_up * ((abs(bp) ** 2 + abs(bm) ** 2) * m.n_up
                         + 2 * np.real(np.conj(bp) * bm * m.nw_up)))
    om = complex(p.omega_r)
    raman = 2 * np.real(om * ((np.conj(ap) * bp + np.conj(am) * bm)
                              * m.s_minus
                              + np.conj(ap) * bm * m.sw_minus_m
                              + np.conj(am) * bp * m.sw_minus_p))
    return float(kin + zeeman + bare + coup + raman)


# ----------------------------------------------------------------------
# Three-level model
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaParams:
    """Microscopic couplings of the three-level scheme plus the derived
    effective parameters; the light shift per photon and Raman scale
    follow as U0_tau = 2 |g_tau|^2 / (det_dn + det_up) and
    Om_0R = 2 g_dn^* g_up / (det_dn + det_up)."""

    g_dn: complex
    g_up: complex
    det_dn: float
    det_up: float
    base: ModelParams

    def __post_init__(self):
        dsum = self.det_dn + self.det_up
        if dsum == 0:
            raise ValueError("det_dn + det_up must be nonzero")
        u0d = 2.0 * abs(self.g_dn) ** 2 / dsum
        u0u = 2.0 * abs(self.g_up) ** 2 / dsum
        om = 2.0 * np.conj(self.g_dn) * self.g_up / dsum
        if (abs(u0d - self.base.u0_dn) > 1e-12
                or abs(u0u - self.base.u0_up) > 1e-12
                or abs(om - complex(self.base.omega_r)) > 1e-12):
            raise ValueError("base ModelParams inconsistent with the "
                             "microscopic couplings")
        scale = max(abs(self.g_dn), abs(self.g_up),
                    abs(self.base.two_photon_detuning))
        if abs(dsum) < 10.0 * scale:
            import warnings
            warnings.warn("detuning sum is not large against the "
                          "couplings; adiabatic elimination is marginal",
                          stacklevel=2)

    @classmethod
    def from_microscopic(cls, g_dn, g_up, det_dn, det_up,
                         base: ModelParams) -> "LambdaParams":
        dsum = det_dn + det_up
        derived = ModelParams(
            delta_a=base.delta_a, delta_b=base.delta_b,
            eta_p=base.eta_p, eta_m=base.eta_m,
            u0_dn=2.0 * abs(g_dn) ** 2 / dsum,
            u0_up=2.0 * abs(g_up) ** 2 / dsum,
            omega_r=2.0 * np.conj(g_dn) * g_up / dsum,
            kappa=base.kappa,
            two_photon_detuning=base.two_photon_detuning)
        return cls(g_dn=complex(g_dn), g_up=complex(g_up),
                   det_dn=float(det_dn), det_up=float(det_up),
                   base=derived)


class ThreeLevelField:
    """Ground doublet plus excited component on the shared grid."""

    __slots__ = ("basis", "psi")

    def __init__(self, basis: PlaneWaveBasis, psi_dn, psi_up, psi_e):
        psi = np.array([psi_dn, psi_up, psi_e], dtype=complex)
        if psi.shape != (3, basis.n_grid):
            raise ValueError("three-level field shape mismatch")
        self.basis = basis
        self.psi = psi

    @classmethod
    def from_ground(cls, field: SpinorField) -> "ThreeLevelField":
        zero = np.zeros(field.basis.n_grid, dtype=complex)
        return cls(field.basis, field.psi[0], field.psi[1], zero)

    def norm(self) -> float:
        return float(np.real(self.basis.integrate(
            np.sum(np.abs(self.psi) ** 2, axis=0))))


def excited_steady_state(psi3: np.ndarray, a: np.ndarray,
                         lp: LambdaParams,
                         basis: PlaneWaveBasis) -> np.ndarray:
    """Instantaneous excited-state profile that the full dynamics should
    track in the adiabatic regime."""
    z = basis.z
    e_p, e_m = np.exp(-1j * z), np.exp(1j * z)
    ap, am, bp, bm = a
    dsum = lp.det_dn + lp.det_up
    return (2.0 / dsum) * (lp.g_dn * (e_p * ap + e_m * am) * psi3[0]
                           + lp.g_up * (e_p * bp + e_m * bm) * psi3[1])


def propagate_lambda(state3: ThreeLevelField, lp: LambdaParams,
                     t_final: float, dt: float = 2e-4,
                     a0: np.ndarray | None = None,
                     snapshot_every: float = 0.25) -> Trajectory:
    """Strang splitting of the six-equation three-level system.  The
    single-photon couplings shift momenta by one recoil, so the shared
    plane-wave grid stays closed under the coupling; the pointwise 3x3
    potential exponential is built from a batched eigendecomposition."""
    p = lp.base
    basis = state3.basis
    psi = state3.psi.copy()
    if a0 is None:
        a0 = np.zeros(4, dtype=complex)
    a = np.asarray(a0, dtype=complex).copy()
    kap = p.kappa
    eta = pump_vector(p)
    deltas = np.array([p.delta_a, p.delta_a, p.delta_b, p.delta_b])
    ek = np.exp(-0.5j * dt * basis.kinetic_grid)
    norm0 = state3.norm()

    times = [0.0]
    rows = []
    snaps = [(0.0, psi.copy(), a.copy())]

    def obs_row(psi, a):
        gfield = SpinorField(basis, psi[0], psi[1], band_limit=False)
        row = _observable_row(gfield, a)
        row["n_e"] = float(np.real(basis.integrate(np.abs(psi[2]) ** 2)))
        return row

    rows.append(obs_row(psi, a))
    stride = max(1, int(round(snapshot_every / dt)))
    n_steps = int(round(t_final / dt))

    lam = -(deltas + 1j * kap)
    for step in range(1, n_steps + 1):
        # half cavity step: i da = -(Delta + i kappa) a + src(psi) + i eta
        src = _lambda_sources(psi, lp, basis)
        a_ss = (src + 1j * eta) / (deltas + 1j * kap)
        a = np.exp(-0.5j * dt * lam) * (a - a_ss) + a_ss
        # full atomic step
        psi = np.fft.ifft(ek * np.fft.fft(psi, axis=-1), axis=-1)
        psi = _three_level_phase(psi, a, lp, dt)
        psi = np.fft.ifft(ek * np.fft.fft(psi, axis=-1), axis=-1)
        # half cavity step
        src = _lambda_sources(psi, lp, basis)
        a_ss = (src + 1j * eta) / (deltas + 1j * kap)
        a = np.exp(-0.5j * dt * lam) * (a - a_ss) + a_ss

        if step % stride == 0 or step == n_steps:
            times.append(step * dt)
            rows.append(obs_row(psi, a))
            snaps.append((step * dt, psi.copy(), a.copy()))
            gnorm = float(np.real(basis.integrate(
                np.sum(np.abs(psi) ** 2, axis=0))))
            if abs(gnorm - norm0) > _DRIFT_PER_TIME * max(step * dt, dt):
                raise StepTooLargeError(
                    f"three-level norm drift {abs(gnorm - norm0):.2e} "
                    f"at t={step * dt:.3f}")

    names = rows[0].keys()
    obs = {nm: np.array([r[nm] for r in rows]) for nm in names}
    return Trajectory(times=np.array(times), observables=obs,
                      snapshots=snaps)


def _lambda_sources(psi: np.ndarray, lp: LambdaParams,
                    basis: PlaneWaveBasis) -> np.ndarray:
    """Cavity source terms g^* int e^{-+ikz} psi_g^* psi_e dz for the
    four modes (a_+, a_-, b_+, b_-)."""
    z = basis.z
    e_p, e_m = np.exp(1j * z), np.exp(-1j * z)
    s_ap = np.conj(lp.g_dn) * basis.integrate(e_p * np.conj(psi[0]) * psi[2])
    s_am = np.conj(lp.g_dn) * basis.integrate(e_m * np.conj(psi[0]) * psi[2])
    s_bp = np.conj(lp.g_up) * basis.integrate(e_p * np.conj(psi[1]) * psi[2])
    s_bm = np.conj(lp.g_up) * basis.integrate(e_m * np.conj(psi[1]) * psi[2])
    return np.array([s_ap, s_am, s_bp, s_bm])


def _three_level_phase(psi: np.ndarray, a: np.ndarray, lp: LambdaParams,
                       dt: float) -> np.ndarray:
    """Pointwise exp(-i dt V3(z)) via a batched 3x3 eigendecomposition."""
    basis_n = psi.shape[1]
    p = lp.base
    half_delta = 0.5 * p.two_photon_detuning
    dsum = lp.det_dn + lp.det_up
    z = np.arange(basis_n) * (2.0 * np.pi / basis_n)
    e_p, e_m = np.exp(-1j * z), np.exp(1j * z)
    ap, am, bp, bm = a
    c_dn = lp.g_dn * (e_p * ap + e_m * am)
    c_up = lp.g_up * (e_p * bp + e_m * bm)
    V = np.zeros((basis_n, 3, 3), dtype=complex)
    V[:, 0, 0] = -half_delta
    V[:, 1, 1] = half_delta
    V[:, 2, 2] = -0.5 * dsum
    V[:, 2, 0] = c_dn
    V[:, 0, 2] = np.conj(c_dn)
    V[:, 2, 1] = c_up
    V[:, 1, 2] = np.conj(c_up)
    w, U = np.linalg.eigh(V)
    phase = np.exp(-1j * dt * w)
    out = np.einsum("zij,zj,zkj,kz->iz", U, phase, np.conj(U), psi)
    return out


def adiabatic_residual(traj: Trajectory, lp: LambdaParams,
                       basis: PlaneWaveBasis) -> np.ndarray:
    """Per-snapshot distance of the excited component from its
    instantaneous adiabatic profile, ||psi_e - psi_e^ss||."""
    out = []
    for t, psi, a in traj.snapshots:
        target = excited_steady_state(psi, a, lp, basis)
        d = psi[2] - target
        out.append(float(np.sqrt(np.real(basis.integrate(np.abs(d) ** 2)))))
    return np.array(out)


__all__ = ["Trajectory", "propagate_effective", "drift_report",
           "total_energy", "LambdaParams", "ThreeLevelField",
           "excited_steady_state", "propagate_lambda",
           "adiabatic_residual"]
