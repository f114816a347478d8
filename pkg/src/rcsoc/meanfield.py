"""Self-consistent stationary states of the coupled atom-cavity
mean-field equations.

The workhorse is an alternation of (a) split-step imaginary-time
propagation of the spinor in frozen optical potentials with (b)
under-relaxed updates of the cavity steady state.  Each candidate is
then polished by a small dense-diagonalisation fixed-point loop, which
pins the stationarity defect ||(H_at - mu) psi|| to machine precision
and keeps weakly attracting branches (e.g. the density-wave branch just
above its bifurcation) that the plain alternation slides off.

Several deterministic seeds compete per solve: random band-limited
fields, an even- and an odd-parity biased field, optionally a warm
start, and a pump-down continuation chain that tracks the high-pump
density-wave branch into the target point.  The lowest chemical
potential mu = <psi|H_at[a_ss(psi)]|psi> wins (the model has no contact
term, so mu equals the atomic energy functional used for selection).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .cavity import (FieldProfiles, atomic_moments,
                     cavity_steady_state, field_profiles)
from .model import (CavityState, ModelParams, PlaneWaveBasis, SpinorField,
                    SteadyState)

_DIVERGENCE_LIMIT = 1e8


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the fixed-point solver.

    dt_imag      : imaginary-time step (split-step, unconditionally stable)
    inner_steps  : imaginary-time steps per cavity update
    mixing       : under-relaxation factor for the amplitude update
    tol_psi      : wave-function change per unit imaginary time
    tol_field    : cavity-amplitude self-consistency gap
    max_iters    : outer-iteration budget per seed
    n_seeds      : number of random initialisations (parity-biased seeds
                   and the continuation chain are added on top)
    continuation : add a pump-down continuation candidate (tracks the
                   density-wave branch through its bifurcation)
    """

    dt_imag: float = 5e-3
    inner_steps: int = 20
    mixing: float = 0.5
    tol_psi: float = 1e-9
    tol_field: float = 1e-9
    max_iters: int = 200_000
    n_seeds: int = 4
    seed0: int = 0
    polish: bool = True
    continuation: bool = True
    parity_seeds: bool = True

    def __post_init__(self):
        if self.dt_imag <= 0 or self.tol_psi <= 0 or self.tol_field <= 0:
            raise ValueError("dt_imag and tolerances must be positive")
        if not 0.0 < self.mixing <= 1.0:
            raise ValueError("mixing must lie in (0, 1]")


# ----------------------------------------------------------------------
# Atomic Hamiltonian application and propagation factors
# ----------------------------------------------------------------------

def apply_atomic_hamiltonian(field: SpinorField, profiles: FieldProfiles,
                             p: ModelParams) -> SpinorField:
    """(H_at psi): kinetic term j^2 in momentum space, potentials and
    Raman coupling pointwise in real space, -+delta/2 on the diagonal.
    The result is band-limited back to the basis (Galerkin truncation)."""
    basis = field.basis
    half_delta = 0.5 * p.two_photon_detuning
    f = np.fft.fft(field.psi, axis=-1)
    out = np.fft.ifft(basis.kinetic_grid * f, axis=-1)
    dn, up = field.psi
    out[0] += (profiles.u_dn - half_delta) * dn + profiles.raman * up
    out[1] += (profiles.u_up + half_delta) * up + np.conj(profiles.raman) * dn
    return SpinorField(basis, out[0], out[1])


def rayleigh_quotient(field: SpinorField, profiles: FieldProfiles,
                      p: ModelParams) -> complex:
    h = apply_atomic_hamiltonian(field, profiles, p)
    num = field.basis.integrate(np.conj(field.psi[0]) * h.psi[0]
                                + np.conj(field.psi[1]) * h.psi[1])
    return complex(num) / field.norm()


def chemical_potential(field: SpinorField, profiles: FieldProfiles,
                       p: ModelParams) -> float:
    """mu = Re <psi|H_at|psi>; the imaginary part vanishes for the
    Hermitian mean-field Hamiltonian and is kept only as a diagnostic."""
    return float(np.real(rayleigh_quotient(field, profiles, p)))


_kin_cache: dict = {}


def _kinetic_factor(basis: PlaneWaveBasis, dt: float) -> np.ndarray:
    key = (basis.cutoff, basis.n_grid, dt)
    out = _kin_cache.get(key)
    if out is None:
        out = np.exp(-0.5 * dt * basis.kinetic_grid) * basis.in_band
        _kin_cache[key] = out
    return out


def _potential_factors(profiles: FieldProfiles, p: ModelParams, dt: float):
    """Entries of exp(-dt V(z)) for the pointwise 2x2 potential matrix
    V = [[u_dn - d/2, raman], [raman^*, u_up + d/2]]."""
    half_delta = 0.5 * p.two_photon_detuning
    a = profiles.u_dn - half_delta
    b = profiles.u_up + half_delta
    mean = 0.5 * (a + b)
    diff = 0.5 * (a - b)
    r = np.sqrt(diff ** 2 + np.abs(profiles.raman) ** 2)
    ch = np.cosh(dt * r)
    sh = np.where(r > 1e-300, np.sinh(dt * r) / np.where(r > 0, r, 1.0), dt)
    ec = np.exp(-dt * mean)
    return (ec * (ch - sh * diff), ec * (-sh * profiles.raman),
            ec * (-sh * np.conj(profiles.raman)), ec * (ch + sh * diff))


def _step_raw(psi: np.ndarray, ek: np.ndarray, pot) -> np.ndarray:
    """One Strang split step on raw grid data, band-limited, unnormalised."""
    psi = np.fft.ifft(ek * np.fft.fft(psi, axis=-1), axis=-1)
    m11, m12, m21, m22 = pot
    psi = np.array([m11 * psi[0] + m12 * psi[1],
                    m21 * psi[0] + m22 * psi[1]])
    return np.fft.ifft(ek * np.fft.fft(psi, axis=-1), axis=-1)


def imaginary_time_step(field: SpinorField, profiles: FieldProfiles,
                        p: ModelParams, dt: float) -> SpinorField:
    """Normalised Strang step of the gradient flow psi <- e^{-dt H} psi:
    exact kinetic half-steps in momentum space around a pointwise
    potential/Raman exponential."""
    ek = _kinetic_factor(field.basis, dt)
    pot = _potential_factors(profiles, p, dt)
    psi = _step_raw(field.psi, ek, pot)
    return SpinorField(field.basis, psi[0], psi[1],
                       band_limit=False).normalized()


# ----------------------------------------------------------------------
# Dense Galerkin Hamiltonian (polish + diagnostics)
# ----------------------------------------------------------------------

def dense_hamiltonian(profiles: FieldProfiles, p: ModelParams) -> np.ndarray:
    """H_at as a dense Hermitian matrix over the product basis
    (component, mode); the potentials carry only 0, +-2 harmonics so the
    matrix is banded, but at this size dense assembly is simplest."""
    basis = profiles.basis
    nb = 2 * basis.cutoff + 1
    n = basis.n_grid
    cd = np.fft.fft(profiles.u_dn) / n
    cu = np.fft.fft(profiles.u_up) / n
    cr = np.fft.fft(profiles.raman) / n
    half_delta = 0.5 * p.two_photon_detuning
    H = np.zeros((2 * nb, 2 * nb), dtype=complex)
    modes = basis.modes
    kin = modes.astype(float) ** 2
    idx = np.subtract.outer(modes, modes) % n
    H[:nb, :nb] = cd[idx]
    H[nb:, nb:] = cu[idx]
    H[:nb, nb:] = cr[idx]
    H[nb:, :nb] = H[:nb, nb:].conj().T
    di = np.arange(nb)
    H[di, di] += kin - half_delta
    H[nb + di, nb + di] += kin + half_delta
    return H


def _coeff_vector(field: SpinorField) -> np.ndarray:
    c = field.coefficients()
    return np.concatenate([c[0], c[1]])


def _field_from_vector(basis: PlaneWaveBasis, vec: np.ndarray) -> SpinorField:
    nb = 2 * basis.cutoff + 1
    return SpinorField.from_coefficients(
        basis, np.array([vec[:nb], vec[nb:]]))


# ----------------------------------------------------------------------
# Seeds
# ----------------------------------------------------------------------

def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labelled parts (hash() is
    randomised per process and unusable for reproducible sweeps)."""
    h = hashlib.sha256(repr(tuple(parts)).encode()).digest()
    return int.from_bytes(h[:8], "big") >> 1


def random_field(basis: PlaneWaveBasis, seed: int,
                 parity: str | None = None) -> SpinorField:
    """Random band-limited spinor with a low-momentum envelope;
    parity="even"/"odd" keeps only the corresponding momenta."""
    rng = np.random.default_rng(seed)
    nb = 2 * basis.cutoff + 1
    c = rng.standard_normal((2, nb)) + 1j * rng.standard_normal((2, nb))
    c *= np.exp(-basis.modes.astype(float) ** 2 / 8.0)
    if parity == "even":
        c[:, basis.modes % 2 != 0] = 0.0
    elif parity == "odd":
        c[:, basis.modes % 2 == 0] = 0.0
    return SpinorField.from_coefficients(basis, c).normalized()


def _biased_odd_field(basis: PlaneWaveBasis) -> SpinorField:
    """Deterministic density-wave-biased odd seed: dominant +-1 momenta
    with admixed partners two photon recoils away."""
    nb = 2 * basis.cutoff + 1
    c = np.zeros((2, nb), dtype=complex)
    j = basis.modes

    def put(comp, mode, val):
        c[comp, np.searchsorted(j, mode)] = val

    put(0, 1, 1.0), put(0, -1, 0.4), put(0, 3, 0.25)
    put(1, -1, 1.0), put(1, 1, 0.4), put(1, -3, 0.25)
    return SpinorField.from_coefficients(basis, c).normalized()


def _biased_even_field(basis: PlaneWaveBasis) -> SpinorField:
    nb = 2 * basis.cutoff + 1
    c = np.zeros((2, nb), dtype=complex)
    j = basis.modes
    c[0, np.searchsorted(j, 0)] = 1.0
    c[1, np.searchsorted(j, 0)] = 1.0
    c[0, np.searchsorted(j, 2)] = 0.15
    c[1, np.searchsorted(j, -2)] = 0.15
    return SpinorField.from_coefficients(basis, c).normalized()


# ----------------------------------------------------------------------
# Relaxation core
# ----------------------------------------------------------------------

@dataclass
class _Candidate:
    spinor: SpinorField
    cavity: CavityState
    mu: float
    residual: float
    field_residual: float
    iterations: int
    converged: bool
    diverged: bool
    origin: str
    seed: int


def _self_consistent_field(field: SpinorField, p: ModelParams) -> CavityState:
    return cavity_steady_state(atomic_moments(field), p)


def _stationarity(field: SpinorField, cavity: CavityState,
                  p: ModelParams) -> tuple[float, float, float]:
    """Returns (mu, ||(H - mu) psi||, mu imaginary part)."""
    prof = field_profiles(cavity, p, field.basis)
    rq = rayleigh_quotient(field, prof, p)
    h = apply_atomic_hamiltonian(field, prof, p)
    d = h.psi - rq.real * field.psi
    res = float(np.sqrt(np.real(field.basis.integrate(
        np.abs(d[0]) ** 2 + np.abs(d[1]) ** 2))))
    return float(rq.real), res, float(abs(rq.imag))


def _alternate(field: SpinorField, p: ModelParams, cfg: SolverConfig,
               cavity: CavityState | None = None,
               max_iters: int | None = None) -> _Candidate:
    """The spec'd fixed-point loop: K imaginary-time steps in frozen
    profiles, then an under-relaxed cavity steady-state update."""
    basis = field.basis
    psi = field.normalized().psi
    a = (cavity.as_vector() if cavity is not None else
         _self_consistent_field(field.normalized(), p).as_vector())
    ek = _kinetic_factor(basis, cfg.dt_imag)
    norm = lambda q: np.sqrt(np.real(basis.integrate(
        np.abs(q[0]) ** 2 + np.abs(q[1]) ** 2)))
    budget = cfg.max_iters if max_iters is None else max_iters
    it = 0
    dpsi_rate = np.inf
    da = np.inf
    diverged = False
    converged = False
    for it in range(1, budget + 1):
        prof = field_profiles(CavityState.from_vector(a), p, basis)
        pot = _potential_factors(prof, p, cfg.dt_imag)
        old = psi
        for _ in range(cfg.inner_steps):
            psi = _step_raw(psi, ek, pot)
            psi /= norm(psi)
        try:
            a_new = cavity_steady_state(
                atomic_moments(SpinorField(basis, psi[0], psi[1],
                                           band_limit=False)), p).as_vector()
        except Exception:
            diverged = True
            break
        if (not np.all(np.isfinite(a_new))
                or np.max(np.abs(a_new)) > _DIVERGENCE_LIMIT):
            diverged = True
            break
        da = float(np.max(np.abs(a_new - a)))
        a = (1.0 - cfg.mixing) * a + cfg.mixing * a_new
        dpsi_rate = float(norm(psi - old)) / (cfg.inner_steps * cfg.dt_imag)
        if dpsi_rate < cfg.tol_psi and da < cfg.tol_field:
            converged = True
            break
    out_field = SpinorField(basis, psi[0], psi[1], band_limit=False)
    out_field = out_field.normalized()
    if diverged:
        return _Candidate(out_field, CavityState.from_vector(a), np.inf,
                          np.inf, np.inf, it, False, True, "", -1)
    cav = _self_consistent_field(out_field, p)
    mu, res, _ = _stationarity(out_field, cav, p)
    return _Candidate(out_field, cav, mu, res, da, it, converged, False,
                      "", -1)


def _polish(cand: _Candidate, p: ModelParams, cfg: SolverConfig,
            max_iters: int = 400) -> _Candidate:
    """Dense-diagonalisation fixed point at the candidate's branch:
    follow the eigenvector of H_at[a] with maximal overlap against the
    current iterate while relaxing the amplitudes, then re-measure the
    stationarity defect.  Falls back to the input if it wanders off."""
    if cand.diverged:
        return cand
    basis = cand.spinor.basis
    vec = _coeff_vector(cand.spinor)
    a = cand.cavity.as_vector()
    tol_psi = 0.25 * cfg.tol_psi * cfg.inner_steps * cfg.dt_imag
    it = 0
    for it in range(1, max_iters + 1):
        prof = field_profiles(CavityState.from_vector(a), p, basis)
        H = dense_hamiltonian(prof, p)
        w, V = np.linalg.eigh(H)
        overlaps = np.abs(V.conj().T @ vec)
        pick = int(np.argmax(overlaps))
        new = V[:, pick]
        phase = np.vdot(new, vec)
        if abs(phase) > 0:
            new = new * (phase / abs(phase))
        try:
            a_new = _self_consistent_field(
                _field_from_vector(basis, new), p).as_vector()
        except Exception:
            return cand
        dv = float(np.linalg.norm(new - vec))
        da = float(np.max(np.abs(a_new - a)))
        vec = new
        a = (1.0 - cfg.mixing) * a + cfg.mixing * a_new
        if dv < tol_psi and da < 0.25 * cfg.tol_field:
            break
    field = _field_from_vector(basis, vec).normalized()
    if field.distance(cand.spinor) > 0.2:
        return cand  # slid to a different branch; keep the honest iterate
    cav = _self_consistent_field(field, p)
    mu, res, _ = _stationarity(field, cav, p)
    da = float(np.max(np.abs(cav.as_vector() - a)))
    if res > cand.residual and cand.residual < np.inf:
        return cand
    return _Candidate(field, cav, mu, res, da, cand.iterations + it,
                      cand.converged or (da < cfg.tol_field), False,
                      cand.origin, cand.seed)


def _scale_pump(p: ModelParams, factor: float) -> ModelParams:
    return replace(p, eta_p=p.eta_p * factor, eta_m=p.eta_m * factor)


def _continuation_candidate(p: ModelParams, cfg: SolverConfig,
                            basis: PlaneWaveBasis) -> _Candidate | None:
    """Track the high-pump density-wave branch down to the target pump.
    Near its (supercritical) birth the branch repels the plain
    alternation, so each leg is polished before continuing."""
    eta_ref = max(abs(p.eta_p), abs(p.eta_m))
    if eta_ref <= 0:
        return None
    factor_hi = 1.35 + 10.0 / eta_ref
    factors = np.linspace(factor_hi, 1.0, 5)
    budget = min(cfg.max_iters, 30_000)
    field = _biased_odd_field(basis)
    cavity = None
    cand = None
    for f in factors:
        pf = _scale_pump(p, float(f))
        cand = _alternate(field, pf, cfg, cavity=cavity, max_iters=budget)
        if cand.diverged:
            return cand
        if cfg.polish:
            cand = _polish(cand, pf, cfg)
        field, cavity = cand.spinor, cand.cavity
    return cand


def _canonicalize(cand: _Candidate, p: ModelParams) -> _Candidate:
    """Deterministic output phases: fix the global U(1) phase always;
    at zero pump the global spin rotation is free as well and is fixed
    by making the collective spin real non-negative."""
    field = cand.spinor
    if max(abs(p.eta_p), abs(p.eta_m)) == 0.0:
        m = atomic_moments(field)
        if abs(m.s_minus) > 1e-12:
            chi = np.angle(m.s_minus)
            field = SpinorField(field.basis,
                                field.psi[0] * np.exp(0.5j * chi),
                                field.psi[1] * np.exp(-0.5j * chi),
                                band_limit=False)
    field = field.canonical_phase()
    return replace_candidate(cand, spinor=field)


def replace_candidate(cand: _Candidate, **kw) -> _Candidate:
    d = dict(spinor=cand.spinor, cavity=cand.cavity, mu=cand.mu,
             residual=cand.residual, field_residual=cand.field_residual,
             iterations=cand.iterations, converged=cand.converged,
             diverged=cand.diverged, origin=cand.origin, seed=cand.seed)
    d.update(kw)
    return _Candidate(**d)


def solve_steady_state(p: ModelParams, cfg: SolverConfig | None = None,
                       init: SpinorField | SteadyState | int | None = None,
                       basis: PlaneWaveBasis | None = None) -> SteadyState:
    """Global search for the lowest-energy self-consistent state.

    init may be a SpinorField (extra seed), a SteadyState (warm start,
    preferred on energy ties), or an int overriding cfg.seed0.
    Non-convergence is reported through the ``converged`` flag on the
    best iterate; field blow-up marks the point as an unstable
    candidate via ``diverged``.
    """
    cfg = cfg or SolverConfig()
    if basis is None:
        basis = (init.spinor.basis if isinstance(init, SteadyState)
                 else init.basis if isinstance(init, SpinorField)
                 else PlaneWaveBasis())
    seed0 = cfg.seed0 if not isinstance(init, (int, np.integer)) else int(init)

    candidates: list[_Candidate] = []

    def admit(cand: _Candidate | None, origin: str, seed: int):
        if cand is None:
            return
        cand = replace_candidate(cand, origin=origin, seed=seed)
        candidates.append(cand)

    warm_present = isinstance(init, SteadyState)
    if warm_present:
        cand = _alternate(init.spinor, p, cfg, cavity=init.cavity)
        if cfg.polish:
            cand = _polish(cand, p, cfg)
        admit(cand, "warm", seed0)
    if isinstance(init, SpinorField):
        cand = _alternate(init, p, cfg)
        if cfg.polish:
            cand = _polish(cand, p, cfg)
        admit(cand, "init", seed0)

    for i in range(cfg.n_seeds):
        s = derive_seed("random", seed0, i)
        cand = _alternate(random_field(basis, s), p, cfg)
        if cfg.polish:
            cand = _polish(cand, p, cfg)
        admit(cand, f"random{i}", s)

    if cfg.parity_seeds:
        for parity, maker in (("even", _biased_even_field),
                              ("odd", _biased_odd_field)):
            cand = _alternate(maker(basis), p, cfg)
            if cfg.polish:
                cand = _polish(cand, p, cfg)
            admit(cand, parity, derive_seed(parity, seed0))

    if cfg.continuation:
        admit(_continuation_candidate(p, cfg, basis), "continuation",
              derive_seed("continuation", seed0))

    # selection: converged first, then energy with 1e-8 rounding;
    # warm start wins ties, then earliest candidate.
    def sort_key(item):
        i, c = item
        warm_rank = 0 if c.origin == "warm" else 1
        return (c.diverged, not c.converged, round(c.mu, 8), warm_rank, i)

    best = min(enumerate(candidates), key=sort_key)[1]
    best = _canonicalize(best, p)
    mu, res, mu_imag = (_stationarity(best.spinor, best.cavity, p)
                        if not best.diverged else (np.nan, np.inf, np.nan))
    return SteadyState(spinor=best.spinor, cavity=best.cavity,
                       mu=float(mu) if np.isfinite(mu) else 0.0,
                       residual=res, iterations=best.iterations,
                       seed=seed0, converged=best.converged,
                       diverged=best.diverged,
                       field_residual=best.field_residual,
                       mu_imag=mu_imag if np.isfinite(mu_imag) else 0.0)


__all__ = ["SolverConfig", "apply_atomic_hamiltonian", "rayleigh_quotient",
           "chemical_potential", "imaginary_time_step", "dense_hamiltonian",
           "derive_seed", "random_field", "solve_steady_state"]
