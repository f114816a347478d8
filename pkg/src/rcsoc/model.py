"""Core types: physical parameters, periodic plane-wave basis, spinor and
cavity states.

Units: hbar = 1, photon wave number k = 1, recoil frequency
omega_rec = hbar k^2 / 2m = 1 (so m = 1/2).  All frequencies below are in
units of omega_rec and all lengths in units of 1/k.  The computational
domain is two unit cells of total length lambda = 2 pi with periodic
boundary conditions; a plane wave e^{i j k z} then carries kinetic energy
j^2 omega_rec.

The condensate is normalised to unit total atom number,
int (|psi_dn|^2 + |psi_up|^2) dz = 1, and the collective pump sqrt(N) eta
is exposed as the single pump parameter ``eta``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict, replace
from functools import cached_property

import numpy as np

from .errors import BasisMismatchError

WAVELENGTH = 2.0 * np.pi  # domain length lambda, in units of 1/k


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# ----------------------------------------------------------------------
# Parameters
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the two-component / four-mode model.

    delta_a, delta_b : cavity detunings of the two polarisation pairs
    eta_p, eta_m     : pump amplitudes driving the a_+ and b_- modes
    u0_dn, u0_up     : light shift per photon for each pseudospin
    omega_r          : two-photon Raman coupling scale (complex allowed)
    kappa            : cavity field decay rate, must be positive
    two_photon_detuning : relative detuning delta between the spin states
    """

    delta_a: float
    delta_b: float
    eta_p: float
    eta_m: float
    u0_dn: float
    u0_up: float
    omega_r: complex
    kappa: float
    two_photon_detuning: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive (lossless cavities have "
                             "no unique steady state)")

    @property
    def is_symmetric(self) -> bool:
        """True for the fully symmetric configuration used in the scans."""
        return (self.delta_a == self.delta_b
                and self.eta_p == self.eta_m
                and self.two_photon_detuning == 0.0
                and self.u0_dn == self.u0_up == self.omega_r)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega_r"] = [complex(self.omega_r).real, complex(self.omega_r).imag]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        om = d["omega_r"]
        if isinstance(om, (list, tuple)):
            d["omega_r"] = complex(om[0], om[1])
        return cls(**d)


def make_symmetric_params(delta: float, eta: float) -> ModelParams:
    """Symmetric operating point: equal detunings and pumps, delta = 0,
    U0_dn = U0_up = Omega_0R = -1 and kappa = 1 (recoil units)."""
    return ModelParams(delta_a=float(delta), delta_b=float(delta),
                       eta_p=float(eta), eta_m=float(eta),
                       u0_dn=-1.0, u0_up=-1.0, omega_r=-1.0 + 0.0j,
                       kappa=1.0, two_photon_detuning=0.0)


# ----------------------------------------------------------------------
# Plane-wave basis
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneWaveBasis:
    """Truncated plane-wave basis e^{i j k z}/sqrt(L), |j| <= cutoff, on a
    uniform periodic grid.

    n_grid >= 4*cutoff + 2 keeps the quadrature of quartic products of
    basis functions alias-free, so all moments computed on the grid are
    exact for band-limited fields.
    """

    cutoff: int = 12
    n_grid: int = 128
    domain_length: float = WAVELENGTH

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if self.n_grid < 4 * self.cutoff + 2:
            raise ValueError(f"n_grid must be >= 4*cutoff + 2 = "
                             f"{4 * self.cutoff + 2}")
        if abs(self.domain_length - WAVELENGTH) > 1e-12:
            raise ValueError("domain length is fixed to lambda = 2 pi "
                             "(two unit cells) by the periodic model")

    @cached_property
    def dz(self) -> float:
        return self.domain_length / self.n_grid

    @cached_property
    def z(self) -> np.ndarray:
        return _readonly(np.arange(self.n_grid) * self.dz)

    @cached_property
    def grid_modes(self) -> np.ndarray:
        """Integer wave numbers of the FFT layout, length n_grid."""
        return _readonly(np.fft.fftfreq(self.n_grid, 1.0 / self.n_grid)
                         .astype(int))

    @cached_property
    def in_band(self) -> np.ndarray:
        return _readonly(np.abs(self.grid_modes) <= self.cutoff)

    @cached_property
    def modes(self) -> np.ndarray:
        """Basis wave numbers -cutoff..cutoff, ascending."""
        return _readonly(np.arange(-self.cutoff, self.cutoff + 1))

    @cached_property
    def kinetic_grid(self) -> np.ndarray:
        """Kinetic energy j^2 (omega_rec) in the FFT layout."""
        return _readonly(self.grid_modes.astype(float) ** 2)

    @cached_property
    def _mode_index(self) -> np.ndarray:
        # FFT bin of each basis mode, ascending j
        return _readonly(np.array([j % self.n_grid for j in self.modes]))

    # -- transforms between grid samples and mode coefficients ---------

    def project(self, values: np.ndarray) -> np.ndarray:
        """Band-limit grid samples to |j| <= cutoff."""
        f = np.fft.fft(values, axis=-1)
        f[..., ~self.in_band] = 0.0
        return np.fft.ifft(f, axis=-1)

    def grid_to_coefficients(self, values: np.ndarray) -> np.ndarray:
        """Coefficients c_j of e^{i j k z}/sqrt(L), j ascending."""
        if values.shape[-1] != self.n_grid:
            raise BasisMismatchError(
                f"grid length {values.shape[-1]} != n_grid {self.n_grid}")
        f = np.fft.fft(values, axis=-1) * (self.dz / np.sqrt(self.domain_length))
        return f[..., self._mode_index]

    def coefficients_to_grid(self, coeffs: np.ndarray) -> np.ndarray:
        if coeffs.shape[-1] != 2 * self.cutoff + 1:
            raise BasisMismatchError(
                f"coefficient table length {coeffs.shape[-1]} != "
                f"{2 * self.cutoff + 1}")
        spec = np.zeros(coeffs.shape[:-1] + (self.n_grid,), dtype=complex)
        spec[..., self._mode_index] = coeffs
        spec *= self.n_grid / np.sqrt(self.domain_length)
        return np.fft.ifft(spec, axis=-1)

    def integrate(self, values: np.ndarray) -> complex:
        """Quadrature int f dz, exact for band-limited integrands."""
        return np.sum(values, axis=-1) * self.dz


DEFAULT_BASIS = PlaneWaveBasis()


# ----------------------------------------------------------------------
# Spinor field
# ----------------------------------------------------------------------

class SpinorField:
    """Two complex condensate components sampled on the basis grid.

    Immutable; every constructor band-limits its input so the field is
    exactly representable in the basis.
    """

    __slots__ = ("basis", "psi", "_coeffs")

    def __init__(self, basis: PlaneWaveBasis, psi_dn, psi_up, *,
                 band_limit: bool = True):
        psi = np.array([psi_dn, psi_up], dtype=complex)
        if psi.shape != (2, basis.n_grid):
            raise BasisMismatchError(
                f"field shape {psi.shape} != (2, {basis.n_grid})")
        if band_limit:
            psi = basis.project(psi)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "psi", _readonly(psi))
        object.__setattr__(self, "_coeffs", None)

    def __setattr__(self, *args):
        raise AttributeError("SpinorField is immutable")

    def __getstate__(self):
        return (self.basis, np.asarray(self.psi),
                None if self._coeffs is None else np.asarray(self._coeffs))

    def __setstate__(self, state):
        basis, psi, coeffs = state
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "psi", _readonly(psi))
        object.__setattr__(self, "_coeffs",
                           None if coeffs is None else _readonly(coeffs))

    @property
    def psi_dn(self) -> np.ndarray:
        return self.psi[0]

    @property
    def psi_up(self) -> np.ndarray:
        return self.psi[1]

    @classmethod
    def from_coefficients(cls, basis: PlaneWaveBasis,
                          coeffs: np.ndarray) -> "SpinorField":
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (2, 2 * basis.cutoff + 1):
            raise BasisMismatchError(
                f"coefficient shape {coeffs.shape} != "
                f"(2, {2 * basis.cutoff + 1})")
        grid = basis.coefficients_to_grid(coeffs)
        field = cls(basis, grid[0], grid[1], band_limit=False)
        # keep the exact table: serialisation round trips stay bitwise
        object.__setattr__(field, "_coeffs", _readonly(coeffs.copy()))
        return field

    @classmethod
    def uniform(cls, basis: PlaneWaveBasis) -> "SpinorField":
        """Equal homogeneous superposition with unit total norm."""
        amp = 1.0 / np.sqrt(2.0 * basis.domain_length)
        ones = np.full(basis.n_grid, amp, dtype=complex)
        return cls(basis, ones, ones, band_limit=False)

    def coefficients(self) -> np.ndarray:
        if self._coeffs is None:
            object.__setattr__(self, "_coeffs", _readonly(
                self.basis.grid_to_coefficients(self.psi)))
        return self._coeffs

    def norm(self) -> float:
        return float(np.real(self.basis.integrate(
            np.abs(self.psi[0]) ** 2 + np.abs(self.psi[1]) ** 2)))

    def normalized(self) -> "SpinorField":
        n = self.norm()
        if n <= 0:
            raise ValueError("cannot normalise a zero field")
        s = 1.0 / np.sqrt(n)
        return SpinorField(self.basis, self.psi[0] * s, self.psi[1] * s,
                           band_limit=False)

    def canonical_phase(self) -> "SpinorField":
        """Rotate the global U(1) phase so the largest coefficient is
        real and positive (deterministic output files)."""
        c = self.coefficients()
        flat = np.abs(c).ravel()
        i = int(np.argmax(flat))
        val = c.ravel()[i]
        if abs(val) < 1e-300:
            return self
        ph = np.exp(-1j * np.angle(val))
        return SpinorField(self.basis, self.psi[0] * ph, self.psi[1] * ph,
                           band_limit=False)

    def distance(self, other: "SpinorField") -> float:
        d = self.psi - other.psi
        return float(np.sqrt(np.real(self.basis.integrate(
            np.abs(d[0]) ** 2 + np.abs(d[1]) ** 2))))


def transform(obj, direction: str, basis: PlaneWaveBasis | None = None):
    """Plane-wave decomposition of a spinor field and its inverse.

    direction="forward": SpinorField -> (2, 2J+1) coefficient table.
    direction="inverse": coefficient table -> SpinorField (needs basis).
    """
    if direction == "forward":
        if not isinstance(obj, SpinorField):
            raise TypeError("forward transform expects a SpinorField")
        return obj.coefficients()
    if direction == "inverse":
        if basis is None:
            if isinstance(obj, SpinorField):
                raise TypeError("inverse transform expects a coefficient "
                                "table")
            raise ValueError("inverse transform requires a basis")
        return SpinorField.from_coefficients(basis, np.asarray(obj))
    raise ValueError(f"unknown transform direction {direction!r}")


# ----------------------------------------------------------------------
# Cavity state
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CavityState:
    """Mean-field amplitudes of the four ring-cavity modes
    (a_+, a_-, b_+, b_-)."""

    alpha_p: complex
    alpha_m: complex
    beta_p: complex
    beta_m: complex

    def __post_init__(self):
        for name in ("alpha_p", "alpha_m", "beta_p", "beta_m"):
            v = getattr(self, name)
            if not np.isfinite(v.real) or not np.isfinite(v.imag):
                raise ValueError(f"non-finite cavity amplitude {name}={v}")

    @classmethod
    def from_vector(cls, vec) -> "CavityState":
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (4,):
            raise ValueError("cavity vector must have four entries")
        return cls(*[complex(v) for v in vec])

    @classmethod
    def vacuum(cls) -> "CavityState":
        return cls(0j, 0j, 0j, 0j)

    def as_vector(self) -> np.ndarray:
        return np.array([self.alpha_p, self.alpha_m,
                         self.beta_p, self.beta_m], dtype=complex)

    def distance(self, other: "CavityState") -> float:
        return float(np.max(np.abs(self.as_vector() - other.as_vector())))


# ----------------------------------------------------------------------
# Converged steady state
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SteadyState:
    """Self-consistent stationary state plus convergence diagnostics.

    residual is the stationarity defect ||(H_at - mu) psi|| in the basis;
    field_residual is the final cavity-amplitude change per outer update.
    """

    spinor: SpinorField
    cavity: CavityState
    mu: float
    residual: float
    iterations: int
    seed: int
    converged: bool = True
    diverged: bool = False
    field_residual: float = 0.0
    mu_imag: float = 0.0

    def to_dict(self, params: ModelParams | None = None) -> dict:
        c = self.spinor.coefficients()
        as_pairs = lambda arr: [[float(v.real), float(v.imag)] for v in arr]
        d = {
            "basis": {"J": self.spinor.basis.cutoff,
                      "n_grid": self.spinor.basis.n_grid},
            "c_dn": as_pairs(c[0]),
            "c_up": as_pairs(c[1]),
            "alpha_p": [self.cavity.alpha_p.real, self.cavity.alpha_p.imag],
            "alpha_m": [self.cavity.alpha_m.real, self.cavity.alpha_m.imag],
            "beta_p": [self.cavity.beta_p.real, self.cavity.beta_p.imag],
            "beta_m": [self.cavity.beta_m.real, self.cavity.beta_m.imag],
            "mu": self.mu,
            "residual": self.residual,
            "iterations": self.iterations,
            "seed": self.seed,
            "converged": self.converged,
            "diverged": self.diverged,
        }
        if params is not None:
            d["params"] = params.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SteadyState":
        basis = PlaneWaveBasis(cutoff=int(d["basis"]["J"]),
                               n_grid=int(d["basis"]["n_grid"]))
        to_c = lambda pairs: np.array([complex(r, i) for r, i in pairs])
        coeffs = np.array([to_c(d["c_dn"]), to_c(d["c_up"])])
        spinor = SpinorField.from_coefficients(basis, coeffs)
        cav = CavityState(*[complex(d[k][0], d[k][1])
                            for k in ("alpha_p", "alpha_m",
                                      "beta_p", "beta_m")])
        return cls(spinor=spinor, cavity=cav, mu=float(d["mu"]),
                   residual=float(d.get("residual", 0.0)),
                   iterations=int(d.get("iterations", 0)),
                   seed=int(d.get("seed", 0)),
                   converged=bool(d.get("converged", True)),
                   diverged=bool(d.get("diverged", False)))

    def save(self, path, params: ModelParams | None = None):
        with open(path, "w") as fh:
            json.dump(self.to_dict(params), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SteadyState":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def load_state_params(path) -> ModelParams | None:
    """Model parameters embedded in a state file, if present."""
    with open(path) as fh:
        d = json.load(fh)
    if "params" in d:
        return ModelParams.from_dict(d["params"])
    return None


# ----------------------------------------------------------------------
# Screw transformation
# ----------------------------------------------------------------------

def screw_transform(spinor: SpinorField, cavity: CavityState,
                    shift: float) -> tuple[SpinorField, CavityState]:
    """Continuous symmetry of the model: translate by ``shift`` while
    counter-rotating the unpumped mode phases and the two spin
    components,

        psi_dn -> e^{+i k dz} psi_dn(z - dz)
        psi_up -> e^{-i k dz} psi_up(z - dz)
        alpha_m -> e^{-2 i k dz} alpha_m,  beta_p -> e^{+2 i k dz} beta_p.

    Applied to any stationary state it yields another stationary state
    with identical energy and order-parameter magnitudes.
    """
    basis = spinor.basis
    c = spinor.coefficients()
    j = basis.modes
    # translation by dz multiplies c_j by e^{-i j k dz}
    c_dn = c[0] * np.exp(1j * (1 - j) * shift)
    c_up = c[1] * np.exp(-1j * (1 + j) * shift)
    new_spinor = SpinorField.from_coefficients(basis, np.array([c_dn, c_up]))
    new_cavity = CavityState(cavity.alpha_p,
                             cavity.alpha_m * np.exp(-2j * shift),
                             cavity.beta_p * np.exp(2j * shift),
                             cavity.beta_m)
    return new_spinor, new_cavity


__all__ = [
    "WAVELENGTH", "ModelParams", "make_symmetric_params", "PlaneWaveBasis",
    "DEFAULT_BASIS", "SpinorField", "transform", "CavityState",
    "SteadyState", "load_state_params", "screw_transform", "replace",
]
