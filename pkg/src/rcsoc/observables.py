"""Order parameters, spin textures, the topological winding number,
momentum distributions, the emergent spin-orbit dispersion, and the
phase label derived from them.

Phases of the symmetric model:

    DW-SW  - modulated density, small-angle spin wave, zero winding
    PW-SS  - homogeneous density, full 2 pi spin spiral per unit cell
    DW-SS  - modulated density coexisting with the spin spiral

plus UNSTABLE (dynamically unstable point) and UNCONVERGED (solver gave
up) bookkeeping labels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .cavity import atomic_moments
from .errors import NodalSpinError
from .model import CavityState, ModelParams, SpinorField

LABELS = ("DW-SW", "PW-SS", "DW-SS", "UNSTABLE", "UNCONVERGED")
DEFAULT_TOL_DW = 1e-4


# ----------------------------------------------------------------------
# Spin texture and winding number
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SpinTexture:
    """Local pseudospin vector s(z) = <psi_eff| sigma |psi_eff> with
    psi_eff = (psi_up, psi_dn), reported unnormalised so its length
    carries the density, plus the unwrapped in-plane angle phi(z)."""

    z: np.ndarray
    s_x: np.ndarray
    s_y: np.ndarray
    s_z: np.ndarray
    phi: np.ndarray
    weak: np.ndarray  # points where |s_perp| is below the angle floor


def spin_texture(field: SpinorField, floor: float = 1e-14) -> SpinTexture:
    """s_x + i s_y = 2 psi_up^* psi_dn, s_z = |psi_up|^2 - |psi_dn|^2;
    phi is the unwrapped argument of the transverse spin.  Isolated
    near-nodes of |s_perp| are bridged by the unwrapping; extended nodal
    regions leave the angle undefined and raise NodalSpinError."""
    basis = field.basis
    sperp = 2.0 * np.conj(field.psi[1]) * field.psi[0]
    s_x = np.real(sperp)
    s_y = np.imag(sperp)
    s_z = np.abs(field.psi[1]) ** 2 - np.abs(field.psi[0]) ** 2
    weak = np.abs(sperp) < floor
    if np.all(weak):
        raise NodalSpinError("transverse spin vanishes everywhere; the "
                             "spin angle is undefined")
    # two or more adjacent weak points = extended node: angle ill-defined
    ext = weak & np.roll(weak, 1)
    if np.any(ext):
        raise NodalSpinError(
            f"transverse spin vanishes on an extended region "
            f"({int(np.sum(weak))} grid points)")
    raw = np.angle(sperp)
    dphi = np.angle(np.exp(1j * np.diff(raw)))
    phi = raw[0] + np.concatenate([[0.0], np.cumsum(dphi)])
    return SpinTexture(z=basis.z, s_x=s_x, s_y=s_y, s_z=s_z, phi=phi,
                       weak=weak)


class WindingResult(NamedTuple):
    value: int
    residual: float  # distance of the raw winding from the integer


def winding_number(texture: SpinTexture) -> WindingResult:
    """Accumulated wrapped phase increments of phi over one unit cell
    [0, lambda/2], divided by 2 pi and rounded; the pre-rounding
    residual is a quality diagnostic (should stay < 0.05)."""
    n = len(texture.z)
    if n % 2:
        raise ValueError("grid must contain an even number of points so "
                         "that lambda/2 lands on a grid point")
    half = n // 2
    dphi = np.diff(texture.phi[:half + 1])
    raw = float(np.sum(np.angle(np.exp(1j * dphi)))) / (2.0 * np.pi)
    w = int(np.rint(raw))
    return WindingResult(value=w, residual=abs(raw - w))


# ----------------------------------------------------------------------
# Phase point
# ----------------------------------------------------------------------

@dataclass
class PhasePoint:
    """All order parameters of one converged point of the scan."""

    eta: float
    delta: float
    nw_dn: complex
    nw_up: complex
    s_plus: complex
    s_minus: complex
    sw_minus_m: complex
    sw_minus_p: complex
    sw_plus_p: complex
    sw_plus_m: complex
    winding: int
    winding_residual: float
    momenta: np.ndarray  # (2, 2J+1) coefficient table
    cavity: CavityState
    mu: float
    residual: float = 0.0
    seed: int = 0
    converged: bool = True
    diverged: bool = False
    label: str | None = None
    stability_margin: float | None = None  # max Im(omega), if computed


def momentum_parity_weights(field: SpinorField) -> tuple[float, float]:
    c = field.coefficients()
    even = float(np.sum(np.abs(c[:, field.basis.modes % 2 == 0]) ** 2))
    odd = float(np.sum(np.abs(c[:, field.basis.modes % 2 != 0]) ** 2))
    return even, odd


def order_parameters(field: SpinorField, cavity: CavityState, mu: float,
                     eta: float = 0.0, delta: float = 0.0) -> PhasePoint:
    """Unlabelled phase point: moments, conjugate partners, winding and
    the plane-wave amplitude table."""
    m = atomic_moments(field)
    try:
        tex = spin_texture(field)
        w = winding_number(tex)
        winding, wres = w.value, w.residual
    except NodalSpinError:
        winding, wres = 0, 0.0
    return PhasePoint(
        eta=eta, delta=delta,
        nw_dn=m.nw_dn, nw_up=m.nw_up,
        s_plus=m.s_plus, s_minus=m.s_minus,
        sw_minus_m=m.sw_minus_m, sw_minus_p=m.sw_minus_p,
        sw_plus_p=m.sw_plus_p, sw_plus_m=m.sw_plus_m,
        winding=winding, winding_residual=wres,
        momenta=field.coefficients(), cavity=cavity, mu=mu)


def classify_phase(point: PhasePoint, tol_dw: float = DEFAULT_TOL_DW,
                   stability: bool | None = None) -> str:
    """Label a point.  A failed stability check wins; a non-converged
    solve is flagged; otherwise zero winding means DW-SW (the density
    modulation has no threshold there), and the density-wave moment
    separates PW-SS from DW-SS within the spiral states."""
    if stability is False or point.diverged:
        return "UNSTABLE"
    if not point.converged:
        return "UNCONVERGED"
    if point.winding == 0:
        return "DW-SW"
    if abs(point.nw_dn) + abs(point.nw_up) <= tol_dw:
        return "PW-SS"
    return "DW-SS"


# ----------------------------------------------------------------------
# Emergent spin-orbit dispersion
# ----------------------------------------------------------------------

def soc_dispersion(cavity: CavityState, p: ModelParams,
                   quasimomenta: np.ndarray):
    """Single-particle bands of the homogeneous (plane-wave) regime: the
    two-photon Raman channel between the pumped modes acts as an equal
    Rashba-Dresselhaus coupling,

        H(q) = [[(q - 1)^2 + s,  w], [w^*, (q + 1)^2 - s]],

    with s the differential light shift (U0_dn |a_+|^2 - U0_up |b_-|^2)/2
    and w = Om_0R a_+^* b_-.  Returns (lower, upper) band arrays and the
    quasimomenta of the lower-band minima.  Only meaningful while the
    unpumped amplitudes vanish; warns otherwise.
    """
    if max(abs(cavity.alpha_m), abs(cavity.beta_p)) > 1e-6:
        warnings.warn("soc_dispersion called with populated unpumped "
                      "modes; the two-band reduction is not valid there",
                      stacklevel=2)
    q = np.asarray(quasimomenta, dtype=float)
    s = 0.5 * (p.u0_dn * abs(cavity.alpha_p) ** 2
               - p.u0_up * abs(cavity.beta_m) ** 2)
    shift = 0.5 * (p.u0_dn * abs(cavity.alpha_p) ** 2
                   + p.u0_up * abs(cavity.beta_m) ** 2)
    w = complex(p.omega_r) * np.conj(cavity.alpha_p) * cavity.beta_m
    mean = 0.5 * ((q - 1.0) ** 2 + (q + 1.0) ** 2) + shift
    half = 0.5 * ((q - 1.0) ** 2 - (q + 1.0) ** 2) + s
    gap = np.sqrt(half ** 2 + abs(w) ** 2)
    lower, upper = mean - gap, mean + gap
    # interior local minima of the lower band (endpoints excluded)
    interior = (lower[1:-1] <= lower[:-2]) & (lower[1:-1] <= lower[2:])
    minima = q[1:-1][interior]
    if minima.size == 0:
        minima = np.array([q[int(np.argmin(lower))]])
    return lower, upper, minima


# ----------------------------------------------------------------------
# CSV schema (one row per sweep point)
# ----------------------------------------------------------------------

PHASE_COLUMNS = ("eta", "delta", "label", "winding", "abs_nw_dn",
                 "abs_nw_up", "abs_s_plus", "abs_sw_mm", "abs_sw_mp",
                 "abs_alpha_m", "abs_beta_p", "mu", "residual", "seed",
                 "converged")


def phase_row(point: PhasePoint) -> str:
    """Fixed-format CSV row; the float format is part of the
    determinism contract for sweep outputs."""
    f = lambda x: f"{x:.12e}"
    return ",".join([
        f(point.eta), f(point.delta), point.label or "",
        str(point.winding), f(abs(point.nw_dn)), f(abs(point.nw_up)),
        f(abs(point.s_plus)), f(abs(point.sw_minus_m)),
        f(abs(point.sw_minus_p)), f(abs(point.cavity.alpha_m)),
        f(abs(point.cavity.beta_p)), f(point.mu), f(point.residual),
        str(point.seed), "1" if point.converged else "0",
    ])


__all__ = ["LABELS", "DEFAULT_TOL_DW", "SpinTexture", "spin_texture",
           "WindingResult", "winding_number", "PhasePoint",
           "momentum_parity_weights", "order_parameters", "classify_phase",
           "soc_dispersion", "PHASE_COLUMNS", "phase_row"]
