"""Mean-field simulator for a pseudospin-1/2 condensate coupled to the
four running-wave modes of a lossy ring cavity: self-consistent steady
states, phase classification (density waves, spin waves and topological
spin spirals), collective-excitation spectra, real-time dynamics, and
deterministic phase-diagram sweeps.
"""

from ._version import __version__
from .model import (ModelParams, PlaneWaveBasis, SpinorField, CavityState,
                    SteadyState, make_symmetric_params, screw_transform,
                    transform)
from .cavity import (AtomicMoments, FieldProfiles, atomic_moments,
                     build_cavity_matrix, cavity_steady_state,
                     field_profiles)
from .meanfield import (SolverConfig, apply_atomic_hamiltonian,
                        chemical_potential, imaginary_time_step,
                        solve_steady_state)
from .observables import (PhasePoint, SpinTexture, classify_phase,
                          order_parameters, soc_dispersion, spin_texture,
                          winding_number)
from .bogoliubov import (ExcitationSpectrum, build_bogoliubov_matrix,
                         excitation_spectrum, stability_check)
from .dynamics import (LambdaParams, Trajectory, adiabatic_residual,
                       propagate_effective, propagate_lambda)
from .sweep import SweepSpec, detect_boundaries, resume_sweep, run_sweep

__all__ = [
    "__version__",
    "ModelParams", "PlaneWaveBasis", "SpinorField", "CavityState",
    "SteadyState", "make_symmetric_params", "screw_transform", "transform",
    "AtomicMoments", "FieldProfiles", "atomic_moments",
    "build_cavity_matrix", "cavity_steady_state", "field_profiles",
    "SolverConfig", "apply_atomic_hamiltonian", "chemical_potential",
    "imaginary_time_step", "solve_steady_state",
    "PhasePoint", "SpinTexture", "classify_phase", "order_parameters",
    "soc_dispersion", "spin_texture", "winding_number",
    "ExcitationSpectrum", "build_bogoliubov_matrix", "excitation_spectrum",
    "stability_check",
    "LambdaParams", "Trajectory", "adiabatic_residual",
    "propagate_effective", "propagate_lambda",
    "SweepSpec", "detect_boundaries", "resume_sweep", "run_sweep",
]
