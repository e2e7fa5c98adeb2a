"""Two dephasing emitters coupled through a 1D waveguide: master-equation
engine, spectra, photon correlations and Green's-function couplings.

Units throughout: hbar = 1, rates in units of the single-emitter decay rate
Gamma_0, times in 1/Gamma_0.
"""

from wgqed.dicke_core import (
    CouplingParams,
    DensityMatrix,
    DriveParams,
    EmitterParams,
    Liouvillian,
    build_atomic_operators,
    build_hamiltonian,
    build_lindblad_dissipator,
    build_liouvillian,
    dicke_transform,
)
from wgqed.system import EmitterPairConfig, pair_config, single_emitter_config
from wgqed.dynamics import evolve, regression_correlator, steady_state
from wgqed.observables import (
    dicke_populations,
    extract_subradiant_feature,
    fit_risetime,
    g2,
    spectrum,
)
from wgqed.waveguide_green import (
    Waveguide1D,
    coupling_from_green,
    coupling_map,
    generate_synthetic_1d_field,
    green_1d,
    ingest_field_map,
)

__version__ = "0.1.0"

__all__ = [
    "CouplingParams",
    "DensityMatrix",
    "DriveParams",
    "EmitterPairConfig",
    "EmitterParams",
    "Liouvillian",
    "Waveguide1D",
    "build_atomic_operators",
    "build_hamiltonian",
    "build_lindblad_dissipator",
    "build_liouvillian",
    "coupling_from_green",
    "coupling_map",
    "dicke_populations",
    "dicke_transform",
    "evolve",
    "extract_subradiant_feature",
    "fit_risetime",
    "g2",
    "generate_synthetic_1d_field",
    "green_1d",
    "ingest_field_map",
    "pair_config",
    "regression_correlator",
    "single_emitter_config",
    "spectrum",
    "steady_state",
]
