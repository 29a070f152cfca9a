"""ionsel: selective atom-motion interactions in trapped ions.

Library plus CLI for building doublet-selective Hamiltonians, evolving
states, and running the heralded protocols they enable (Fock-state
generation, ground-state cooling, direct number-population measurement,
Wigner reconstruction, and a mode-mediated controlled-phase gate), with
the effective two-level picture checked against the underlying
three-level Raman model.
"""

from .core import (
    InternalSpace,
    MixedState,
    ModeSpace,
    Operator,
    PureState,
    SpaceDescriptor,
    atomic_transition,
    basis_state,
    coherent_state,
    displacement,
    fidelity,
    fock_populations,
    fock_state,
    measure_internal,
    mode_ladder,
    mode_marginal,
    space,
    tensor,
    thermal_state,
)
from .design import DesignConstraints, FeasibilityReport, feasibility, leakage_bound, search
from .errors import (
    ConfigError,
    DimensionMismatch,
    Infeasible,
    IonselError,
    StepFailure,
    TruncationError,
    ZeroProbability,
)
from .evolution import (
    PiTimes,
    PulseSpec,
    Trace,
    pi_time,
    propagate_const,
    propagate_timedep,
    propagator,
    rabi_scan,
)
from .hamiltonians import (
    AJC,
    JC,
    RamanParams,
    Selector,
    ThreeLevelModel,
    ajc_hamiltonian,
    bare_detuning,
    effective_hamiltonian,
    jc_hamiltonian,
    omega_eff,
    residual_detuning,
    selective_hamiltonian,
    selectivity,
    three_level_hamiltonian,
    three_level_mode_space,
    two_ion_mode_space,
    two_ion_selective,
    two_level_mode_space,
)
from .protocols import (
    MeasurementRecord,
    PopulationEstimate,
    ProtocolResult,
    WignerGrid,
    cpg,
    cpg_process_fidelity,
    generate_fock,
    measure_population,
    refine_population,
    selective_cool,
    wigner,
)

__version__ = "0.1.0"
