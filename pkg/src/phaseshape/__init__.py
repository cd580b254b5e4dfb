"""Phase-shaped pulse scattering off a two-level emitter in a
semi-infinite transmission line: waveforms, Bloch dynamics, input-output
reconstruction, interaction efficiency, calibration fits and sweeps."""

from .core import (
    BLOCH_TOL,
    BlochState,
    ConfigError,
    FitError,
    GROUND,
    LineParams,
    NumericsError,
    PhaseshapeError,
    QubitParams,
    coupling_k,
    excited_population,
)
from .pulses import (
    PulseSpec,
    TimeGrid,
    build_grid,
    envelope,
    input_energy_closed_form,
    phase_profile,
    rabi_frequency,
    wrap_phase,
)
from .dynamics import DriveContext, Trajectory, bloch_rhs, integrate, steady_state
from .scattering import (
    ScatterResult,
    analytic_efficiency,
    demod_filter,
    efficiency,
    energy_windows,
    offres_reference,
    output_voltage,
    photon_number,
    power_loss_fraction,
    reflection_ss,
    scatter_run,
)
from .calibration import (
    ChainParams,
    CircleFitResult,
    SpectroscopyTrace,
    chain_from_db,
    circle_fit,
    derive_chain,
    power_sweep_fit,
    remove_background,
    synth_spectroscopy,
)
from .sweeps import (
    DutyBalance,
    DutyOptimum,
    SweepResult,
    TraceGrid,
    duty_area_balance,
    optimize_duty,
    sweep_fm,
    sweep_n,
    sweep_theta,
    trace_grid,
)

__version__ = "0.1.0"

__all__ = [
    "BLOCH_TOL",
    "BlochState",
    "ChainParams",
    "CircleFitResult",
    "ConfigError",
    "DriveContext",
    "DutyBalance",
    "DutyOptimum",
    "FitError",
    "GROUND",
    "LineParams",
    "NumericsError",
    "PhaseshapeError",
    "PulseSpec",
    "QubitParams",
    "ScatterResult",
    "SpectroscopyTrace",
    "SweepResult",
    "TimeGrid",
    "TraceGrid",
    "Trajectory",
    "analytic_efficiency",
    "bloch_rhs",
    "build_grid",
    "chain_from_db",
    "circle_fit",
    "coupling_k",
    "demod_filter",
    "derive_chain",
    "duty_area_balance",
    "efficiency",
    "energy_windows",
    "envelope",
    "excited_population",
    "input_energy_closed_form",
    "integrate",
    "offres_reference",
    "optimize_duty",
    "output_voltage",
    "phase_profile",
    "photon_number",
    "power_loss_fraction",
    "rabi_frequency",
    "reflection_ss",
    "remove_background",
    "scatter_run",
    "steady_state",
    "sweep_fm",
    "sweep_n",
    "sweep_theta",
    "synth_spectroscopy",
    "trace_grid",
    "wrap_phase",
]
