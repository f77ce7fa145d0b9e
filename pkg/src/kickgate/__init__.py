"""Design and verification of fast kicked two-qubit phase gates on trapped ions."""

from .model import (KickEvent, ModeParams, PulseSequence, TrapParams, antisymmetrize,
                    derive_modes, merge_simultaneous)
from .fockspace import FockConfig, GateUnitary, TruncationError
from .analytic import (PhaseSpacePoint, ResidualReport, anharmonicity_error_estimate,
                       gate_phase, ideal_gate_unitary, mode_phases, propagate_coherent,
                       residual_report, residuals, thermal_misalignment_error, trajectory)
from .design import (DesignError, DesignResult, design_general, scan_scaling, solve_protocol1,
                     solve_protocol2)
from .fock import (active_phase, gate_error, simulate_anharmonic, simulate_finite_pulses,
                   simulate_instantaneous, thermal_average_error)
from .noise import FitResult, Scenario, SweepSpec, fit_power_law, misalignment_sweep, run_sweep

__version__ = "0.1.0"

__all__ = [
    "KickEvent",
    "ModeParams",
    "PulseSequence",
    "TrapParams",
    "antisymmetrize",
    "derive_modes",
    "merge_simultaneous",
    "FockConfig",
    "GateUnitary",
    "TruncationError",
    "PhaseSpacePoint",
    "ResidualReport",
    "anharmonicity_error_estimate",
    "gate_phase",
    "ideal_gate_unitary",
    "mode_phases",
    "propagate_coherent",
    "residual_report",
    "residuals",
    "thermal_misalignment_error",
    "trajectory",
    "DesignError",
    "DesignResult",
    "design_general",
    "scan_scaling",
    "solve_protocol1",
    "solve_protocol2",
    "active_phase",
    "gate_error",
    "simulate_anharmonic",
    "simulate_finite_pulses",
    "simulate_instantaneous",
    "thermal_average_error",
    "FitResult",
    "Scenario",
    "SweepSpec",
    "fit_power_law",
    "misalignment_sweep",
    "run_sweep",
]
