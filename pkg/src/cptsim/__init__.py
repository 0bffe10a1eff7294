"""Simulation and analysis of coherent population trapping in a four-level
superconducting artificial atom driven by a two-tone microwave field."""

__version__ = "0.1.0"

from .model import (DecoherenceParams, DensityMatrix4, DeviceParams,
                    DriveParams, INFINITE, MeasurementModel, dark_state,
                    delta, ghz_to_rad_per_ns, intermediate_leakage,
                    rabi_mhz, rad_per_ns_to_ghz, rate_to_cyclic_mhz,
                    two_photon_amplitude)
from .hamiltonian import (BeatTerm, RotatingFrameHamiltonian,
                          build_hamiltonian, evaluate_at)
from .evolution import (IntegratorConfig, PositivityError, Trajectory,
                        master_equation_rhs, phase_averaged_populations,
                        propagate)
from .sweep import (Series, SweepAxis, SweepResult, SweepSpec, cut,
                    run_sweep, to_csv, to_json)
from .analysis import (FitReport, LorentzianFit, SimContext,
                       apply_measurement, at_only_contrast, fit_dephasing,
                       invert_measurement, linewidth_fit, parabolic_contrast,
                       sensitivity_curve)

__all__ = [
    "DecoherenceParams", "DensityMatrix4", "DeviceParams", "DriveParams",
    "INFINITE", "MeasurementModel", "dark_state", "delta",
    "ghz_to_rad_per_ns", "intermediate_leakage", "rabi_mhz",
    "rad_per_ns_to_ghz", "rate_to_cyclic_mhz", "two_photon_amplitude",
    "BeatTerm", "RotatingFrameHamiltonian", "build_hamiltonian",
    "evaluate_at",
    "IntegratorConfig", "PositivityError", "Trajectory",
    "master_equation_rhs", "phase_averaged_populations", "propagate",
    "Series", "SweepAxis", "SweepResult", "SweepSpec", "cut", "run_sweep",
    "to_csv", "to_json",
    "FitReport", "LorentzianFit", "SimContext", "apply_measurement",
    "at_only_contrast", "fit_dephasing", "invert_measurement",
    "linewidth_fit", "parabolic_contrast", "sensitivity_curve",
]
