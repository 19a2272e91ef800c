"""Criticality-enhanced quantum sensing in the driven Jaynes-Cummings model.

Library layout:
  core         dense operators on truncated qubit(-qutrit) x Fock spaces
  analytics    closed-form metrology results (ramp, populations, Fisher)
  lindblad     time-dependent master-equation integration
  protocols    scenario drivers (quenches, scans, budgets, timing robustness)
  readout      photon-number tomography and drive-strength calibration
  calibration  crosstalk correction and single-qubit gate infidelity
  config, cli  structured run configs and the sweep-driving command line
"""

from .analytics import (
    OPTIMAL_DETUNINGS,
    REFERENCE_PARAMS,
    RampSchedule,
    SystemParams,
    dark_state_pe,
    dark_state_vector,
    fisher_classical,
    fisher_of_time,
    fisher_quantum_fd,
    gap_min,
    quasi_energies,
    ramp_epsilon,
    ramp_time,
    snr,
)
from .core import HilbertSpace, OperatorSet, build_operators
from .lindblad import HamiltonianModel, Trajectory, convergence_check, integrate

__all__ = [
    "OPTIMAL_DETUNINGS",
    "REFERENCE_PARAMS",
    "RampSchedule",
    "SystemParams",
    "HilbertSpace",
    "OperatorSet",
    "HamiltonianModel",
    "Trajectory",
    "build_operators",
    "convergence_check",
    "dark_state_pe",
    "dark_state_vector",
    "fisher_classical",
    "fisher_of_time",
    "fisher_quantum_fd",
    "gap_min",
    "integrate",
    "quasi_energies",
    "ramp_epsilon",
    "ramp_time",
    "snr",
]

__version__ = "0.1.0"
