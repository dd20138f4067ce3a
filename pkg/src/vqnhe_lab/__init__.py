"""Neural post-processing of variational quantum circuits: estimators, training and diagnostics."""

__version__ = "0.1.0"

from .pauli import Hamiltonian, PauliString, build_tfim, exact_expectation
from .simulator import Circuit, SampleSet, StateVector, run_circuit, sample
from .ansatz import AnsatzSpec, build_ansatz
from .measurement import Dataset, collect_samples, plan_measurement
from .neural import AdamState, NeuralNet, adam_step
from .estimators import (EnergyEstimate, dnp_empirical_energy, dnp_exact_energy, uvqnhe_empirical_energy,
                         uvqnhe_exact_energy, vqe_energy)
from .groundtruth import GroundTruth, ground_state
from .training import TrainingConfig, run_vqe, train_dnp, train_uvqnhe

__all__ = [
    "Hamiltonian", "PauliString", "build_tfim", "exact_expectation",
    "Circuit", "SampleSet", "StateVector", "run_circuit", "sample",
    "AnsatzSpec", "build_ansatz", "Dataset", "collect_samples", "plan_measurement",
    "AdamState", "NeuralNet", "adam_step",
    "EnergyEstimate", "dnp_empirical_energy", "dnp_exact_energy", "uvqnhe_empirical_energy",
    "uvqnhe_exact_energy", "vqe_energy", "GroundTruth", "ground_state",
    "TrainingConfig", "run_vqe", "train_dnp", "train_uvqnhe",
]
