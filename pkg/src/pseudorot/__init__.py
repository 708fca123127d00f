"""Numerical finite-energy foliations and pseudo-rotations of the disk."""

from .circle import CircleLift, canonical_boundary_lift, convergents, golden_mean, rotation_number, translation_number
from .config import ExperimentConfig, SolverConfig
from .diskmap import PolarGrid, SampledDiskMap, area_defect, c0_distance
from .errors import ContractViolation, PartialFailure, PseudorotError
from .floer import FloerProblem, LeafSolution, continue_leaf, model_leaf, solve_leaf
from .foliation import build_foliation, extract_conjugacy, induced_disk_map, verify_periodicity
from .hamiltonian import (ConstantHamiltonian, MappingTorus, PerturbedRotation, RotationHamiltonian,
                          hamiltonian_from_config, time_one_map)

__version__ = "0.1.0"

__all__ = [
    "CircleLift", "canonical_boundary_lift", "convergents", "golden_mean", "rotation_number",
    "translation_number", "ExperimentConfig", "SolverConfig", "PolarGrid", "SampledDiskMap", "area_defect",
    "c0_distance", "ContractViolation", "PartialFailure", "PseudorotError", "FloerProblem", "LeafSolution",
    "continue_leaf", "model_leaf", "solve_leaf", "build_foliation", "extract_conjugacy", "induced_disk_map",
    "verify_periodicity", "ConstantHamiltonian", "MappingTorus", "PerturbedRotation", "RotationHamiltonian",
    "hamiltonian_from_config", "time_one_map",
]
