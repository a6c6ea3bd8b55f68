"""Optimal phase-covariant cloning attacks on BB84 and trine-state QKD."""

__version__ = "0.1.0"

from .cloner import ClonerParams, OpticalModel, clone_fidelities, shrinking_factors
from .eavesdropper import JointDistribution, joint_distribution
from .protocols import BB84, R04, get_protocol
from .security import SecurityReport, analyze, optimize_attack, privacy_bound, security_map

__all__ = [
    "BB84",
    "R04",
    "ClonerParams",
    "JointDistribution",
    "OpticalModel",
    "SecurityReport",
    "analyze",
    "clone_fidelities",
    "get_protocol",
    "joint_distribution",
    "optimize_attack",
    "privacy_bound",
    "security_map",
    "shrinking_factors",
]
