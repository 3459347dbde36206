"""Simulation and analysis tools for a vanadyl electronuclear spin qudit (S = 1/2, I = 7/2)."""

from .hamiltonian import FieldPoint, FrameGeometry, SpinSystemParams, build_hamiltonian
from .qudit import QuditSettings, rabi_matrix, universality_report, universality_scan

__version__ = "0.1.0"

__all__ = [
    "FieldPoint",
    "FrameGeometry",
    "QuditSettings",
    "SpinSystemParams",
    "build_hamiltonian",
    "rabi_matrix",
    "universality_report",
    "universality_scan",
]
