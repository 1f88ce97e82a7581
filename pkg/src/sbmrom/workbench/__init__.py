"""Metrics, persistence, studies and plotting."""

from .io import export_csv, export_vtk, load_matrix, save_matrix
from .metrics import frobenius_norm_active, projection_error, spacetime_error
from .study import ErrorReport, StudyConfig, load_preset, run_study

__all__ = [
    "ErrorReport",
    "StudyConfig",
    "export_csv",
    "export_vtk",
    "frobenius_norm_active",
    "load_matrix",
    "load_preset",
    "projection_error",
    "run_study",
    "save_matrix",
    "spacetime_error",
]
