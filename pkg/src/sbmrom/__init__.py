"""Shifted-boundary finite elements and POD-Galerkin reduced models for the
shallow water equations with a moving embedded cylinder."""

from .embedded import CircleGeometry, SurrogateDomain, classify, closest_point
from .fom import FomConfig, FomOperator, Trajectory, run_fom
from .ghost_interp import GhostFiller, fill_ghost
from .mesh import TriMesh, generate_channel_mesh, load_mesh, save_mesh
from .pod import PodBasis, SnapshotMatrix, compute_modes, select_modes
from .rom import RomOperator, build_rom, run_rom
from .swe_core import PhysicsParams

__version__ = "0.1.0"

__all__ = [
    "CircleGeometry",
    "FomConfig",
    "FomOperator",
    "GhostFiller",
    "PhysicsParams",
    "PodBasis",
    "RomOperator",
    "SnapshotMatrix",
    "SurrogateDomain",
    "Trajectory",
    "TriMesh",
    "build_rom",
    "classify",
    "closest_point",
    "compute_modes",
    "fill_ghost",
    "generate_channel_mesh",
    "load_mesh",
    "run_fom",
    "run_rom",
    "save_mesh",
    "select_modes",
]
