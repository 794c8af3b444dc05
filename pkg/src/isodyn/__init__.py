"""Halfspaces, stars at infinity and isometry dynamics on concrete metric models."""
from __future__ import annotations

__version__ = "0.1.0"

from .core import (
    Classification,
    DomainError,
    HalfspaceSpec,
    OrbitRecord,
    PreconditionError,
    detect_special_indices,
    generate_orbit,
    gromov_product,
    halfspace_contains,
    semicontraction_check,
)

__all__ = [
    "Classification",
    "DomainError",
    "HalfspaceSpec",
    "OrbitRecord",
    "PreconditionError",
    "__version__",
    "detect_special_indices",
    "generate_orbit",
    "gromov_product",
    "halfspace_contains",
    "semicontraction_check",
]
