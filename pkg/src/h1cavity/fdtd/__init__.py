"""Three-dimensional FDTD solver with split-field PML."""

from h1cavity.fdtd.solver import (
    COURANT_SAFETY,
    DipoleSource,
    PmlSpec,
    YeeState,
    add_source,
    check_finite,
    component_positions,
    new_state,
    sample,
    step,
    trilinear_stencil,
)

__all__ = [
    "COURANT_SAFETY",
    "DipoleSource",
    "PmlSpec",
    "YeeState",
    "add_source",
    "check_finite",
    "component_positions",
    "new_state",
    "sample",
    "step",
    "trilinear_stencil",
]
