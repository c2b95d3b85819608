//! Fixtures shared by the benchmarks.

use sinai_core::geometry::{build_surface, BoundaryCondition, SurfaceDraft, SurfaceSpec};

/// Unit torus minus a centred disk of radius 0.2.
pub fn reference_torus(bc: BoundaryCondition) -> SurfaceSpec {
    build_surface(&SurfaceDraft::torus(1.0, 1.0, bc).with_obstacle(0.5, 0.5, 0.2)).expect("valid table")
}
