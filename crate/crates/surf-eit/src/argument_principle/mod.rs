//! Reconstruction of embedded images from boundary traces.

pub mod cover;
pub mod gap;
pub mod induced;
pub mod spec;
pub mod surface;

pub use gap::{gap_derivative, gap_point, winding_number, Projection, TAYLOR_ORDER};
pub use spec::{mobius_position, EmbeddingSpec, SpecProvenance, TOL_SYM};
pub use cover::{build_cylinder_cover, candidate_directions, Cover, CoverConfig, Cylinder, CylinderKind, LatticePoint};
pub use surface::{reconstruct_near_boundary, reconstruct_surface, Location, Overlap, ReconstructConfig, ReconstructedSurface, SurfacePoint};
pub use induced::{induced_embedding, spec_from_real_parts, InducedEmbedding};
