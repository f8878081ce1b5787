//! Surfaces, meshes and their Dirichlet-to-Neumann maps.

pub mod analytic;
pub mod fem;
pub mod mesh;
pub mod meshgen;
pub mod perturb;

pub use analytic::{dn_annulus, dn_annulus_on, dn_disk, dn_mobius, mobius_interior_solution, AnnulusBoundary};
pub use fem::{dn_fem, dn_fem_with_report, mesh_error_estimate, FemReport, DEFAULT_FEM_KMAX};
pub use mesh::{boundary_triangles, double_cover, BoundaryLoop, CoverData, Family, SurfaceMesh};
pub use meshgen::build_mesh;
pub use perturb::{bump, perturb_metric, profile_value, PerturbationMode, PerturbationSpec, Profile};
