//! Surface electrical impedance tomography from boundary data.
//!
//! The crate turns Dirichlet-to-Neumann maps of (possibly non-orientable)
//! surfaces into boundary traces of symmetric holomorphic functions,
//! reconstructs embedded images of the orientable double cover with the
//! generalized argument principle, and measures how far two such images are
//! from being conformally equivalent.
//!
//! Modules follow the pipeline order:
//!
//! * [`boundary_calculus`]: spectral calculus on the boundary circles.
//! * [`forward_models`]: analytic and finite-element DN maps, meshes, covers.
//! * [`trace_equations`]: the boundary operator algebra and null sets.
//! * [`argument_principle`]: reconstruction of embedded images.
//! * [`correspondence`]: near-isometric maps, dilatation, distances.
//! * [`experiments`]: configuration-driven runs behind the CLI.

pub mod argument_principle;
pub mod boundary_calculus;
pub mod correspondence;
pub mod error;
pub mod experiments;
pub mod forward_models;
pub mod par;
pub mod trace_equations;

pub use error::{Result, SurfError};
