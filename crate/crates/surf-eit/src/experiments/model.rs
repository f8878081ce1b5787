//! Surface models behind a configuration: the DN map, the mesh it came
//! from and the positions of the boundary nodes in a uniformizing chart.

use num_complex::Complex64;

use super::config::{ExperimentConfig, ModelKind};
use crate::argument_principle::{spec_from_real_parts, EmbeddingSpec};
use crate::boundary_calculus::{BoundaryFunction, DNMatrix};
use crate::error::{Result, SurfError};
use crate::forward_models::{build_mesh, dn_annulus, dn_disk, dn_fem, dn_mobius, mesh_error_estimate, AnnulusBoundary, Family, SurfaceMesh};

type C64 = Complex64;

pub struct Model {
    pub family: Family,
    pub lambda: DNMatrix,
    pub mesh: Option<SurfaceMesh>,
    pub orientable: bool,
    pub kmax: usize,
    /// Uniformizing coordinate z of every node of Γ.
    pub positions: Vec<C64>,
    pub mesh_error: Option<f64>,
}

impl Model {
    pub fn build(cfg: &ExperimentConfig) -> Result<Model> {
        let family = cfg.surface.family()?;
        let kmax = cfg.surface.kmax;
        match cfg.surface.model {
            ModelKind::Fem => {
                let mesh = build_mesh(&family, cfg.surface.h)?;
                let lambda = dn_fem(&mesh, kmax)?;
                Ok(Self::from_mesh(mesh, lambda, kmax))
            }
            ModelKind::Analytic => {
                let n = cfg.surface.nodes;
                let (lambda, orientable) = match family {
                    Family::Disk => (dn_disk(n)?, true),
                    Family::Annulus { rho } => (dn_annulus(rho, n, AnnulusBoundary::Both)?, true),
                    Family::Mobius { r } => (dn_mobius(r, n)?, false),
                    _ => return Err(SurfError::Config(format!("no analytic model for `{}`", family.name()))),
                };
                let positions = (0..lambda.grid.node_count())
                    .map(|i| {
                        let (c, j) = lambda.grid.locate(i);
                        let s = lambda.grid.s(c, j);
                        match family {
                            Family::Mobius { r } => C64::from_polar(r, s / r),
                            Family::Annulus { rho } if c == 1 => C64::from_polar(rho, s / rho),
                            _ => C64::from_polar(1.0, s),
                        }
                    })
                    .collect();
                Ok(Model { family, lambda, mesh: None, orientable, kmax, positions, mesh_error: None })
            }
        }
    }

    /// Wraps a mesh and its DN map. Chart points map to z = x + iy on planar
    /// meshes and to z = e^{x+iy} on the Möbius cylinder.
    pub fn from_mesh(mesh: SurfaceMesh, lambda: DNMatrix, kmax: usize) -> Model {
        let cylinder = matches!(mesh.family, Family::Mobius { .. } | Family::MobiusWithHole { .. });
        let positions = mesh
            .boundary
            .iter()
            .flat_map(|l| l.vertices.iter())
            .map(|&v| {
                let [x, y] = mesh.vertices[v];
                if cylinder {
                    C64::new(x, y).exp()
                } else {
                    C64::new(x, y)
                }
            })
            .collect();
        let mesh_error = Some(mesh_error_estimate(&mesh, kmax));
        Model { family: mesh.family.clone(), orientable: mesh.orientable, lambda, mesh: Some(mesh), kmax, positions, mesh_error }
    }

    /// Canonical holomorphic coordinates: w = z on planar families, and
    /// w₁ = z − 1/z, w₂ = i(z + 1/z) on Möbius families.
    pub fn canonical_maps(&self) -> Result<Vec<fn(C64) -> C64>> {
        match self.family {
            Family::Disk | Family::Annulus { .. } => Ok(vec![|z| z]),
            Family::Mobius { .. } | Family::MobiusWithHole { .. } => Ok(vec![|z| z - 1.0 / z, |z| C64::i() * (z + 1.0 / z)]),
            Family::TorusWithHole { .. } => Err(SurfError::Config("no canonical embedding for `torus-with-hole`".into())),
        }
    }

    /// Boundary values Re w_k on Γ of the canonical coordinates.
    pub fn real_parts(&self) -> Result<Vec<BoundaryFunction<f64>>> {
        self.canonical_maps()?
            .into_iter()
            .map(|w| BoundaryFunction::new(self.lambda.grid.clone(), self.positions.iter().map(|&z| w(z).re).collect()))
            .collect()
    }

    /// Embedding traces computed from Λ alone.
    pub fn embedding(&self, tol_null: f64) -> Result<EmbeddingSpec> {
        spec_from_real_parts(&self.lambda, &self.real_parts()?, self.orientable, tol_null)
    }

    pub fn mesh(&self) -> Result<&SurfaceMesh> {
        self.mesh.as_ref().ok_or_else(|| SurfError::Config("this run needs `surface.model = \"fem\"`".into()))
    }
}
