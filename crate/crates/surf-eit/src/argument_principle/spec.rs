//! Boundary traces of a holomorphic embedding and their linear projections.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundary_calculus::{BoundaryFunction, BoundaryGrid, ComplexBoundaryFunction};
use crate::error::{Result, SurfError};

type C64 = Complex64;
type Cbf = ComplexBoundaryFunction;

/// Accepted violation of η∘τ = conj η, relative to max |η|.
pub const TOL_SYM: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecProvenance {
    Analytic,
    /// Built from traces computed off a DN map.
    Computed,
    /// Induced on a second surface by transferring traces.
    Transferred,
}

/// Traces η₁..η_n of an embedding w = (w₁, …, w_n) on Υ (or on Γ when the
/// surface is orientable).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub traces: Vec<Cbf>,
    pub symmetric: bool,
    pub provenance: SpecProvenance,
}

impl EmbeddingSpec {
    pub fn new(traces: Vec<Cbf>, symmetric: bool, provenance: SpecProvenance) -> Result<Self> {
        let Some(first) = traces.first() else {
            return Err(SurfError::DegenerateParameters("embedding with no coordinates".into()));
        };
        for t in &traces[1..] {
            t.same_grid(&first.grid)?;
        }
        if symmetric && !first.grid.doubled {
            return Err(SurfError::GridMismatch("symmetric embedding needs a doubled grid".into()));
        }
        let spec = EmbeddingSpec { traces, symmetric, provenance };
        if symmetric {
            let d = spec.symmetry_defect();
            if d > TOL_SYM * (1.0 + spec.scale()) {
                return Err(SurfError::EquivarianceBroken(d));
            }
        }
        Ok(spec)
    }

    /// Traces of explicit holomorphic maps at given boundary positions.
    pub fn from_maps(
        grid: Arc<BoundaryGrid>,
        position: impl Fn(usize, f64) -> C64,
        maps: &[&dyn Fn(C64) -> C64],
        symmetric: bool,
    ) -> Result<Self> {
        let z = BoundaryFunction::from_fn(grid, position);
        let traces = maps.iter().map(|w| z.map(|p| w(p))).collect();
        Self::new(traces, symmetric, SpecProvenance::Analytic)
    }

    /// Unit disk with w(z) = z.
    pub fn disk_identity(nodes: usize) -> Result<Self> {
        let grid = Arc::new(BoundaryGrid::unit_circle(nodes)?);
        Self::from_maps(grid, |_, s| C64::from_polar(1.0, s), &[&|z| z], false)
    }

    /// Annulus ρ ≤ |z| ≤ 1 with w(z) = z, both circles in Γ.
    pub fn annulus_identity(rho: f64, nodes: usize) -> Result<Self> {
        let mut grid = BoundaryGrid::new(&[(2.0 * PI, nodes), (2.0 * PI * rho, nodes)])?;
        grid.loops[1].orientation = -1.0;
        Self::from_maps(Arc::new(grid), move |c, s| if c == 0 { C64::from_polar(1.0, s) } else { C64::from_polar(rho, s / rho) }, &[&|z| z], false)
    }

    /// Möbius band {1/R ≤ |z| ≤ R}/(z ∼ −1/z̄) with w₁ = z − 1/z, w₂ = i(z + 1/z).
    pub fn mobius_cover(r: f64, nodes: usize) -> Result<Self> {
        if !(r > 1.0) {
            return Err(SurfError::DegenerateParameters(format!("Möbius radius R = {r} must exceed 1")));
        }
        let grid = Arc::new(BoundaryGrid::circle(2.0 * PI * r, nodes)?.doubled());
        Self::from_maps(grid, move |c, s| mobius_position(r, c, s), &[&|z| z - 1.0 / z, &|z| C64::i() * (z + 1.0 / z)], true)
    }

    pub fn n(&self) -> usize {
        self.traces.len()
    }

    pub fn grid(&self) -> &Arc<BoundaryGrid> {
        &self.traces[0].grid
    }

    pub fn scale(&self) -> f64 {
        self.traces.iter().map(|t| t.sup_norm()).fold(0.0, f64::max)
    }

    /// max_k max_i |η_k(τ i) − conj η_k(i)| (0 on single-sheet grids).
    pub fn symmetry_defect(&self) -> f64 {
        let Some(pair) = self.grid().pairing() else { return 0.0 };
        self.traces
            .iter()
            .flat_map(|t| pair.iter().enumerate().map(move |(i, &j)| (t.values[j] - t.values[i].conj()).norm()))
            .fold(0.0, f64::max)
    }

    /// Every trace resampled to `nodes` points per loop.
    pub fn resampled(&self, nodes: usize) -> Result<Self> {
        if self.grid().loops.iter().all(|l| l.nodes == nodes) {
            return Ok(self.clone());
        }
        let traces = self.traces.iter().map(|t| t.resample(nodes)).collect::<Result<Vec<_>>>()?;
        // Resampling creates one new grid per trace; share the first.
        let grid = traces[0].grid.clone();
        let traces = traces.into_iter().map(|t| BoundaryFunction { grid: grid.clone(), values: t.values }).collect();
        Ok(EmbeddingSpec { traces, ..self.clone() })
    }

    /// Bilinear projection η_ξ̂ = Σ ξ̂_k η_k.
    pub fn project(&self, direction: &[C64]) -> Result<Cbf> {
        if direction.len() != self.n() {
            return Err(SurfError::DegenerateParameters(format!("direction of length {} for n = {}", direction.len(), self.n())));
        }
        let mut mu = BoundaryFunction::zeros(self.grid().clone());
        for (t, &a) in self.traces.iter().zip(direction) {
            for (m, v) in mu.values.iter_mut().zip(&t.values) {
                *m += a * v;
            }
        }
        Ok(mu)
    }

    /// Boundary point ℰ at a global node.
    pub fn point(&self, node: usize) -> Vec<C64> {
        self.traces.iter().map(|t| t.values[node]).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Position on the annulus model of the Möbius cover: Γ₊ is |z| = R, and
/// node i of Γ₋ is the involution image −1/z̄ of node i of Γ₊.
pub fn mobius_position(r: f64, c: usize, s: f64) -> C64 {
    let y = s / r;
    if c == 0 {
        C64::from_polar(r, y)
    } else {
        C64::from_polar(1.0 / r, y + PI)
    }
}
