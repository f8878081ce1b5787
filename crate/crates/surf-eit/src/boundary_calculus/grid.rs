//! Periodic arc-length grids on the boundary circles.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurfError};

/// One closed boundary loop sampled at `nodes` equispaced arc-length points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Loop {
    pub length: f64,
    pub nodes: usize,
    /// Sign relating ∂_γ to d/ds along the stored parameter.
    pub orientation: f64,
    /// Component sign σ (+1 on Γ₊, −1 on Γ₋).
    pub sigma: f64,
}

/// A boundary Γ, or the doubled boundary Υ = Γ₊ ∪ Γ₋ when `doubled` is set.
///
/// On a doubled grid the first half of the loops is Γ₊ and the second half
/// is Γ₋ in the same order; node `i` of loop `c + b` is the involution image
/// of node `i` of loop `c`, so both carry the same parameter `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub loops: Vec<Loop>,
    pub doubled: bool,
}

impl BoundaryGrid {
    /// Single-sheet boundary made of loops `(length, nodes)`.
    pub fn new(loops: &[(f64, usize)]) -> Result<Self> {
        let loops = loops
            .iter()
            .map(|&(length, nodes)| Loop { length, nodes, orientation: 1.0, sigma: 1.0 })
            .collect();
        let g = BoundaryGrid { loops, doubled: false };
        g.validate()?;
        Ok(g)
    }

    pub fn circle(length: f64, nodes: usize) -> Result<Self> {
        Self::new(&[(length, nodes)])
    }

    pub fn unit_circle(nodes: usize) -> Result<Self> {
        Self::circle(2.0 * std::f64::consts::PI, nodes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.loops.is_empty() {
            return Err(SurfError::InvalidGrid("no boundary loops".into()));
        }
        for (c, l) in self.loops.iter().enumerate() {
            if l.nodes < 16 || l.nodes % 2 != 0 {
                return Err(SurfError::InvalidGrid(format!(
                    "loop {c}: node count {} must be even and at least 16",
                    l.nodes
                )));
            }
            if !(l.length > 0.0) || !l.length.is_finite() {
                return Err(SurfError::InvalidGrid(format!("loop {c}: length {}", l.length)));
            }
        }
        if self.doubled {
            let b = self.loops.len() / 2;
            if self.loops.len() % 2 != 0 {
                return Err(SurfError::InvalidGrid("doubled grid needs paired loops".into()));
            }
            for c in 0..b {
                let (p, m) = (&self.loops[c], &self.loops[c + b]);
                if p.nodes != m.nodes || p.length != m.length || p.sigma != -m.sigma {
                    return Err(SurfError::InvalidGrid(format!("loop pair {c} mismatched")));
                }
            }
        }
        Ok(())
    }

    /// Υ built from a single-sheet grid: Γ₋ copies Γ₊ with reversed ∂_γ and σ = −1.
    pub fn doubled(&self) -> Self {
        assert!(!self.doubled, "grid already doubled");
        let mut loops = self.loops.clone();
        for l in &self.loops {
            loops.push(Loop { orientation: -l.orientation, sigma: -1.0, ..l.clone() });
        }
        BoundaryGrid { loops, doubled: true }
    }

    /// Γ underlying a doubled grid (identity on single-sheet grids).
    pub fn base(&self) -> Self {
        if !self.doubled {
            return self.clone();
        }
        let b = self.loops.len() / 2;
        BoundaryGrid { loops: self.loops[..b].to_vec(), doubled: false }
    }

    pub fn component_count(&self) -> usize {
        self.loops.len()
    }

    /// Number of components of Γ (half the loops on a doubled grid).
    pub fn base_component_count(&self) -> usize {
        if self.doubled {
            self.loops.len() / 2
        } else {
            self.loops.len()
        }
    }

    pub fn node_count(&self) -> usize {
        self.loops.iter().map(|l| l.nodes).sum()
    }

    pub fn offset(&self, c: usize) -> usize {
        self.loops[..c].iter().map(|l| l.nodes).sum()
    }

    pub fn range(&self, c: usize) -> std::ops::Range<usize> {
        let o = self.offset(c);
        o..o + self.loops[c].nodes
    }

    pub fn spacing(&self, c: usize) -> f64 {
        self.loops[c].length / self.loops[c].nodes as f64
    }

    /// Arc-length parameter of node `i` on loop `c`.
    pub fn s(&self, c: usize, i: usize) -> f64 {
        self.spacing(c) * i as f64
    }

    /// Loop index and local index of a global node.
    pub fn locate(&self, node: usize) -> (usize, usize) {
        let mut o = 0;
        for (c, l) in self.loops.iter().enumerate() {
            if node < o + l.nodes {
                return (c, node - o);
            }
            o += l.nodes;
        }
        panic!("node {node} out of range");
    }

    /// Quadrature weight (dl) of every node.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.node_count());
        for c in 0..self.loops.len() {
            w.extend(std::iter::repeat(self.spacing(c)).take(self.loops[c].nodes));
        }
        w
    }

    /// σ of every node.
    pub fn sigma(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.node_count());
        for l in &self.loops {
            s.extend(std::iter::repeat(l.sigma).take(l.nodes));
        }
        s
    }

    /// Involution pairing on a doubled grid (node ↦ its τ image).
    pub fn pairing(&self) -> Option<Vec<usize>> {
        if !self.doubled {
            return None;
        }
        let half = self.base().node_count();
        Some((0..self.node_count()).map(|n| if n < half { n + half } else { n - half }).collect())
    }

    pub fn total_length(&self) -> f64 {
        self.loops.iter().map(|l| l.length).sum()
    }

    /// Largest node spacing over loops.
    pub fn max_spacing(&self) -> f64 {
        (0..self.loops.len()).map(|c| self.spacing(c)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_odd_node_counts() {
        assert!(BoundaryGrid::circle(1.0, 8).is_err());
        assert!(BoundaryGrid::circle(1.0, 33).is_err());
        assert!(BoundaryGrid::circle(1.0, 32).is_ok());
    }

    #[test]
    fn doubled_pairing_is_fixed_point_free_involution() {
        let g = BoundaryGrid::new(&[(6.0, 32), (2.0, 16)]).unwrap().doubled();
        let p = g.pairing().unwrap();
        let sig = g.sigma();
        for n in 0..g.node_count() {
            assert_ne!(p[n], n);
            assert_eq!(p[p[n]], n);
            assert_eq!(sig[p[n]], -sig[n]);
        }
        assert_eq!(g.base().node_count(), 48);
    }

    #[test]
    fn spacing_is_length_over_nodes() {
        let g = BoundaryGrid::circle(3.0, 64).unwrap();
        assert_eq!(g.spacing(0), 3.0 / 64.0);
    }
}
