//! Sampled functions on a boundary grid and their spectral calculus.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::grid::BoundaryGrid;
use crate::error::{Result, SurfError};

/// Scalar types a boundary function can carry.
pub trait Sample:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + PartialEq
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
    + 'static
{
    fn to_c(self) -> Complex64;
    fn from_c(z: Complex64) -> Self;
    fn from_f(x: f64) -> Self;
    fn abs(self) -> f64;
    fn zero() -> Self {
        Self::from_f(0.0)
    }
}

impl Sample for f64 {
    fn to_c(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_c(z: Complex64) -> Self {
        z.re
    }
    fn from_f(x: f64) -> Self {
        x
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
}

impl Sample for Complex64 {
    fn to_c(self) -> Complex64 {
        self
    }
    fn from_c(z: Complex64) -> Self {
        z
    }
    fn from_f(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
}

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        let mut p = p.borrow_mut();
        if let Some(f) = p.1.get(&(n, inverse)) {
            return f.clone();
        }
        let f = if inverse { p.0.plan_fft_inverse(n) } else { p.0.plan_fft_forward(n) };
        p.1.insert((n, inverse), f.clone());
        f
    })
}

/// Normalized Fourier coefficients c_k = (1/N) Σ f_j e^{−2πi kj/N}, FFT ordering.
pub fn fft_coeffs(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf = values.to_vec();
    plan(n, false).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= inv);
    buf
}

/// Inverse of [`fft_coeffs`].
pub fn ifft_values(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    plan(buf.len(), true).process(&mut buf);
    buf
}

/// Signed mode index of FFT slot `j` (Nyquist reported as −N/2).
pub fn mode_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Values of a function on a boundary grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct BoundaryFunction<T: Sample = f64> {
    pub grid: Arc<BoundaryGrid>,
    pub values: Vec<T>,
}

pub type ComplexBoundaryFunction = BoundaryFunction<Complex64>;

impl<T: Sample> BoundaryFunction<T> {
    pub fn new(grid: Arc<BoundaryGrid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(SurfError::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(BoundaryFunction { grid, values })
    }

    pub fn zeros(grid: Arc<BoundaryGrid>) -> Self {
        let n = grid.node_count();
        BoundaryFunction { grid, values: vec![T::zero(); n] }
    }

    pub fn constant(grid: Arc<BoundaryGrid>, c: T) -> Self {
        let n = grid.node_count();
        BoundaryFunction { grid, values: vec![c; n] }
    }

    /// Samples `f(component, s)` at every node.
    pub fn from_fn(grid: Arc<BoundaryGrid>, f: impl Fn(usize, f64) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        for c in 0..grid.component_count() {
            for i in 0..grid.loops[c].nodes {
                values.push(f(c, grid.s(c, i)));
            }
        }
        BoundaryFunction { grid, values }
    }

    pub fn component(&self, c: usize) -> &[T] {
        &self.values[self.grid.range(c)]
    }

    pub fn same_grid(&self, other_grid: &BoundaryGrid) -> Result<()> {
        if *self.grid != *other_grid {
            return Err(SurfError::GridMismatch("boundary grids differ".into()));
        }
        Ok(())
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> BoundaryFunction<U> {
        BoundaryFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip<U: Sample>(&self, other: &Self, f: impl Fn(T, T) -> U) -> BoundaryFunction<U> {
        debug_assert_eq!(self.values.len(), other.values.len());
        BoundaryFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * T::from_f(c))
    }

    /// Fourier coefficients of loop `c` (FFT ordering, normalized by N).
    pub fn fourier(&self, c: usize) -> Vec<Complex64> {
        fft_coeffs(&self.component(c).iter().map(|v| v.to_c()).collect::<Vec<_>>())
    }

    /// Applies a per-loop Fourier multiplier `m(c, k, κ)`, κ = 2πk/L the arc-length wavenumber.
    pub fn multiplier(&self, m: impl Fn(usize, i64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.grid.component_count() {
            let n = self.grid.loops[c].nodes;
            let len = self.grid.loops[c].length;
            let mut coef = self.fourier(c);
            for (j, z) in coef.iter_mut().enumerate() {
                let k = mode_index(j, n);
                *z *= m(c, k, 2.0 * std::f64::consts::PI * k as f64 / len);
            }
            values.extend(ifft_values(&coef).into_iter().map(T::from_c));
        }
        BoundaryFunction { grid: self.grid.clone(), values }
    }

    /// ∂_γ by spectral differentiation (Nyquist mode dropped).
    pub fn derivative(&self) -> Self {
        let grid = self.grid.clone();
        self.multiplier(|c, k, kappa| {
            if k == -(grid.loops[c].nodes as i64) / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, kappa * grid.loops[c].orientation)
            }
        })
    }

    /// j-th derivative ∂_γ^j.
    pub fn derivative_n(&self, j: usize) -> Self {
        let mut f = self.clone();
        for _ in 0..j {
            f = f.derivative();
        }
        f
    }

    /// Mean over each loop.
    pub fn means(&self) -> Vec<T> {
        (0..self.grid.component_count())
            .map(|c| {
                let v = self.component(c);
                let s = v.iter().fold(Complex64::new(0.0, 0.0), |a, &x| a + x.to_c());
                T::from_c(s / v.len() as f64)
            })
            .collect()
    }

    /// Removes the mean of every loop (the projection P).
    pub fn remove_means(&self) -> Self {
        let means = self.means();
        let mut out = self.clone();
        for c in 0..self.grid.component_count() {
            for i in self.grid.range(c) {
                out.values[i] = out.values[i] - means[c];
            }
        }
        out
    }

    /// Antiderivative J, normalized to zero mean per loop.
    ///
    /// Fails with `NonZeroMean` if some loop mean exceeds `tol_mean = 1e-10·‖f‖`.
    pub fn integrate_j(&self) -> Result<Self> {
        let tol = 1e-10 * self.norm_l2().max(1e-300);
        for (c, m) in self.means().into_iter().enumerate() {
            if m.abs() > tol * (1.0 / self.grid.loops[c].length.sqrt()) {
                return Err(SurfError::NonZeroMean { component: c, mean: m.abs() });
            }
        }
        Ok(self.integrate_j_projected())
    }

    /// J∘P: antiderivative of the mean-free part of each loop.
    pub fn integrate_j_projected(&self) -> Self {
        let grid = self.grid.clone();
        self.multiplier(|c, k, kappa| {
            let n = grid.loops[c].nodes as i64;
            if k == 0 || k == -n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / (kappa * grid.loops[c].orientation))
            }
        })
    }

    /// L² norm with respect to arc length.
    pub fn norm_l2(&self) -> f64 {
        let w = self.grid.weights();
        self.values.iter().zip(&w).map(|(v, w)| v.abs().powi(2) * w).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// C^l norm: max over j ≤ l of sup |∂_γ^j f|.
    pub fn cl_norm(&self, l: usize) -> f64 {
        let mut f = self.clone();
        let mut best = f.sup_norm();
        for _ in 0..l {
            f = f.derivative();
            best = best.max(f.sup_norm());
        }
        best
    }

    /// Trigonometric interpolation onto `nodes` points per loop. The Nyquist
    /// mode is split symmetrically when refining; coarsening truncates.
    pub fn resample(&self, nodes: usize) -> Result<Self> {
        let mut grid = (*self.grid).clone();
        for l in grid.loops.iter_mut() {
            l.nodes = nodes;
        }
        grid.validate()?;
        let mut values = Vec::with_capacity(grid.node_count());
        for c in 0..self.grid.component_count() {
            let n = self.grid.loops[c].nodes;
            let coef = self.fourier(c);
            let mut out = vec![Complex64::new(0.0, 0.0); nodes];
            let slot = |k: i64| if k >= 0 { k as usize } else { (nodes as i64 + k) as usize };
            for (j, z) in coef.iter().enumerate() {
                let k = mode_index(j, n);
                if n < nodes && k == -(n as i64) / 2 {
                    out[slot(k)] += z * 0.5;
                    out[slot(-k)] += z * 0.5;
                } else if n < nodes || k.unsigned_abs() < (nodes / 2) as u64 {
                    out[slot(k)] += z;
                }
            }
            values.extend(ifft_values(&out).into_iter().map(T::from_c));
        }
        Ok(BoundaryFunction { grid: Arc::new(grid), values })
    }

    /// Band-limited evaluation at an arbitrary parameter `s` on loop `c`.
    pub fn interpolate(&self, c: usize, s: f64) -> Complex64 {
        let n = self.grid.loops[c].nodes;
        let len = self.grid.loops[c].length;
        let coef = self.fourier(c);
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, z) in coef.iter().enumerate() {
            let k = mode_index(j, n);
            if k == -(n as i64) / 2 {
                acc += z * (std::f64::consts::PI * n as f64 * s / len).cos();
            } else {
                acc += z * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * s / len);
            }
        }
        acc
    }
}

impl BoundaryFunction<f64> {
    /// L² inner product ⟨f, g⟩.
    pub fn inner(&self, other: &Self) -> f64 {
        let w = self.grid.weights();
        self.values.iter().zip(&other.values).zip(&w).map(|((a, b), w)| a * b * w).sum()
    }

    pub fn to_complex(&self) -> ComplexBoundaryFunction {
        self.map(|v| Complex64::new(v, 0.0))
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        self.zip(other, |x, y| x + a * y)
    }

    /// Lift to the doubled grid Υ: the same values on Γ₊ and on Γ₋ (f∘π).
    pub fn lift(&self, doubled: Arc<BoundaryGrid>) -> Self {
        let mut values = self.values.clone();
        values.extend_from_slice(&self.values);
        BoundaryFunction { grid: doubled, values }
    }

    pub fn max_abs_index(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[best].abs() {
                best = i;
            }
        }
        best
    }
}

impl ComplexBoundaryFunction {
    pub fn re(&self) -> BoundaryFunction<f64> {
        self.map(|z| z.re)
    }

    pub fn im(&self) -> BoundaryFunction<f64> {
        self.map(|z| z.im)
    }

    pub fn from_parts(re: &BoundaryFunction<f64>, im: &BoundaryFunction<f64>) -> Self {
        BoundaryFunction {
            grid: re.grid.clone(),
            values: re.values.iter().zip(&im.values).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }
}

macro_rules! impl_binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl<T: Sample> std::ops::$tr for &BoundaryFunction<T> {
            type Output = BoundaryFunction<T>;
            fn $f(self, rhs: Self) -> BoundaryFunction<T> {
                debug_assert_eq!(self.values.len(), rhs.values.len());
                self.zip(rhs, |a, b| a $op b)
            }
        }
        impl<T: Sample> std::ops::$tr for BoundaryFunction<T> {
            type Output = BoundaryFunction<T>;
            fn $f(self, rhs: Self) -> BoundaryFunction<T> {
                (&self).$f(&rhs)
            }
        }
    };
}
impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);
impl_binop!(Mul, mul, *);

impl<T: Sample> std::ops::Neg for &BoundaryFunction<T> {
    type Output = BoundaryFunction<T>;
    fn neg(self) -> BoundaryFunction<T> {
        self.map(|v| -v)
    }
}

impl<T: Sample> std::ops::Neg for BoundaryFunction<T> {
    type Output = BoundaryFunction<T>;
    fn neg(self) -> BoundaryFunction<T> {
        -&self
    }
}
