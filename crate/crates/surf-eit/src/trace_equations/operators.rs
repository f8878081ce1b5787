//! The boundary operators 𝔑, 𝔇, 𝔔 and 𝒢 built from a DN map.
//!
//! J is always applied as J∘P (per-loop mean removed first): Λf has zero
//! total flux but not necessarily zero flux per loop, and FEM maps carry
//! roundoff means.

use crate::boundary_calculus::{BoundaryFunction, DNMatrix};
use crate::error::Result;

type Bf = BoundaryFunction<f64>;

/// JΛf.
pub fn j_lambda(lambda: &DNMatrix, f: &Bf) -> Result<Bf> {
    Ok(lambda.apply(f)?.integrate_j_projected())
}

/// The four terms of 𝔑(f): ½Λf², −½Λ(JΛf)², −fΛf, −(JΛf)∂_γf.
pub fn n_terms(lambda: &DNMatrix, f: &Bf) -> Result<[Bf; 4]> {
    let lf = lambda.apply(f)?;
    let jlf = lf.integrate_j_projected();
    Ok([
        lambda.apply_unchecked(&(f * f)).scale(0.5),
        lambda.apply_unchecked(&(&jlf * &jlf)).scale(-0.5),
        -(f * &lf),
        -(&jlf * &f.derivative()),
    ])
}

/// The two terms of 𝔇f: ∂_γf and ΛJΛf.
pub fn d_terms(lambda: &DNMatrix, f: &Bf) -> Result<[Bf; 2]> {
    let jlf = j_lambda(lambda, f)?;
    Ok([f.derivative(), lambda.apply_unchecked(&jlf)])
}

/// The six terms of 𝔔(f, h).
pub fn q_terms(lambda: &DNMatrix, f: &Bf, h: &Bf) -> Result<[Bf; 6]> {
    let (lf, lh) = (lambda.apply(f)?, lambda.apply(h)?);
    let (jf, jh) = (lf.integrate_j_projected(), lh.integrate_j_projected());
    Ok([
        lambda.apply_unchecked(&(f * h)),
        -lambda.apply_unchecked(&(&jf * &jh)),
        -(f * &lh),
        -(h * &lf),
        -(&jf * &h.derivative()),
        -(&jh * &f.derivative()),
    ])
}

fn sum<const K: usize>(t: [Bf; K]) -> Bf {
    let mut it = t.into_iter();
    let first = it.next().expect("nonempty term list");
    it.fold(first, |a, b| a + b)
}

/// 𝔑(f) = ½Λ[f² − (JΛf)²] − fΛf − (JΛf)∂_γf.
pub fn frak_n(lambda: &DNMatrix, f: &Bf) -> Result<Bf> {
    Ok(sum(n_terms(lambda, f)?))
}

/// 𝔇f = ∂_γf + ΛJΛf.
pub fn frak_d(lambda: &DNMatrix, f: &Bf) -> Result<Bf> {
    Ok(sum(d_terms(lambda, f)?))
}

/// 𝔔(f, h) = Λ[fh − (JΛf)(JΛh)] − fΛh − hΛf − (JΛf)∂_γh − (JΛh)∂_γf.
pub fn frak_q(lambda: &DNMatrix, f: &Bf, h: &Bf) -> Result<Bf> {
    Ok(sum(q_terms(lambda, f, h)?))
}

/// 𝒢(f) = 𝔇f·∂_γ𝔑(f) − 𝔑(f)·∂_γ𝔇f.
pub fn g_map(lambda: &DNMatrix, f: &Bf) -> Result<Bf> {
    Ok(GAnchor::new(lambda, f)?.value())
}

fn sup_sum(t: &[Bf]) -> f64 {
    t.iter().map(|x| x.sup_norm()).sum()
}

fn l2_sum(t: &[Bf]) -> f64 {
    t.iter().map(|x| x.norm_l2()).sum()
}

fn derivs(t: &[Bf]) -> Vec<Bf> {
    t.iter().map(|x| x.derivative()).collect()
}

/// Quantities of 𝒢 at a fixed f, reused by the linearization.
pub struct GAnchor<'a> {
    lambda: &'a DNMatrix,
    f: Bf,
    n_t: Vec<Bf>,
    d_t: Vec<Bf>,
    n: Bf,
    d: Bf,
    dn: Bf,
    dd: Bf,
}

impl<'a> GAnchor<'a> {
    pub fn new(lambda: &'a DNMatrix, f: &Bf) -> Result<Self> {
        let n_t = n_terms(lambda, f)?.to_vec();
        let d_t = d_terms(lambda, f)?.to_vec();
        let n = sum([n_t[0].clone(), n_t[1].clone(), n_t[2].clone(), n_t[3].clone()]);
        let d = &d_t[0] + &d_t[1];
        let (dn, dd) = (n.derivative(), d.derivative());
        Ok(GAnchor { lambda, f: f.clone(), n_t, d_t, n, d, dn, dd })
    }

    /// 𝒢(f) at the anchor.
    pub fn value(&self) -> Bf {
        &self.d * &self.dn - &self.n * &self.dd
    }

    /// Triangle-inequality majorant of ‖𝒢(f)‖ built from the individual
    /// terms of 𝔑 and 𝔇; vanishes only for constant f.
    pub fn scale(&self) -> f64 {
        sup_sum(&self.d_t) * l2_sum(&derivs(&self.n_t)) + sup_sum(&self.n_t) * l2_sum(&derivs(&self.d_t))
    }

    /// 𝒢^{(1)}_f(h) = ∂𝔑(f)·𝔇h − 𝔑(f)·∂𝔇h + 𝔇f·∂𝔔(f,h) − ∂𝔇f·𝔔(f,h).
    pub fn g1(&self, h: &Bf) -> Result<Bf> {
        Ok(self.g1_with_scale(h)?.0)
    }

    /// 𝒢^{(1)}_f(h) and a majorant of its norm from the individual terms.
    pub fn g1_with_scale(&self, h: &Bf) -> Result<(Bf, f64)> {
        let dh_t = d_terms(self.lambda, h)?;
        let q_t = q_terms(self.lambda, &self.f, h)?;
        let dh = &dh_t[0] + &dh_t[1];
        let q = sum(q_t.clone());
        let value = &self.dn * &dh - &self.n * &dh.derivative() + &self.d * &q.derivative() - &self.dd * &q;
        let scale = sup_sum(&derivs(&self.n_t)) * l2_sum(&dh_t)
            + sup_sum(&self.n_t) * l2_sum(&derivs(&dh_t))
            + sup_sum(&self.d_t) * l2_sum(&derivs(&q_t))
            + sup_sum(&derivs(&self.d_t)) * l2_sum(&q_t);
        Ok((value, scale))
    }

    /// 𝒢^{(2)}_f(h) = 𝔇f·∂𝔑(h) − 𝔑(h)·∂𝔇f + 𝔇h·∂𝔔(f,h) − 𝔔(f,h)·∂𝔇h.
    pub fn g2(&self, h: &Bf) -> Result<Bf> {
        let nh = frak_n(self.lambda, h)?;
        let dh = frak_d(self.lambda, h)?;
        let q = frak_q(self.lambda, &self.f, h)?;
        Ok(&self.d * &nh.derivative() - &nh * &self.dd + &dh * &q.derivative() - &q * &dh.derivative())
    }
}

/// 𝒢^{(1)}_f(h).
pub fn g1_linearization(lambda: &DNMatrix, f: &Bf, h: &Bf) -> Result<Bf> {
    GAnchor::new(lambda, f)?.g1(h)
}

/// 𝒢^{(2)}_f(h).
pub fn g2_term(lambda: &DNMatrix, f: &Bf, h: &Bf) -> Result<Bf> {
    GAnchor::new(lambda, f)?.g2(h)
}

/// ‖𝒢(f)‖ relative to the majorant of its terms (0 for constant f).
pub fn g_relative(lambda: &DNMatrix, f: &Bf) -> Result<f64> {
    let a = GAnchor::new(lambda, f)?;
    let scale = a.scale();
    Ok(if scale == 0.0 { 0.0 } else { a.value().norm_l2() / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_calculus::ModeBasis;
    use crate::forward_models::{dn_disk, dn_mobius};

    #[test]
    fn disk_cosine_has_vanishing_numerator_and_denominator() {
        let l = dn_disk(64).unwrap();
        let f = BoundaryFunction::from_fn(l.grid.clone(), |_, s| s.cos());
        assert!(frak_d(&l, &f).unwrap().sup_norm() < 1e-12);
        assert!(frak_n(&l, &f).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn constants_are_annihilated() {
        let l = dn_mobius(2.0, 64).unwrap();
        let c = BoundaryFunction::constant(l.grid.clone(), 2.5);
        assert!(frak_n(&l, &c).unwrap().sup_norm() < 1e-12);
        assert!(frak_d(&l, &c).unwrap().sup_norm() < 1e-12);
        assert!(g_map(&l, &c).unwrap().sup_norm() < 1e-12);
        let h = BoundaryFunction::from_fn(l.grid.clone(), |_, s| (s / 2.0).sin() + 0.3 * (s).cos());
        assert!(frak_q(&l, &c, &h).unwrap().sup_norm() < 1e-11);
    }

    #[test]
    fn mobius_denominator_of_cosine_is_nonzero() {
        let r = 2.0;
        let l = dn_mobius(r, 64).unwrap();
        let f = BoundaryFunction::from_fn(l.grid.clone(), |_, s| (s / r).cos());
        // 𝔇 multiplier on odd modes: κ − λ·(λ/κ) with κ = 1/R, λ = coth(ln R)/R.
        let lam = 1.0 / r / (r.ln()).tanh();
        let expect = (1.0 / r - lam * lam * r).abs() * f.norm_l2();
        let got = frak_d(&l, &f).unwrap().norm_l2();
        assert!((got - expect).abs() < 1e-10 * expect, "{got} vs {expect}");
    }

    #[test]
    fn mobius_g_vanishes_on_band_limited_functions() {
        let l = dn_mobius(2.0, 96).unwrap();
        let basis = ModeBasis::new(l.grid.clone(), 8);
        let coeffs: Vec<f64> = (0..basis.len()).map(|j| ((j * 37 + 11) % 17) as f64 / 17.0 - 0.5).collect();
        let f = basis.synthesize(&coeffs);
        assert!(g_relative(&l, &f).unwrap() < 1e-10);
    }

    /// A self-adjoint Fourier multiplier with no trace structure.
    fn generic() -> DNMatrix {
        let grid = std::sync::Arc::new(crate::boundary_calculus::BoundaryGrid::unit_circle(128).unwrap());
        let block = |k: usize| nalgebra::DMatrix::from_element(1, 1, ((k * k + k) as f64).sqrt());
        DNMatrix::from_mode_blocks(grid, 63, block, crate::boundary_calculus::Provenance::Analytic)
    }

    fn band_limited(l: &DNMatrix, seed: usize) -> Bf {
        let basis = ModeBasis::new(l.grid.clone(), 6);
        let coeffs: Vec<f64> = (0..basis.len()).map(|j| (((j + 3) * (seed + 7) * 31) % 23) as f64 / 23.0 - 0.5).collect();
        basis.synthesize(&coeffs)
    }

    fn rel(a: &Bf, b: &Bf) -> f64 {
        (a - b).norm_l2() / b.norm_l2().max(1e-300)
    }

    #[test]
    fn quadratic_form_matches_numerator_and_is_symmetric() {
        let l = generic();
        let (f, h) = (band_limited(&l, 1), band_limited(&l, 2));
        assert!(rel(&frak_q(&l, &f, &f).unwrap(), &frak_n(&l, &f).unwrap().scale(2.0)) < 1e-12);
        assert!(rel(&frak_q(&l, &f, &h).unwrap(), &frak_q(&l, &h, &f).unwrap()) < 1e-12);
    }

    #[test]
    fn homogeneity_of_denominator_and_g() {
        let l = generic();
        let f = band_limited(&l, 3);
        let (d, g) = (frak_d(&l, &f).unwrap(), g_map(&l, &f).unwrap());
        for c in [0.5, 2.0, 5.0, 10.0] {
            let cf = f.scale(c);
            assert!(rel(&frak_d(&l, &cf).unwrap(), &d.scale(c)) < 1e-10);
            assert!(rel(&g_map(&l, &cf).unwrap(), &g.scale(c * c * c)) < 1e-10);
        }
    }

    #[test]
    fn g_splits_into_homogeneous_parts() {
        let l = generic();
        let (f, h) = (band_limited(&l, 4), band_limited(&l, 6));
        let a = GAnchor::new(&l, &f).unwrap();
        let rhs = a.value() + a.g1(&h).unwrap() + a.g2(&h).unwrap() + g_map(&l, &h).unwrap();
        let e = rel(&g_map(&l, &(&f + &h)).unwrap(), &rhs);
        assert!(e < 1e-10, "{e}");
    }

    #[test]
    fn linearization_matches_difference_quotient_and_euler_relation() {
        let l = generic();
        let (f, h) = (band_limited(&l, 6), band_limited(&l, 8));
        let s = 1e-5;
        let fd = (g_map(&l, &f.axpy(s, &h)).unwrap() - g_map(&l, &f).unwrap()).scale(1.0 / s);
        assert!(rel(&fd, &g1_linearization(&l, &f, &h).unwrap()) < 1e-4);
        let euler = g1_linearization(&l, &f, &f).unwrap();
        assert!(rel(&euler, &g_map(&l, &f).unwrap().scale(3.0)) < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn g_is_positively_homogeneous_of_degree_three(
                coeffs in proptest::collection::vec(-1.0f64..1.0, 13),
                c in 0.5f64..10.0,
            ) {
                let l = generic();
                let basis = ModeBasis::new(l.grid.clone(), 6);
                let f = basis.synthesize(&coeffs);
                let g = g_map(&l, &f).unwrap();
                prop_assume!(g.norm_l2() > 1e-12);
                let gc = g_map(&l, &f.scale(c)).unwrap();
                prop_assert!(rel(&gc, &g.scale(c.powi(3))) < 1e-9);
            }
        }
    }
}
