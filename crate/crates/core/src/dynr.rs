//! The hyperbolic dynamical r-matrix family attached to a subset π′ ⊆ π,
//! its shifts R± = R ± ½·id, its q-derivative, the constant r-matrix 𝐑 of the
//! Toda limit, and residual checks for the modified dynamical Yang-Baxter
//! equation and the algebroid identity of the associated r-matrix ℛ.
//!
//! With K = ½·id, for `α ∈ Δ`:
//!
//! ```text
//! R(q)X = −Σ φ_α(q) X_α e_α,
//! φ_α = ½ on ᾱ′⁺,  −½ on ᾱ′⁻,  ½ coth(½α(q)) on ⟨π′⟩.
//! ```

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::liealg::{bracket_unchecked, CartanPoint, GElement, LieAlgebraData};

pub const DEFAULT_POLE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootClass {
    /// α ∈ ⟨π′⟩
    Span,
    /// α ∈ ᾱ′⁺ = Δ⁺ \ ⟨π′⟩
    ComplementPos,
    /// α ∈ ᾱ′⁻ = Δ⁻ \ ⟨π′⟩
    ComplementNeg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// One member of the r-matrix family: the algebra, the subset π′ and K = ½·id.
#[derive(Debug, Clone)]
pub struct RFamily {
    pub algebra: Arc<LieAlgebraData>,
    /// 0-based indices of the simple roots in π′, sorted.
    pub pi_prime: Vec<usize>,
    pub k_scale: f64,
    /// |α(q)| below this on ⟨π′⟩ counts as a pole.
    pub pole_threshold: f64,
    classes: Vec<RootClass>,
}

impl RFamily {
    pub fn new(algebra: Arc<LieAlgebraData>, pi_prime: &[usize]) -> Result<Self> {
        let mut pp: Vec<usize> = pi_prime.to_vec();
        pp.sort_unstable();
        pp.dedup();
        if let Some(&bad) = pp.iter().find(|&&i| i >= algebra.rank) {
            return Err(Error::Precondition(format!(
                "simple root index {} out of range 1..={}",
                bad + 1,
                algebra.rank
            )));
        }
        let classes = (0..algebra.num_roots())
            .map(|a| {
                let inside = algebra.roots[a]
                    .iter()
                    .enumerate()
                    .all(|(k, &c)| c == 0 || pp.contains(&k));
                if inside {
                    RootClass::Span
                } else if algebra.is_positive(a) {
                    RootClass::ComplementPos
                } else {
                    RootClass::ComplementNeg
                }
            })
            .collect();
        Ok(RFamily {
            algebra,
            pi_prime: pp,
            k_scale: 0.5,
            pole_threshold: DEFAULT_POLE_THRESHOLD,
            classes,
        })
    }

    pub fn with_pole_threshold(mut self, threshold: f64) -> Self {
        self.pole_threshold = threshold;
        self
    }

    pub fn alg(&self) -> &LieAlgebraData {
        &self.algebra
    }

    pub fn class(&self, a: usize) -> RootClass {
        self.classes[a]
    }

    pub fn in_span(&self, a: usize) -> bool {
        self.classes[a] == RootClass::Span
    }

    /// Indices of the roots in ⟨π′⟩.
    pub fn span_roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.classes.len()).filter(move |&a| self.in_span(a))
    }

    /// Whether α_i (0-based) belongs to π′.
    pub fn in_pi_prime(&self, i: usize) -> bool {
        self.pi_prime.contains(&i)
    }

    /// Checks that q lies in the domain: α(q) away from zero on ⟨π′⟩.
    pub fn check_domain(&self, q: &CartanPoint) -> Result<()> {
        self.algebra.check_cartan(q)?;
        for a in self.span_roots() {
            self.alpha_checked(a, q)?;
        }
        Ok(())
    }

    fn alpha_checked(&self, a: usize, q: &CartanPoint) -> Result<f64> {
        let v = self.algebra.alpha_of(a, q);
        if v.abs() < self.pole_threshold || !v.is_finite() {
            return Err(Error::Domain { root: self.algebra.root_key(a), value: v.abs() });
        }
        Ok(v)
    }

    /// `1/sinh²(½α(q))` for α ∈ ⟨π′⟩.
    pub fn csch2(&self, a: usize, q: &CartanPoint) -> Result<f64> {
        let s = (0.5 * self.alpha_checked(a, q)?).sinh();
        Ok(1.0 / (s * s))
    }

    /// `coth(½α(q))` for α ∈ ⟨π′⟩.
    pub fn coth(&self, a: usize, q: &CartanPoint) -> Result<f64> {
        Ok(1.0 / (0.5 * self.alpha_checked(a, q)?).tanh())
    }
}

pub fn phi_alpha(r: &RFamily, a: usize, q: &CartanPoint) -> Result<f64> {
    match r.class(a) {
        RootClass::ComplementPos => Ok(0.5),
        RootClass::ComplementNeg => Ok(-0.5),
        RootClass::Span => Ok(0.5 * r.coth(a, q)?),
    }
}

/// `R(q)x = −Σ φ_α(q) x_α e_α`.
pub fn r_apply(r: &RFamily, q: &CartanPoint, x: &GElement) -> Result<GElement> {
    let alg = r.alg();
    alg.check(x)?;
    alg.check_cartan(q)?;
    let mut out = GElement::zeros(alg);
    for a in 0..alg.num_roots() {
        out.roots[a] = -phi_alpha(r, a, q)? * x.roots[a];
    }
    Ok(out)
}

/// `R±(q)x = R(q)x ± ½x`.
pub fn r_pm_apply(r: &RFamily, sign: Sign, q: &CartanPoint, x: &GElement) -> Result<GElement> {
    let mut out = r_apply(r, q, x)?;
    out.h.axpy(sign.value() * r.k_scale, &x.h, 1.0);
    out.roots.axpy(sign.value() * r.k_scale, &x.roots, 1.0);
    Ok(out)
}

/// Directional derivative `dR(q)(λ)x`; on ⟨π′⟩ the e_α coefficient is
/// `¼ α(λ) x_α / sinh²(½α(q))`.
pub fn dr_apply(
    r: &RFamily,
    q: &CartanPoint,
    lambda: &CartanPoint,
    x: &GElement,
) -> Result<GElement> {
    let alg = r.alg();
    alg.check(x)?;
    alg.check_cartan(q)?;
    alg.check_cartan(lambda)?;
    let mut out = GElement::zeros(alg);
    for a in r.span_roots() {
        out.roots[a] = 0.25 * alg.alpha_of(a, lambda) * r.csch2(a, q)? * x.roots[a];
    }
    Ok(out)
}

/// 𝔥-gradient of `q ↦ (R(q)a, b)`:
/// `Σ_{α∈⟨π′⟩} ¼ a_α b_{−α} / sinh²(½α(q)) H_α`.
pub fn grad_r_pairing(
    r: &RFamily,
    q: &CartanPoint,
    a: &GElement,
    b: &GElement,
) -> Result<DVector<f64>> {
    let alg = r.alg();
    let mut g = DVector::zeros(alg.rank);
    // ±α pairs are combined so the a = b case cancels exactly.
    for k in r.span_roots().filter(|&k| alg.is_positive(k)) {
        let nk = alg.neg(k);
        let c = 0.25 * (a.roots[k] * b.roots[nk] - a.roots[nk] * b.roots[k]) * r.csch2(k, q)?;
        g.axpy(c, &alg.coroots[k], 1.0);
    }
    Ok(g)
}

/// Left side minus right side of the modified dynamical Yang-Baxter equation
/// with ad* ≃ −ad, ι* ≃ Π_𝔥 and K = ½·id:
///
/// ```text
/// [Ra,Rb] + R(−[Ra,b] + [Rb,a]) + dR(Π_𝔥a)b − dR(Π_𝔥b)a + ∇_q(R(q)a,b) + ¼[a,b]
/// ```
pub fn mdybe_residual(r: &RFamily, q: &CartanPoint, a: &GElement, b: &GElement) -> Result<GElement> {
    let k2 = r.k_scale * r.k_scale;
    let mut res = cdybe_residual(r, q, a, b)?;
    res += &bracket_unchecked(r.alg(), a, b).scale(k2);
    Ok(res)
}

/// The same expression without the K-term (the unmodified equation).
pub fn cdybe_residual(r: &RFamily, q: &CartanPoint, a: &GElement, b: &GElement) -> Result<GElement> {
    let alg = r.alg();
    alg.check(a)?;
    alg.check(b)?;
    let ra = r_apply(r, q, a)?;
    let rb = r_apply(r, q, b)?;
    let br = |x: &GElement, y: &GElement| bracket_unchecked(alg, x, y);
    let mut res = br(&ra, &rb);
    let inner = br(&rb, a) - br(&ra, b);
    res += &r_apply(r, q, &inner)?;
    res += &dr_apply(r, q, &a.h, b)?;
    res -= &dr_apply(r, q, &b.h, a)?;
    res.h += grad_r_pairing(r, q, a, b)?;
    Ok(res)
}

/// Residual pair of the algebroid identity for constant sections
/// `(A, Z)`, `(A′, Z′)` of 𝔤 × 𝔥 over the point q.
///
/// Returns `(𝒜 + [KA, KA′], 𝒵)`; both vanish when R solves the mDYBE.
pub fn algebroid_identity_residual(
    r: &RFamily,
    q: &CartanPoint,
    a: &GElement,
    z: &DVector<f64>,
    a2: &GElement,
    z2: &DVector<f64>,
) -> Result<(GElement, DVector<f64>)> {
    let alg = r.alg();
    alg.check(a)?;
    alg.check(a2)?;
    alg.check_cartan(z)?;
    alg.check_cartan(z2)?;
    let br = |x: &GElement, y: &GElement| bracket_unchecked(alg, x, y);
    let zz = GElement::from_cartan(alg, z);
    let zz2 = GElement::from_cartan(alg, z2);

    // ℛ(A, Z) = (−Z + R(q)A, Π_𝔥 A)
    let rcal = |x: &GElement, zx: &GElement| -> Result<(GElement, DVector<f64>)> {
        Ok((r_apply(r, q, x)? - zx.clone(), x.h.clone()))
    };
    let (u1, l1) = rcal(a, &zz)?;
    let (u2, l2) = rcal(a2, &zz2)?;

    // Bracket on the dual algebroid for constant sections.
    let dual_first = br(&u1, a2) - br(&u2, a);
    let dual_second = grad_r_pairing(r, q, a, a2)?;

    // Bracket of the images in the algebroid AΓ.
    let mut img = br(&u1, &u2);
    img += &dr_apply(r, q, &l1, a2)?;
    img -= &dr_apply(r, q, &l2, a)?;

    let (rd_first, rd_second) = rcal(&dual_first, &GElement::from_cartan(alg, &dual_second))?;
    let mut first = img - rd_first;
    let k2 = r.k_scale * r.k_scale;
    first += &br(a, a2).scale(k2);
    let second = -rd_second;
    Ok((first, second))
}

/// The constant r-matrix of the Toda limit:
/// `𝐑x = ½Σ_{Δ⁻} x_α e_α − ½Σ_{Δ⁺} x_α e_α`.
pub fn const_r_apply(alg: &LieAlgebraData, x: &GElement) -> GElement {
    let mut out = GElement::zeros(alg);
    for a in 0..alg.num_roots() {
        let s = if alg.is_positive(a) { -0.5 } else { 0.5 };
        out.roots[a] = s * x.roots[a];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::{bracket, build_algebra, form, weyl_vector_w, Series};
    use crate::sample;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn family(rank: usize, pi: &[usize]) -> RFamily {
        RFamily::new(Arc::new(build_algebra(Series::A, rank).unwrap()), pi).unwrap()
    }

    fn q_with_alpha(r: &RFamily, value: f64) -> CartanPoint {
        // sl(2): α(q) = √2 q_1
        assert_eq!(r.alg().rank, 1);
        DVector::from_vec(vec![value / 2f64.sqrt()])
    }

    #[test]
    fn root_classes() {
        let r = family(3, &[0, 1]);
        let alg = r.alg();
        let span: Vec<String> = r.span_roots().map(|a| alg.root_key(a)).collect();
        assert_eq!(span, ["1,0,0", "0,1,0", "1,1,0", "-1,0,0", "0,-1,0", "-1,-1,0"]);
        for a in 0..alg.num_roots() {
            assert_eq!(r.in_span(a), r.in_span(alg.neg(a)));
        }
        assert_eq!(r.class(alg.root_from_key("0,0,1").unwrap()), RootClass::ComplementPos);
        assert_eq!(r.class(alg.root_from_key("-1,-1,-1").unwrap()), RootClass::ComplementNeg);
        assert!(RFamily::new(r.algebra.clone(), &[3]).is_err());
    }

    #[test]
    fn phi_values() {
        let r = family(1, &[0]);
        let q = q_with_alpha(&r, 2.0);
        // ½ coth(1), independently: ½ (e² + 1)/(e² − 1)
        let e2 = 1f64.exp().powi(2);
        let expect = 0.5 * (e2 + 1.0) / (e2 - 1.0);
        assert!((phi_alpha(&r, 0, &q).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.656518).abs() < 1e-6);
        assert!(matches!(
            phi_alpha(&r, 0, &q_with_alpha(&r, 0.0)),
            Err(Error::Domain { .. })
        ));

        let r0 = family(1, &[]);
        assert_eq!(phi_alpha(&r0, 0, &q).unwrap(), 0.5);
        assert_eq!(phi_alpha(&r0, 1, &q).unwrap(), -0.5);
        // no pole for roots outside the span
        assert_eq!(phi_alpha(&r0, 0, &q_with_alpha(&r0, 0.0)).unwrap(), 0.5);
    }

    #[test]
    fn pole_threshold_is_configurable() {
        let r = family(1, &[0]).with_pole_threshold(1e-3);
        assert!(phi_alpha(&r, 0, &q_with_alpha(&r, 5e-4)).is_err());
        assert!(phi_alpha(&r, 0, &q_with_alpha(&r, 2e-3)).is_ok());
    }

    #[test]
    fn r_examples() {
        let r = family(1, &[0]);
        let alg = r.alg();
        let q = q_with_alpha(&r, 2.0);
        let h = GElement::from_cartan(alg, &DVector::from_vec(vec![1.3]));
        assert_eq!(r_apply(&r, &q, &h).unwrap(), GElement::zeros(alg));
        let e = GElement::root_vector(alg, 0);
        let re = r_apply(&r, &q, &e).unwrap();
        assert!((re.roots[0] + 0.656518).abs() < 1e-6);
        assert_eq!(re.roots[1], 0.0);

        let rm = r_pm_apply(&r, Sign::Minus, &q, &e).unwrap();
        assert!((rm.roots[0] + 1.156518).abs() < 1e-6);
    }

    #[test]
    fn constant_r() {
        let alg = build_algebra(Series::A, 2).unwrap();
        let h = GElement::from_cartan(&alg, &DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(const_r_apply(&alg, &h), GElement::zeros(&alg));
        let e = GElement::root_vector(&alg, 2);
        assert_eq!(const_r_apply(&alg, &e), e.scale(-0.5));
        let f = GElement::root_vector(&alg, 4);
        assert_eq!(const_r_apply(&alg, &f), f.scale(0.5));
    }

    #[test]
    fn dr_vanishes_without_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r0 = family(3, &[]);
        let alg = r0.alg();
        let q = sample::chamber_point(alg, &mut rng, 0.5, 1.5);
        let lam = sample::cartan(alg, &mut rng, 1.0);
        let x = sample::element(alg, &mut rng, 1.0);
        assert_eq!(dr_apply(&r0, &q, &lam, &x).unwrap(), GElement::zeros(alg));

        // λ orthogonal to α_1 does not move R when π′ = {α_1}
        let r1 = family(2, &[0]);
        let alg = r1.alg();
        let q = sample::chamber_point(alg, &mut rng, 0.5, 1.5);
        let h1 = &alg.coroots[0];
        let mut lam = sample::cartan(alg, &mut rng, 1.0);
        let c = lam.dot(h1) / h1.norm_squared();
        lam.axpy(-c, h1, 1.0);
        let x = sample::element(alg, &mut rng, 1.0);
        assert!(dr_apply(&r1, &q, &lam, &x).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn mdybe_sl2_by_hand() {
        // a = e_α, b = e_{-α}: −¼coth² + ¼csch² + ¼ = 0
        let r = family(1, &[0]);
        let alg = r.alg();
        let q = q_with_alpha(&r, 0.7);
        let a = GElement::root_vector(alg, 0);
        let b = GElement::root_vector(alg, 1);
        assert!(mdybe_residual(&r, &q, &a, &b).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn unmodified_equation_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (rank, pi) in [(2usize, vec![0, 1]), (3, vec![1])] {
            let r = family(rank, &pi);
            let alg = r.alg();
            let mut min_norm = f64::INFINITY;
            for _ in 0..20 {
                let q = sample::chamber_point(alg, &mut rng, 0.3, 2.0);
                let a = sample::element(alg, &mut rng, 1.0);
                let b = sample::element(alg, &mut rng, 1.0);
                min_norm = min_norm.min(cdybe_residual(&r, &q, &a, &b).unwrap().norm());
            }
            assert!(min_norm > 1e-3, "{min_norm}");
        }
    }

    #[test]
    fn algebroid_antisymmetric_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = family(3, &[0, 2]);
        let alg = r.alg();
        let q = sample::chamber_point(alg, &mut rng, 0.3, 2.0);
        let a = sample::element(alg, &mut rng, 1.0);
        let z = sample::cartan(alg, &mut rng, 1.0);
        let (f, s) = algebroid_identity_residual(&r, &q, &a, &z, &a, &z).unwrap();
        assert_eq!(f.max_abs(), 0.0);
        assert_eq!(s.amax(), 0.0);
    }

    #[test]
    fn scaling_limit_of_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = family(3, &[0, 1]);
        let alg = r.alg();
        let w = weyl_vector_w(alg);
        let x = sample::cartan(alg, &mut rng, 1.0);
        let xi = sample::element(alg, &mut rng, 1.0);
        let target = const_r_apply(alg, &xi);
        let dev: Vec<f64> = [4.0, 6.0, 8.0]
            .iter()
            .map(|&tau| {
                let q = &x + &w * (2.0 * tau);
                (r_apply(&r, &q, &xi).unwrap() - target.clone()).norm()
            })
            .collect();
        assert!(dev[0] > dev[1] && dev[1] > dev[2], "{dev:?}");
    }

    fn random_setup(seed: u64, rank: usize, pi: &[usize]) -> (RFamily, CartanPoint, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = family(rank, pi);
        let q = sample::chamber_point(r.alg(), &mut rng, 0.3, 2.0);
        (r, q, rng)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn r_is_skew(seed in any::<u64>(), rank in 1usize..=4, mask in 0u32..16) {
            let pi: Vec<usize> = (0..rank).filter(|i| mask & (1 << i) != 0).collect();
            let (r, q, mut rng) = random_setup(seed, rank, &pi);
            let alg = r.alg();
            let a = sample::element(alg, &mut rng, 1.0);
            let b = sample::element(alg, &mut rng, 1.0);
            let lhs = form(alg, &r_apply(&r, &q, &a).unwrap(), &b);
            let rhs = form(alg, &a, &r_apply(&r, &q, &b).unwrap());
            prop_assert!((lhs + rhs).abs() < 1e-12);
            for k in 0..alg.num_roots() {
                let p = phi_alpha(&r, k, &q).unwrap();
                let m = phi_alpha(&r, alg.neg(k), &q).unwrap();
                prop_assert_eq!(p, -m);
            }
        }

        #[test]
        fn shifts_and_images(seed in any::<u64>(), rank in 1usize..=4, mask in 0u32..16) {
            let pi: Vec<usize> = (0..rank).filter(|i| mask & (1 << i) != 0).collect();
            let (r, q, mut rng) = random_setup(seed, rank, &pi);
            let alg = r.alg();
            let x = sample::element(alg, &mut rng, 1.0);
            let rp = r_pm_apply(&r, Sign::Plus, &q, &x).unwrap();
            let rm = r_pm_apply(&r, Sign::Minus, &q, &x).unwrap();
            prop_assert!((rp.clone() - rm.clone() - x).max_abs() < 1e-15);
            // R⁺ lands in 𝔭⁻ (no ᾱ′⁺ components), R⁻ in 𝔭⁺ (no ᾱ′⁻ components)
            for k in 0..alg.num_roots() {
                match r.class(k) {
                    RootClass::ComplementPos => prop_assert_eq!(rp.roots[k], 0.0),
                    RootClass::ComplementNeg => prop_assert_eq!(rm.roots[k], 0.0),
                    RootClass::Span => {}
                }
            }
        }

        #[test]
        fn dr_matches_finite_difference(seed in any::<u64>(), rank in 1usize..=3) {
            let pi: Vec<usize> = (0..rank).collect();
            let (r, q, mut rng) = random_setup(seed, rank, &pi);
            let alg = r.alg();
            let lam = sample::cartan(alg, &mut rng, 1.0);
            let x = sample::element(alg, &mut rng, 1.0);
            let h = 1e-6;
            let fd = (r_apply(&r, &(&q + &lam * h), &x).unwrap()
                - r_apply(&r, &(&q - &lam * h), &x).unwrap()).scale(0.5 / h);
            prop_assert!((fd - dr_apply(&r, &q, &lam, &x).unwrap()).max_abs() < 1e-8);
        }

        #[test]
        fn pairing_gradient_matches_finite_difference(seed in any::<u64>(), rank in 1usize..=3) {
            let pi: Vec<usize> = (0..rank).collect();
            let (r, q, mut rng) = random_setup(seed, rank, &pi);
            let alg = r.alg();
            let a = sample::element(alg, &mut rng, 1.0);
            let b = sample::element(alg, &mut rng, 1.0);
            let g = grad_r_pairing(&r, &q, &a, &b).unwrap();
            let h = 1e-6;
            for k in 0..rank {
                let mut e = DVector::zeros(rank);
                e[k] = h;
                let f = |qq: &CartanPoint| form(alg, &r_apply(&r, qq, &a).unwrap(), &b);
                let fd = (f(&(&q + &e)) - f(&(&q - &e))) / (2.0 * h);
                prop_assert!((fd - g[k]).abs() < 1e-8);
            }
        }

        #[test]
        fn mdybe_holds(seed in any::<u64>(), rank in 1usize..=4, mask in 0u32..16) {
            let pi: Vec<usize> = (0..rank).filter(|i| mask & (1 << i) != 0).collect();
            let (r, q, mut rng) = random_setup(seed, rank, &pi);
            let alg = r.alg();
            let a = sample::element(alg, &mut rng, 1.0);
            let b = sample::element(alg, &mut rng, 1.0);
            prop_assert!(mdybe_residual(&r, &q, &a, &b).unwrap().norm() < 1e-10);
        }

        #[test]
        fn algebroid_identity_holds(seed in any::<u64>(), mask in 0u32..4) {
            let pi: Vec<usize> = (0..2).filter(|i| mask & (1 << i) != 0).collect();
            let (r, q, mut rng) = random_setup(seed, 2, &pi);
            let alg = r.alg();
            let a = sample::element(alg, &mut rng, 1.0);
            let a2 = sample::element(alg, &mut rng, 1.0);
            let z = sample::cartan(alg, &mut rng, 1.0);
            let z2 = sample::cartan(alg, &mut rng, 1.0);
            let (f, s) = algebroid_identity_residual(&r, &q, &a, &z, &a2, &z2).unwrap();
            prop_assert!(f.norm() < 1e-10);
            prop_assert!(s.norm() < 1e-10);
        }

        #[test]
        fn cartan_equivariance(seed in any::<u64>(), rank in 1usize..=3) {
            let pi: Vec<usize> = (0..rank).collect();
            let (r, q, mut rng) = random_setup(seed, rank, &pi);
            let alg = r.alg();
            let z = sample::cartan(alg, &mut rng, 0.5);
            let a = sample::element(alg, &mut rng, 1.0);
            let lhs = r_apply(&r, &q, &alg.ad_torus(&z, &a)).unwrap();
            let rhs = alg.ad_torus(&z, &r_apply(&r, &q, &a).unwrap());
            prop_assert!((lhs - rhs).max_abs() < 1e-10);
        }
    }

    #[test]
    fn bracket_dimension_guard() {
        let r = family(2, &[0]);
        let bad = GElement::zeros(&build_algebra(Series::A, 1).unwrap());
        let q = DVector::from_vec(vec![1.0, 0.3]);
        assert!(r_apply(&r, &q, &bad).is_err());
        assert!(bracket(r.alg(), &bad, &bad).is_err());
    }
}
