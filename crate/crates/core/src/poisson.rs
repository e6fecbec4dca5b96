//! Lie-Poisson brackets evaluated at points, for functions that carry their
//! own partial derivatives.
//!
//! A point is a triple `(q, λ, X) ∈ 𝔥 × 𝔥 × 𝔤`. The same container holds
//! `(q, p, ξ)` for the product bracket and `(x, p, η)` for the semi-direct
//! bracket. Gradients are taken with respect to the invariant form, so the
//! `e_α` coefficient of `δφ` is `∂φ/∂X_{−α}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dynr::{const_r_apply, dr_apply, r_apply, RFamily};
use crate::error::Result;
use crate::liealg::{bracket_unchecked, form, CartanPoint, GElement, LieAlgebraData};

#[derive(Debug, Clone, PartialEq)]
pub struct Point3 {
    pub q: CartanPoint,
    pub l: CartanPoint,
    pub x: GElement,
}

/// Partial derivatives `(δ₁φ, δ₂φ, δφ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient3 {
    pub d1: DVector<f64>,
    pub d2: DVector<f64>,
    pub d: GElement,
}

/// Tangent vector at a point, same layout as [`Point3`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent3 {
    pub dq: DVector<f64>,
    pub dl: DVector<f64>,
    pub dx: GElement,
}

pub trait SmoothFunction3 {
    fn eval(&self, pt: &Point3) -> f64;
    fn grad(&self, pt: &Point3) -> Gradient3;
}

impl Point3 {
    pub fn new(q: CartanPoint, l: CartanPoint, x: GElement) -> Self {
        Point3 { q, l, x }
    }

    pub fn coord_len(&self) -> usize {
        self.q.len() + self.l.len() + self.x.h.len() + self.x.roots.len()
    }

    /// Flat coordinates `(q, λ, X_h, X_roots)`.
    pub fn to_coords(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.coord_len());
        v.extend(self.q.iter());
        v.extend(self.l.iter());
        v.extend(self.x.h.iter());
        v.extend(self.x.roots.iter());
        DVector::from_vec(v)
    }

    pub fn from_coords(&self, v: &DVector<f64>) -> Point3 {
        let n = self.q.len();
        let nr = self.x.roots.len();
        Point3 {
            q: v.rows(0, n).into_owned(),
            l: v.rows(n, n).into_owned(),
            x: GElement { h: v.rows(2 * n, n).into_owned(), roots: v.rows(3 * n, nr).into_owned() },
        }
    }

    pub fn moved(&self, t: &Tangent3, s: f64) -> Point3 {
        Point3 {
            q: &self.q + &t.dq * s,
            l: &self.l + &t.dl * s,
            x: &self.x + &t.dx.scale(s),
        }
    }
}

impl Gradient3 {
    /// Converts a coordinate gradient `∂φ/∂(q, λ, X_h, X_roots)` into
    /// form-dual partials.
    pub fn from_coord_grad(alg: &LieAlgebraData, g: &DVector<f64>) -> Self {
        let n = alg.rank;
        let nr = alg.num_roots();
        let mut d = GElement::zeros(alg);
        d.h.copy_from(&g.rows(2 * n, n));
        for a in 0..nr {
            d.roots[a] = g[3 * n + alg.neg(a)];
        }
        Gradient3 { d1: g.rows(0, n).into_owned(), d2: g.rows(n, n).into_owned(), d }
    }

    pub fn to_coord_grad(&self, alg: &LieAlgebraData) -> DVector<f64> {
        let n = alg.rank;
        let nr = alg.num_roots();
        let mut g = DVector::zeros(3 * n + nr);
        g.rows_mut(0, n).copy_from(&self.d1);
        g.rows_mut(n, n).copy_from(&self.d2);
        g.rows_mut(2 * n, n).copy_from(&self.d.h);
        for a in 0..nr {
            g[3 * n + alg.neg(a)] = self.d.roots[a];
        }
        g
    }

    fn scale(&self, s: f64) -> Gradient3 {
        Gradient3 { d1: &self.d1 * s, d2: &self.d2 * s, d: self.d.scale(s) }
    }

    fn add(&self, o: &Gradient3) -> Gradient3 {
        Gradient3 { d1: &self.d1 + &o.d1, d2: &self.d2 + &o.d2, d: &self.d + &o.d }
    }
}

/// `⟨dg, v⟩` at a point.
pub fn directional(alg: &LieAlgebraData, g: &Gradient3, v: &Tangent3) -> f64 {
    g.d1.dot(&v.dq) + g.d2.dot(&v.dl) + form(alg, &g.d, &v.dx)
}

/// Largest discrepancy between the analytic partials of `f` and 5-point
/// central differences with step `h`.
pub fn check_partials(alg: &LieAlgebraData, f: &dyn SmoothFunction3, pt: &Point3, h: f64) -> f64 {
    let analytic = f.grad(pt).to_coord_grad(alg);
    let numeric = fd_coord_grad(f, pt, h);
    (analytic - numeric).amax()
}

fn fd_coord_grad(f: &dyn SmoothFunction3, pt: &Point3, h: f64) -> DVector<f64> {
    let v = pt.to_coords();
    let mut g = DVector::zeros(v.len());
    for i in 0..v.len() {
        let at = |s: f64| {
            let mut w = v.clone();
            w[i] += s * h;
            f.eval(&pt.from_coords(&w))
        };
        g[i] = (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h);
    }
    g
}

// ---------------------------------------------------------------------------
// Test-function families

/// `φ(v) = ½ vᵀQv + cᵀv` on the flat coordinates of a point.
#[derive(Debug, Clone)]
pub struct Quadratic3 {
    pub alg: std::sync::Arc<LieAlgebraData>,
    pub quad: DMatrix<f64>,
    pub lin: DVector<f64>,
}

/// Which slots a random quadratic may depend on.
#[derive(Debug, Clone, Copy)]
pub struct SlotMask {
    pub q: bool,
    pub l: bool,
    pub x: bool,
}

impl SlotMask {
    pub const ALL: SlotMask = SlotMask { q: true, l: true, x: true };
}

impl Quadratic3 {
    pub fn random<R: Rng>(
        alg: std::sync::Arc<LieAlgebraData>,
        rng: &mut R,
        mask: SlotMask,
        scale: f64,
    ) -> Self {
        let n = alg.rank;
        let len = 3 * n + alg.num_roots();
        let active = |i: usize| {
            if i < n {
                mask.q
            } else if i < 2 * n {
                mask.l
            } else {
                mask.x
            }
        };
        let mut quad = DMatrix::zeros(len, len);
        for i in 0..len {
            for j in i..len {
                if active(i) && active(j) {
                    let v = rng.gen_range(-scale..scale);
                    quad[(i, j)] = v;
                    quad[(j, i)] = v;
                }
            }
        }
        let lin = DVector::from_fn(len, |i, _| if active(i) { rng.gen_range(-scale..scale) } else { 0.0 });
        Quadratic3 { alg, quad, lin }
    }

    /// The linear coordinate function picking flat coordinate `i`.
    pub fn coordinate(alg: std::sync::Arc<LieAlgebraData>, i: usize) -> Self {
        let len = 3 * alg.rank + alg.num_roots();
        let mut lin = DVector::zeros(len);
        lin[i] = 1.0;
        Quadratic3 { alg, quad: DMatrix::zeros(len, len), lin }
    }

    /// `φ = (Y, X)` for fixed `Y ∈ 𝔤`.
    pub fn pairing_x(alg: std::sync::Arc<LieAlgebraData>, y: &GElement) -> Self {
        let len = 3 * alg.rank + alg.num_roots();
        let g = Gradient3 { d1: DVector::zeros(alg.rank), d2: DVector::zeros(alg.rank), d: y.clone() };
        let lin = g.to_coord_grad(&alg);
        Quadratic3 { alg, quad: DMatrix::zeros(len, len), lin }
    }

    /// `φ = (Y, λ)` for fixed `Y ∈ 𝔥`.
    pub fn pairing_l(alg: std::sync::Arc<LieAlgebraData>, y: &DVector<f64>) -> Self {
        let n = alg.rank;
        let len = 3 * n + alg.num_roots();
        let mut lin = DVector::zeros(len);
        lin.rows_mut(n, n).copy_from(y);
        Quadratic3 { alg, quad: DMatrix::zeros(len, len), lin }
    }
}

impl SmoothFunction3 for Quadratic3 {
    fn eval(&self, pt: &Point3) -> f64 {
        let v = pt.to_coords();
        0.5 * v.dot(&(&self.quad * &v)) + self.lin.dot(&v)
    }

    fn grad(&self, pt: &Point3) -> Gradient3 {
        let v = pt.to_coords();
        Gradient3::from_coord_grad(&self.alg, &(&self.quad * v + &self.lin))
    }
}

/// Pointwise product of two functions.
pub struct Product3<'a> {
    pub f: &'a dyn SmoothFunction3,
    pub g: &'a dyn SmoothFunction3,
}

impl SmoothFunction3 for Product3<'_> {
    fn eval(&self, pt: &Point3) -> f64 {
        self.f.eval(pt) * self.g.eval(pt)
    }

    fn grad(&self, pt: &Point3) -> Gradient3 {
        let (fv, gv) = (self.f.eval(pt), self.g.eval(pt));
        self.f.grad(pt).scale(gv).add(&self.g.grad(pt).scale(fv))
    }
}

/// `Pr₃* f` with `f(X) = tr(X^k)/k`, an ad-invariant function.
#[derive(Debug, Clone)]
pub struct TracePower {
    pub alg: std::sync::Arc<LieAlgebraData>,
    pub k: u32,
}

impl TracePower {
    /// `df(X)`: the traceless part of `X^{k−1}`.
    pub fn differential(&self, x: &GElement) -> GElement {
        let m = x.to_matrix(&self.alg);
        GElement::from_matrix(&self.alg, &mat_pow(&m, self.k - 1))
    }
}

fn mat_pow(m: &DMatrix<f64>, k: u32) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out *= m;
    }
    out
}

impl SmoothFunction3 for TracePower {
    fn eval(&self, pt: &Point3) -> f64 {
        mat_pow(&pt.x.to_matrix(&self.alg), self.k).trace() / self.k as f64
    }

    fn grad(&self, pt: &Point3) -> Gradient3 {
        let n = self.alg.rank;
        Gradient3 { d1: DVector::zeros(n), d2: DVector::zeros(n), d: self.differential(&pt.x) }
    }
}

/// A function given by a closure, with gradients from 5-point central
/// differences. Used for nested brackets in the Jacobi check.
pub struct NumericFunction3<'a> {
    pub alg: &'a LieAlgebraData,
    pub f: Box<dyn Fn(&Point3) -> f64 + 'a>,
    pub h: f64,
}

impl SmoothFunction3 for NumericFunction3<'_> {
    fn eval(&self, pt: &Point3) -> f64 {
        (self.f)(pt)
    }

    fn grad(&self, pt: &Point3) -> Gradient3 {
        Gradient3::from_coord_grad(self.alg, &fd_coord_grad(self, pt, self.h))
    }
}

// ---------------------------------------------------------------------------
// Brackets on AΓ

fn as_g(alg: &LieAlgebraData, h: &DVector<f64>) -> GElement {
    GElement::from_cartan(alg, h)
}

/// Lie-Poisson bracket on the dual of the algebroid attached to R:
///
/// ```text
/// {φ,ψ} = (dR(q)(λ)δφ, δψ) + (X, [Rδφ − δ₂φ, δψ] − [Rδψ − δ₂ψ, δφ])
///         + (δ₁ψ, Π_𝔥δφ) − (δ₁φ, Π_𝔥δψ)
/// ```
pub fn bracket_agamma(
    r: &RFamily,
    f: &dyn SmoothFunction3,
    g: &dyn SmoothFunction3,
    pt: &Point3,
) -> Result<f64> {
    let alg = r.alg();
    r.check_domain(&pt.q)?;
    let (gf, gg) = (f.grad(pt), g.grad(pt));
    // dR(q)(λ) is skew; writing the pairing in skew form makes {φ,φ} = 0 in floating point.
    let t1 = 0.5
        * (form(alg, &dr_apply(r, &pt.q, &pt.l, &gf.d)?, &gg.d) - form(alg, &dr_apply(r, &pt.q, &pt.l, &gg.d)?, &gf.d));
    let u = r_apply(r, &pt.q, &gf.d)? - as_g(alg, &gf.d2);
    let v = r_apply(r, &pt.q, &gg.d)? - as_g(alg, &gg.d2);
    let inner = bracket_unchecked(alg, &u, &gg.d) - bracket_unchecked(alg, &v, &gf.d);
    let t2 = form(alg, &pt.x, &inner);
    let t3 = gg.d1.dot(&gf.d.h) - gf.d1.dot(&gg.d.h);
    Ok(t1 + t2 + t3)
}

/// Hamiltonian vector field on AΓ:
///
/// ```text
/// q̇ = Π_𝔥δφ,  λ̇ = −Π_𝔥[X, δφ],
/// Ẋ = [X, Rδφ − δ₂φ] + dR(q)(λ)δφ − δ₁φ − R(q)[X, δφ]
/// ```
pub fn ham_vf_agamma(r: &RFamily, f: &dyn SmoothFunction3, pt: &Point3) -> Result<Tangent3> {
    let alg = r.alg();
    r.check_domain(&pt.q)?;
    let gf = f.grad(pt);
    let xd = bracket_unchecked(alg, &pt.x, &gf.d);
    let u = r_apply(r, &pt.q, &gf.d)? - as_g(alg, &gf.d2);
    let mut dx = bracket_unchecked(alg, &pt.x, &u);
    dx += &dr_apply(r, &pt.q, &pt.l, &gf.d)?;
    dx.h -= &gf.d1;
    dx -= &r_apply(r, &pt.q, &xd)?;
    Ok(Tangent3 { dq: gf.d.h.clone(), dl: -xd.h, dx })
}

/// `⟨dR(q)(λ)(df₁(X)), df₂(X)⟩` for ad-invariant `f₁, f₂`.
pub fn invariant_bracket(r: &RFamily, f1: &TracePower, f2: &TracePower, pt: &Point3) -> Result<f64> {
    let alg = r.alg();
    let d1 = f1.differential(&pt.x);
    let d2 = f2.differential(&pt.x);
    Ok(form(alg, &dr_apply(r, &pt.q, &pt.l, &d1)?, &d2))
}

// ---------------------------------------------------------------------------
// Product bracket on T*U × 𝔤* for the spin Calogero-Moser variables

/// `{φ,ψ} = (δ₂φ, δ₁ψ) − (δ₁φ, δ₂ψ) + (ξ, [δφ, δψ])` at `(q, p, ξ)`.
pub fn bracket_product(
    alg: &LieAlgebraData,
    f: &dyn SmoothFunction3,
    g: &dyn SmoothFunction3,
    pt: &Point3,
) -> f64 {
    let (gf, gg) = (f.grad(pt), g.grad(pt));
    gf.d2.dot(&gg.d1) - gf.d1.dot(&gg.d2) + form(alg, &pt.x, &bracket_unchecked(alg, &gf.d, &gg.d))
}

/// `q̇ = δ₂φ, ṗ = −δ₁φ, ξ̇ = [ξ, δφ]`.
pub fn ham_vf_product(alg: &LieAlgebraData, f: &dyn SmoothFunction3, pt: &Point3) -> Tangent3 {
    let gf = f.grad(pt);
    Tangent3 { dq: gf.d2, dl: -gf.d1, dx: bracket_unchecked(alg, &pt.x, &gf.d) }
}

// ---------------------------------------------------------------------------
// Semi-direct bracket on S* for the Toda variables (x, p, η)

fn split(x: &GElement) -> (GElement, GElement) {
    let mut h = x.clone();
    h.roots.fill(0.0);
    let mut perp = x.clone();
    perp.h.fill(0.0);
    (h, perp)
}

/// `{φ,ψ} = (δ₁ψ, δ₂φ) − (δ₁φ, δ₂ψ) + (η, [Π_𝔥δφ, Π_⊥δψ] + [Π_⊥δφ, Π_𝔥δψ])`.
pub fn bracket_sstar(
    alg: &LieAlgebraData,
    f: &dyn SmoothFunction3,
    g: &dyn SmoothFunction3,
    pt: &Point3,
) -> f64 {
    let (gf, gg) = (f.grad(pt), g.grad(pt));
    let (fh, fp) = split(&gf.d);
    let (gh, gp) = split(&gg.d);
    let inner = bracket_unchecked(alg, &fh, &gp) + bracket_unchecked(alg, &fp, &gh);
    gg.d1.dot(&gf.d2) - gf.d1.dot(&gg.d2) + form(alg, &pt.x, &inner)
}

/// `ẋ = δ₂φ, ṗ = −δ₁φ, η̇ = [η, Π_𝔥δφ] + Π_𝔥[η, δφ]`.
pub fn ham_vf_sstar(alg: &LieAlgebraData, f: &dyn SmoothFunction3, pt: &Point3) -> Tangent3 {
    let gf = f.grad(pt);
    let (fh, _) = split(&gf.d);
    let mut dx = bracket_unchecked(alg, &pt.x, &fh);
    dx.h += bracket_unchecked(alg, &pt.x, &gf.d).h;
    Tangent3 { dq: gf.d2, dl: -gf.d1, dx }
}

// ---------------------------------------------------------------------------
// Bracket on the dual bundle 𝐀 of the constant r-matrix

/// `{φ,ψ} = (η, [𝐑δφ − δ₂φ, δψ] + [δφ, 𝐑δψ − δ₂ψ]) + (δ₁ψ, Π_𝔥δφ) − (δ₁φ, Π_𝔥δψ)`.
pub fn bracket_bold_a(
    alg: &LieAlgebraData,
    f: &dyn SmoothFunction3,
    g: &dyn SmoothFunction3,
    pt: &Point3,
) -> f64 {
    let (gf, gg) = (f.grad(pt), g.grad(pt));
    let u = const_r_apply(alg, &gf.d) - as_g(alg, &gf.d2);
    let v = const_r_apply(alg, &gg.d) - as_g(alg, &gg.d2);
    let inner = bracket_unchecked(alg, &u, &gg.d) + bracket_unchecked(alg, &gf.d, &v);
    form(alg, &pt.x, &inner) + gg.d1.dot(&gf.d.h) - gf.d1.dot(&gg.d.h)
}

/// Vector field of the 𝐀 bracket (the AΓ field with 𝐑 and no dR term).
pub fn ham_vf_bold_a(alg: &LieAlgebraData, f: &dyn SmoothFunction3, pt: &Point3) -> Tangent3 {
    let gf = f.grad(pt);
    let xd = bracket_unchecked(alg, &pt.x, &gf.d);
    let u = const_r_apply(alg, &gf.d) - as_g(alg, &gf.d2);
    let mut dx = bracket_unchecked(alg, &pt.x, &u);
    dx.h -= &gf.d1;
    dx -= &const_r_apply(alg, &xd);
    Tangent3 { dq: gf.d.h.clone(), dl: -xd.h, dx }
}

/// A bracket evaluated at a point, as used by [`jacobi_residual`].
pub type PointBracket<'a> =
    dyn Fn(&dyn SmoothFunction3, &dyn SmoothFunction3, &Point3) -> f64 + 'a;

/// `{f,{g,h}} + {g,{h,f}} + {h,{f,g}}` at `pt`. The inner brackets are
/// differentiated by 5-point central differences with step `fd_step`.
pub fn jacobi_residual(
    alg: &LieAlgebraData,
    br: &PointBracket<'_>,
    f: &dyn SmoothFunction3,
    g: &dyn SmoothFunction3,
    h: &dyn SmoothFunction3,
    pt: &Point3,
    fd_step: f64,
) -> f64 {
    let term = |outer: &dyn SmoothFunction3, a: &dyn SmoothFunction3, b: &dyn SmoothFunction3| {
        let nested = NumericFunction3 { alg, f: Box::new(|p: &Point3| br(a, b, p)), h: fd_step };
        br(outer, &nested, pt)
    };
    term(f, g, h) + term(g, h, f) + term(h, f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::{build_algebra, Series};
    use crate::sample;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup(rank: usize, pi: &[usize], seed: u64) -> (RFamily, Point3, ChaCha8Rng) {
        let alg = Arc::new(build_algebra(Series::A, rank).unwrap());
        let r = RFamily::new(alg, pi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pt = Point3::new(
            sample::chamber_point(r.alg(), &mut rng, 0.3, 2.0),
            sample::cartan(r.alg(), &mut rng, 1.0),
            sample::element(r.alg(), &mut rng, 1.0),
        );
        (r, pt, rng)
    }

    #[test]
    fn quadratic_partials_match_differences() {
        let (r, pt, mut rng) = setup(2, &[0, 1], 1);
        let f = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
        assert!(check_partials(r.alg(), &f, &pt, 1e-3) < 1e-7);
        let tp = TracePower { alg: r.algebra.clone(), k: 3 };
        assert!(check_partials(r.alg(), &tp, &pt, 1e-3) < 1e-7);
        let g = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
        let p = Product3 { f: &f, g: &g };
        assert!(check_partials(r.alg(), &p, &pt, 1e-3) < 1e-7);
    }

    #[test]
    fn antisymmetry_exact_on_diagonal() {
        let (r, pt, mut rng) = setup(2, &[0], 2);
        let f = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
        assert_eq!(bracket_agamma(&r, &f, &f, &pt).unwrap(), 0.0);
        assert_eq!(bracket_bold_a(r.alg(), &f, &f, &pt), 0.0);
        assert_eq!(bracket_sstar(r.alg(), &f, &f, &pt), 0.0);
    }

    #[test]
    fn functions_of_q_commute() {
        let (r, pt, mut rng) = setup(3, &[0, 2], 3);
        let mask = SlotMask { q: true, l: false, x: false };
        let f = Quadratic3::random(r.algebra.clone(), &mut rng, mask, 1.0);
        let g = Quadratic3::random(r.algebra.clone(), &mut rng, mask, 1.0);
        assert_eq!(bracket_agamma(&r, &f, &g, &pt).unwrap(), 0.0);
        assert_eq!(bracket_bold_a(r.alg(), &f, &g, &pt), 0.0);
    }

    #[test]
    fn cartan_l_functions_commute_at_zero_lambda() {
        // φ = (Y, λ), ψ = (Y′, λ): only δ₂ is nonzero and [𝔥, 𝔥] = 0.
        let (r, mut pt, mut rng) = setup(2, &[0, 1], 4);
        pt.l.fill(0.0);
        let y1 = sample::cartan(r.alg(), &mut rng, 1.0);
        let y2 = sample::cartan(r.alg(), &mut rng, 1.0);
        let f = Quadratic3::pairing_l(r.algebra.clone(), &y1);
        let g = Quadratic3::pairing_l(r.algebra.clone(), &y2);
        assert!(bracket_agamma(&r, &f, &g, &pt).unwrap().abs() < 1e-15);
    }

    #[test]
    fn half_norm_vector_field() {
        // φ = ½(X, X): field (Π_𝔥X, 0, [X, RX] + dR(λ)X)
        let (r, mut pt, _) = setup(2, &[0, 1], 5);
        struct HalfNorm(Arc<LieAlgebraData>);
        impl SmoothFunction3 for HalfNorm {
            fn eval(&self, pt: &Point3) -> f64 {
                0.5 * form(&self.0, &pt.x, &pt.x)
            }
            fn grad(&self, pt: &Point3) -> Gradient3 {
                let n = self.0.rank;
                Gradient3 { d1: DVector::zeros(n), d2: DVector::zeros(n), d: pt.x.clone() }
            }
        }
        let f = HalfNorm(r.algebra.clone());
        let alg = r.alg();
        let vf = ham_vf_agamma(&r, &f, &pt).unwrap();
        let rx = r_apply(&r, &pt.q, &pt.x).unwrap();
        let expect = bracket_unchecked(alg, &pt.x, &rx) + dr_apply(&r, &pt.q, &pt.l, &pt.x).unwrap();
        assert!((vf.dx - expect).max_abs() < 1e-13);
        assert_eq!(vf.dq, pt.x.h);
        assert!(vf.dl.amax() < 1e-14);

        pt.l.fill(0.0);
        let vf = ham_vf_agamma(&r, &f, &pt).unwrap();
        let rx = r_apply(&r, &pt.q, &pt.x).unwrap();
        assert!((vf.dx - bracket_unchecked(alg, &pt.x, &rx)).max_abs() < 1e-13);
    }

    #[test]
    fn lambda_only_function_fixes_q() {
        let (r, pt, mut rng) = setup(2, &[0], 6);
        let y = sample::cartan(r.alg(), &mut rng, 1.0);
        let f = Quadratic3::pairing_l(r.algebra.clone(), &y);
        let vf = ham_vf_agamma(&r, &f, &pt).unwrap();
        assert_eq!(vf.dq.amax(), 0.0);
    }

    #[test]
    fn canonical_pairs_in_sstar() {
        let (r, pt, _) = setup(3, &[0, 1, 2], 7);
        let n = r.alg().rank;
        for i in 0..n {
            for j in 0..n {
                let xi = Quadratic3::coordinate(r.algebra.clone(), i);
                let pj = Quadratic3::coordinate(r.algebra.clone(), n + j);
                // {p_j, x_i} = δ_ij with ẋ = δ₂φ, hence {x_i, p_j} = −δ_ij
                let d = if i == j { 1.0 } else { 0.0 };
                assert_eq!(bracket_sstar(r.alg(), &pj, &xi, &pt), d);
                assert_eq!(bracket_sstar(r.alg(), &xi, &pj, &pt), -d);
            }
        }
    }

    #[test]
    fn sstar_h_gradients_commute() {
        let (r, pt, mut rng) = setup(2, &[0, 1], 8);
        let f = Quadratic3::pairing_x(r.algebra.clone(), &GElement::from_cartan(r.alg(), &sample::cartan(r.alg(), &mut rng, 1.0)));
        let g = Quadratic3::pairing_x(r.algebra.clone(), &GElement::from_cartan(r.alg(), &sample::cartan(r.alg(), &mut rng, 1.0)));
        assert_eq!(bracket_sstar(r.alg(), &f, &g, &pt), 0.0);
    }

    #[test]
    fn bold_a_functions_of_x_commute() {
        let (r, pt, mut rng) = setup(3, &[1], 9);
        let mask = SlotMask { q: true, l: false, x: false };
        let f = Quadratic3::random(r.algebra.clone(), &mut rng, mask, 1.0);
        let g = Quadratic3::random(r.algebra.clone(), &mut rng, mask, 1.0);
        assert_eq!(bracket_bold_a(r.alg(), &f, &g, &pt), 0.0);
    }

    #[test]
    fn momentum_map_generates_cartan_action() {
        // ⟨𝐉, Z⟩ = (−Π_𝔥η, Z) = −(Z, X) with Z ∈ 𝔥
        let (r, pt, mut rng) = setup(3, &[0, 1], 10);
        let z = sample::cartan(r.alg(), &mut rng, 1.0);
        let f = Quadratic3::pairing_x(r.algebra.clone(), &GElement::from_cartan(r.alg(), &(-z.clone())));
        let vf = ham_vf_sstar(r.alg(), &f, &pt);
        assert_eq!(vf.dq.amax(), 0.0);
        assert_eq!(vf.dl.amax(), 0.0);
        let expect = bracket_unchecked(r.alg(), &pt.x, &GElement::from_cartan(r.alg(), &(-z)));
        assert!((vf.dx - expect).max_abs() < 1e-14);
    }

    #[test]
    fn invariant_bracket_special_cases() {
        let (r, mut pt, _) = setup(2, &[0, 1], 11);
        let f1 = TracePower { alg: r.algebra.clone(), k: 2 };
        let f2 = TracePower { alg: r.algebra.clone(), k: 3 };
        assert!(invariant_bracket(&r, &f1, &f2, &pt).unwrap().abs() > 1e-6);
        pt.l.fill(0.0);
        assert_eq!(invariant_bracket(&r, &f1, &f2, &pt).unwrap(), 0.0);

        let (r0, pt0, _) = setup(2, &[], 11);
        let f1 = TracePower { alg: r0.algebra.clone(), k: 2 };
        let f2 = TracePower { alg: r0.algebra.clone(), k: 3 };
        assert_eq!(invariant_bracket(&r0, &f1, &f2, &pt0).unwrap(), 0.0);
    }

    #[test]
    fn jacobi_for_all_brackets() {
        for (seed, rank, pi) in [(21u64, 1usize, vec![0usize]), (22, 2, vec![0]), (23, 2, vec![0, 1])] {
            let (r, pt, mut rng) = setup(rank, &pi, seed);
            let alg = r.alg();
            let f = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
            let g = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
            let h = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
            let ag = |a: &dyn SmoothFunction3, b: &dyn SmoothFunction3, p: &Point3| {
                bracket_agamma(&r, a, b, p).unwrap()
            };
            let ss = |a: &dyn SmoothFunction3, b: &dyn SmoothFunction3, p: &Point3| bracket_sstar(alg, a, b, p);
            let ba = |a: &dyn SmoothFunction3, b: &dyn SmoothFunction3, p: &Point3| bracket_bold_a(alg, a, b, p);
            let pr = |a: &dyn SmoothFunction3, b: &dyn SmoothFunction3, p: &Point3| bracket_product(alg, a, b, p);
            for br in [&ag as &PointBracket, &ss, &ba, &pr] {
                let j = jacobi_residual(alg, br, &f, &g, &h, &pt, 1e-3);
                assert!(j.abs() < 1e-7, "rank {rank}: {j:e}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn vector_fields_reproduce_brackets(seed in any::<u64>(), rank in 1usize..=3, mask in 0u32..8) {
            let pi: Vec<usize> = (0..rank).filter(|i| mask & (1 << i) != 0).collect();
            let (r, pt, mut rng) = setup(rank, &pi, seed);
            let alg = r.alg();
            let f = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
            let g = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
            let gg = g.grad(&pt);
            let b = bracket_agamma(&r, &f, &g, &pt).unwrap();
            let d = directional(alg, &gg, &ham_vf_agamma(&r, &f, &pt).unwrap());
            prop_assert!((b - d).abs() < 1e-8 * (1.0 + b.abs()));
            let b = bracket_sstar(alg, &f, &g, &pt);
            let d = directional(alg, &gg, &ham_vf_sstar(alg, &f, &pt));
            prop_assert!((b - d).abs() < 1e-8 * (1.0 + b.abs()));
            let b = bracket_bold_a(alg, &f, &g, &pt);
            let d = directional(alg, &gg, &ham_vf_bold_a(alg, &f, &pt));
            prop_assert!((b - d).abs() < 1e-8 * (1.0 + b.abs()));
            let b = bracket_product(alg, &f, &g, &pt);
            let d = directional(alg, &gg, &ham_vf_product(alg, &f, &pt));
            prop_assert!((b - d).abs() < 1e-8 * (1.0 + b.abs()));
        }

        #[test]
        fn antisymmetry_and_leibniz(seed in any::<u64>(), rank in 1usize..=3) {
            let pi: Vec<usize> = (0..rank).collect();
            let (r, pt, mut rng) = setup(rank, &pi, seed);
            let alg = r.alg();
            let f = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
            let g = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
            let h = Quadratic3::random(r.algebra.clone(), &mut rng, SlotMask::ALL, 1.0);
            let gh = Product3 { f: &g, g: &h };
            type B<'a> = Box<dyn Fn(&dyn SmoothFunction3, &dyn SmoothFunction3) -> f64 + 'a>;
            let brackets: Vec<B> = vec![
                Box::new(|a, b| bracket_agamma(&r, a, b, &pt).unwrap()),
                Box::new(|a, b| bracket_sstar(alg, a, b, &pt)),
                Box::new(|a, b| bracket_bold_a(alg, a, b, &pt)),
                Box::new(|a, b| bracket_product(alg, a, b, &pt)),
            ];
            for br in &brackets {
                prop_assert!((br(&f, &g) + br(&g, &f)).abs() < 1e-9);
                let lhs = br(&f, &gh);
                let rhs = br(&f, &g) * h.eval(&pt) + g.eval(&pt) * br(&f, &h);
                prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
            }
        }
    }
}
