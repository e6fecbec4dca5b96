//! Seeded random inputs for tests, verify suites and randomized runs.

use nalgebra::DVector;
use rand::Rng;

use crate::liealg::{CartanPoint, GElement, LieAlgebraData};

pub fn cartan<R: Rng>(alg: &LieAlgebraData, rng: &mut R, scale: f64) -> CartanPoint {
    DVector::from_fn(alg.rank, |_, _| rng.gen_range(-scale..scale))
}

pub fn element<R: Rng>(alg: &LieAlgebraData, rng: &mut R, scale: f64) -> GElement {
    GElement {
        h: DVector::from_fn(alg.rank, |_, _| rng.gen_range(-scale..scale)),
        roots: DVector::from_fn(alg.num_roots(), |_, _| rng.gen_range(-scale..scale)),
    }
}

/// Element of 𝔥⊥ (zero Cartan part).
pub fn root_element<R: Rng>(alg: &LieAlgebraData, rng: &mut R, scale: f64) -> GElement {
    let mut x = element(alg, rng, scale);
    x.h.fill(0.0);
    x
}

/// A point in the open Weyl chamber whose simple-root values lie in
/// `[min_gap, max_gap]`, so every root value is bounded away from zero.
pub fn chamber_point<R: Rng>(
    alg: &LieAlgebraData,
    rng: &mut R,
    min_gap: f64,
    max_gap: f64,
) -> CartanPoint {
    let n = alg.rep_dim;
    let mut d: DVector<f64> = DVector::zeros(n);
    for i in 1..n {
        d[i] = d[i - 1] - rng.gen_range(min_gap..max_gap);
    }
    let mean = d.mean();
    d.add_scalar_mut(-mean);
    alg.cartan_from_diag(&d)
}

/// Root-space spin with every simple-root coefficient in `[lo, hi]` (positive)
/// and the remaining root coefficients in `[-scale, scale]`.
pub fn chart_spin<R: Rng>(
    alg: &LieAlgebraData,
    rng: &mut R,
    lo: f64,
    hi: f64,
    scale: f64,
) -> GElement {
    let mut x = root_element(alg, rng, scale);
    for &a in &alg.simple_roots {
        x.roots[a] = rng.gen_range(lo..hi);
    }
    x
}
