//! Root systems, Chevalley bases and the invariant form for split real simple
//! Lie algebras.
//!
//! Only type A is realized. Everything else in the crate talks to the algebra
//! through [`LieAlgebraData`], so another series only needs a new constructor
//! that fills the same tables.
//!
//! Conventions for sl(n), n = rank + 1:
//! - the invariant form is the trace form `(X, Y) = tr(XY)`;
//! - `e_α = E_ij` for `α = ε_i − ε_j`, so `(e_α, e_{-α}) = 1`;
//! - `H_α = E_ii − E_jj` is form-dual to `α`, and `[e_α, e_{-α}] = H_α`;
//! - the Cartan basis is orthonormal:
//!   `x_k = diag(1,…,1,−k,0,…,0)/√(k(k+1))`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point of the Cartan subalgebra, in coordinates on the orthonormal basis
/// `x_i`. Also used for momenta and other 𝔥-valued quantities.
pub type CartanPoint = DVector<f64>;

/// Root coordinates in the simple-root basis.
pub type Root = Vec<i32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Series {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl FromStr for Series {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Series::A),
            "B" => Ok(Series::B),
            "C" => Ok(Series::C),
            "D" => Ok(Series::D),
            "E" => Ok(Series::E),
            "F" => Ok(Series::F),
            "G" => Ok(Series::G),
            _ => Err(Error::UnknownTag(s.to_string())),
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

/// Structure constant entry: `[e_a, e_b] = coeff · e_sum`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureConstant {
    pub sum: usize,
    pub coeff: f64,
}

#[derive(Debug, Clone)]
pub struct LieAlgebraData {
    pub series: Series,
    /// Number of simple roots N.
    pub rank: usize,
    /// Size of the defining representation (N + 1 for type A).
    pub rep_dim: usize,
    /// Positive roots ordered by height then lexicographically descending,
    /// followed by the negatives in the same order.
    pub roots: Vec<Root>,
    /// Indices into `roots` of α_1, …, α_N.
    pub simple_roots: Vec<usize>,
    /// `A_ik = α_k(h_{α_i})`.
    pub cartan_matrix: DMatrix<i32>,
    pub cartan_inverse: DMatrix<f64>,
    /// Orthonormal Cartan basis, as defining-representation matrices.
    pub h_basis: Vec<DMatrix<f64>>,
    /// `e_α` in the defining representation, indexed like `roots`.
    pub root_vectors: Vec<DMatrix<f64>>,
    /// `H_α` in coordinates on `h_basis`, indexed like `roots`.
    pub coroots: Vec<DVector<f64>>,
    /// `structure_constants[a][b]` is `Some` iff `α_a + α_b` is a root.
    pub structure_constants: Vec<Vec<Option<StructureConstant>>>,
    /// Gram matrix of the form on the basis (x_1..x_N, e_α in root order).
    pub form_gram: DMatrix<f64>,
    n_pos: usize,
    positions: Vec<(usize, usize)>,
    heights: Vec<i32>,
    index: HashMap<Root, usize>,
    /// Row k holds the diagonal of x_k.
    h_diag: DMatrix<f64>,
}

/// Builds the algebra tables. Only series A is implemented.
pub fn build_algebra(series: Series, rank: usize) -> Result<LieAlgebraData> {
    match series {
        Series::A if rank >= 1 => Ok(build_type_a(rank)),
        _ => Err(Error::UnsupportedAlgebra { series: series.to_string(), rank }),
    }
}

fn build_type_a(rank: usize) -> LieAlgebraData {
    let n = rank + 1;

    let mut pos_pairs: Vec<(usize, usize)> = Vec::new();
    for h in 1..n {
        for i in 0..n - h {
            pos_pairs.push((i, i + h));
        }
    }
    let n_pos = pos_pairs.len();
    let mut roots = Vec::with_capacity(2 * n_pos);
    let mut positions = Vec::with_capacity(2 * n_pos);
    for &(i, j) in &pos_pairs {
        let mut c = vec![0; rank];
        for ck in c.iter_mut().take(j).skip(i) {
            *ck = 1;
        }
        roots.push(c);
        positions.push((i, j));
    }
    for k in 0..n_pos {
        roots.push(roots[k].iter().map(|c| -c).collect());
        let (i, j) = positions[k];
        positions.push((j, i));
    }
    let heights = roots.iter().map(|r| r.iter().sum()).collect();
    let index: HashMap<Root, usize> =
        roots.iter().enumerate().map(|(a, r)| (r.clone(), a)).collect();
    let simple_roots: Vec<usize> = (0..rank).collect();

    let mut h_diag = DMatrix::zeros(rank, n);
    for k in 0..rank {
        let m = (k + 1) as f64;
        let norm = (m * (m + 1.0)).sqrt();
        for i in 0..=k {
            h_diag[(k, i)] = 1.0 / norm;
        }
        h_diag[(k, k + 1)] = -m / norm;
    }
    let h_basis = (0..rank)
        .map(|k| DMatrix::from_diagonal(&h_diag.row(k).transpose()))
        .collect();

    let root_vectors = positions
        .iter()
        .map(|&(i, j)| {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e
        })
        .collect();
    let coroots = positions
        .iter()
        .map(|&(i, j)| h_diag.column(i) - h_diag.column(j))
        .collect();

    // [E_ij, E_kl] = δ_jk E_il − δ_li E_kj
    let nr = 2 * n_pos;
    let mut structure_constants = vec![vec![None; nr]; nr];
    let pos_index: HashMap<(usize, usize), usize> =
        positions.iter().enumerate().map(|(a, &p)| (p, a)).collect();
    for a in 0..nr {
        let (i, j) = positions[a];
        for b in 0..nr {
            let (k, l) = positions[b];
            if j == k && i != l {
                structure_constants[a][b] =
                    Some(StructureConstant { sum: pos_index[&(i, l)], coeff: 1.0 });
            } else if l == i && k != j {
                structure_constants[a][b] =
                    Some(StructureConstant { sum: pos_index[&(k, j)], coeff: -1.0 });
            }
        }
    }

    let mut cartan_matrix = DMatrix::zeros(rank, rank);
    for i in 0..rank {
        for k in 0..rank {
            cartan_matrix[(i, k)] = match (i as i64 - k as i64).abs() {
                0 => 2,
                1 => -1,
                _ => 0,
            };
        }
    }
    let cartan_inverse = cartan_matrix
        .map(|v| v as f64)
        .try_inverse()
        .expect("type A Cartan matrix is invertible");

    let dim = rank + nr;
    let mut form_gram = DMatrix::zeros(dim, dim);
    for k in 0..rank {
        form_gram[(k, k)] = 1.0;
    }
    for a in 0..nr {
        let b = (a + n_pos) % nr;
        form_gram[(rank + a, rank + b)] = 1.0;
    }

    LieAlgebraData {
        series: Series::A,
        rank,
        rep_dim: n,
        roots,
        simple_roots,
        cartan_matrix,
        cartan_inverse,
        h_basis,
        root_vectors,
        coroots,
        structure_constants,
        form_gram,
        n_pos,
        positions,
        heights,
        index,
        h_diag,
    }
}

impl LieAlgebraData {
    /// Dimension of 𝔤.
    pub fn dim(&self) -> usize {
        self.rank + self.roots.len()
    }

    pub fn num_roots(&self) -> usize {
        self.roots.len()
    }

    pub fn num_positive(&self) -> usize {
        self.n_pos
    }

    pub fn is_positive(&self, a: usize) -> bool {
        a < self.n_pos
    }

    pub fn positive_roots(&self) -> std::ops::Range<usize> {
        0..self.n_pos
    }

    /// Index of `−α_a`.
    pub fn neg(&self, a: usize) -> usize {
        (a + self.n_pos) % self.roots.len()
    }

    /// Level `l(α)`: sum of simple-root coordinates (negative on Δ⁻).
    pub fn height(&self, a: usize) -> i32 {
        self.heights[a]
    }

    pub fn root_index(&self, coords: &[i32]) -> Option<usize> {
        self.index.get(coords).copied()
    }

    /// Matrix position (i, j) with `e_α = E_ij`.
    pub fn position(&self, a: usize) -> (usize, usize) {
        self.positions[a]
    }

    /// `α_a(h)` for `h` in Cartan coordinates.
    pub fn alpha_of(&self, a: usize, h: &DVector<f64>) -> f64 {
        self.coroots[a].dot(h)
    }

    /// Config-file key of a root, e.g. `"1,1"` or `"-1,0"`.
    pub fn root_key(&self, a: usize) -> String {
        self.roots[a].iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    }

    /// Resolves a root key against this algebra.
    pub fn root_from_key(&self, key: &str) -> Result<usize> {
        let coords = parse_root_key(key)?;
        if coords.len() != self.rank {
            return Err(Error::RootKey(key.to_string()));
        }
        self.root_index(&coords).ok_or_else(|| Error::RootKey(key.to_string()))
    }

    /// Coefficients on `h_basis` of a diagonal matrix given by its diagonal.
    /// The trace part is dropped.
    pub fn cartan_from_diag(&self, d: &DVector<f64>) -> DVector<f64> {
        &self.h_diag * d
    }

    /// Diagonal of the defining-representation matrix of `h`.
    pub fn diag_of_cartan(&self, h: &DVector<f64>) -> DVector<f64> {
        self.h_diag.transpose() * h
    }

    /// `exp(h)` for `h ∈ 𝔥`, as a diagonal matrix.
    pub fn torus_matrix(&self, h: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.diag_of_cartan(h).map(f64::exp))
    }

    /// `Ad_{exp(h)} x` for `h ∈ 𝔥`: scales `e_α` by `e^{α(h)}`.
    pub fn ad_torus(&self, h: &DVector<f64>, x: &GElement) -> GElement {
        let mut out = x.clone();
        for a in 0..self.num_roots() {
            out.roots[a] *= self.alpha_of(a, h).exp();
        }
        out
    }

    pub fn check(&self, x: &GElement) -> Result<()> {
        if x.h.len() != self.rank {
            return Err(Error::Dimension { expected: self.rank, got: x.h.len() });
        }
        if x.roots.len() != self.num_roots() {
            return Err(Error::Dimension { expected: self.num_roots(), got: x.roots.len() });
        }
        Ok(())
    }

    pub fn check_cartan(&self, h: &DVector<f64>) -> Result<()> {
        if h.len() != self.rank {
            return Err(Error::Dimension { expected: self.rank, got: h.len() });
        }
        Ok(())
    }
}

/// Parses a root key such as `"1,1"`, `"-1,0"` or `"0, 1"`.
pub fn parse_root_key(key: &str) -> Result<Root> {
    if key.trim().is_empty() {
        return Err(Error::RootKey(key.to_string()));
    }
    key.split(',')
        .map(|t| t.trim().parse::<i32>().map_err(|_| Error::RootKey(key.to_string())))
        .collect()
}

/// An element of 𝔤: Cartan coordinates on `x_i` plus root coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GElement {
    pub h: DVector<f64>,
    pub roots: DVector<f64>,
}

impl GElement {
    pub fn zeros(alg: &LieAlgebraData) -> Self {
        GElement { h: DVector::zeros(alg.rank), roots: DVector::zeros(alg.num_roots()) }
    }

    pub fn from_cartan(alg: &LieAlgebraData, h: &DVector<f64>) -> Self {
        GElement { h: h.clone(), roots: DVector::zeros(alg.num_roots()) }
    }

    pub fn root_vector(alg: &LieAlgebraData, a: usize) -> Self {
        let mut x = Self::zeros(alg);
        x.roots[a] = 1.0;
        x
    }

    /// Coefficient `x_α = (x, e_{-α})`.
    pub fn coeff(&self, a: usize) -> f64 {
        self.roots[a]
    }

    pub fn to_matrix(&self, alg: &LieAlgebraData) -> DMatrix<f64> {
        let d = alg.diag_of_cartan(&self.h);
        let mut m = DMatrix::from_diagonal(&d);
        for a in 0..alg.num_roots() {
            let (i, j) = alg.position(a);
            m[(i, j)] = self.roots[a];
        }
        m
    }

    /// Orthogonal projection of a matrix onto sl(n), read off in coordinates.
    pub fn from_matrix(alg: &LieAlgebraData, m: &DMatrix<f64>) -> Self {
        let d = m.diagonal();
        let h = alg.cartan_from_diag(&d);
        let roots = DVector::from_iterator(
            alg.num_roots(),
            (0..alg.num_roots()).map(|a| {
                let (i, j) = alg.position(a);
                m[(i, j)]
            }),
        );
        GElement { h, roots }
    }

    pub fn norm(&self) -> f64 {
        (self.h.norm_squared() + self.roots.norm_squared()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.h.amax().max(self.roots.amax())
    }

    pub fn scale(&self, s: f64) -> Self {
        GElement { h: &self.h * s, roots: &self.roots * s }
    }
}

impl Add for GElement {
    type Output = GElement;
    fn add(self, o: GElement) -> GElement {
        GElement { h: self.h + o.h, roots: self.roots + o.roots }
    }
}

impl<'a> Add<&'a GElement> for &'a GElement {
    type Output = GElement;
    fn add(self, o: &GElement) -> GElement {
        GElement { h: &self.h + &o.h, roots: &self.roots + &o.roots }
    }
}

impl Sub for GElement {
    type Output = GElement;
    fn sub(self, o: GElement) -> GElement {
        GElement { h: self.h - o.h, roots: self.roots - o.roots }
    }
}

impl<'a> Sub<&'a GElement> for &'a GElement {
    type Output = GElement;
    fn sub(self, o: &GElement) -> GElement {
        GElement { h: &self.h - &o.h, roots: &self.roots - &o.roots }
    }
}

impl AddAssign<&GElement> for GElement {
    fn add_assign(&mut self, o: &GElement) {
        self.h += &o.h;
        self.roots += &o.roots;
    }
}

impl SubAssign<&GElement> for GElement {
    fn sub_assign(&mut self, o: &GElement) {
        self.h -= &o.h;
        self.roots -= &o.roots;
    }
}

impl Neg for GElement {
    type Output = GElement;
    fn neg(self) -> GElement {
        GElement { h: -self.h, roots: -self.roots }
    }
}

impl Mul<f64> for GElement {
    type Output = GElement;
    fn mul(self, s: f64) -> GElement {
        GElement { h: self.h * s, roots: self.roots * s }
    }
}

impl Mul<f64> for &GElement {
    type Output = GElement;
    fn mul(self, s: f64) -> GElement {
        self.scale(s)
    }
}

/// Invariant form `(x, y) = Σ x_i y_i + Σ_α x_α y_{-α}`.
pub fn form(alg: &LieAlgebraData, x: &GElement, y: &GElement) -> f64 {
    let mut s = x.h.dot(&y.h);
    for a in 0..alg.num_roots() {
        s += x.roots[a] * y.roots[alg.neg(a)];
    }
    s
}

/// Lie bracket evaluated from the structure constants.
pub fn bracket(alg: &LieAlgebraData, x: &GElement, y: &GElement) -> Result<GElement> {
    alg.check(x)?;
    alg.check(y)?;
    Ok(bracket_unchecked(alg, x, y))
}

pub(crate) fn bracket_unchecked(alg: &LieAlgebraData, x: &GElement, y: &GElement) -> GElement {
    let nr = alg.num_roots();
    let mut out = GElement::zeros(alg);
    for a in 0..nr {
        let ax = alg.alpha_of(a, &x.h);
        let ay = alg.alpha_of(a, &y.h);
        out.roots[a] += ax * y.roots[a] - ay * x.roots[a];
    }
    // Unordered pairs, so that [x, x] = 0 holds exactly in floating point.
    for a in 0..nr {
        for b in a + 1..nr {
            let c = x.roots[a] * y.roots[b] - x.roots[b] * y.roots[a];
            if c == 0.0 {
                continue;
            }
            if b == alg.neg(a) {
                out.h.axpy(c, &alg.coroots[a], 1.0);
            } else if let Some(sc) = alg.structure_constants[a][b] {
                out.roots[sc.sum] += sc.coeff * c;
            }
        }
    }
    out
}

/// Π_𝔥: keeps the Cartan part.
pub fn project_h(x: &GElement) -> GElement {
    GElement { h: x.h.clone(), roots: DVector::zeros(x.roots.len()) }
}

/// Π_{𝔥⊥}: keeps the root part.
pub fn project_h_perp(x: &GElement) -> GElement {
    GElement { h: DVector::zeros(x.h.len()), roots: x.roots.clone() }
}

/// `w = Σ_{α∈Δ⁺} H_α/(α,α)`, so that `α(w)` is the level of `α`.
pub fn weyl_vector_w(alg: &LieAlgebraData) -> CartanPoint {
    let mut w = DVector::zeros(alg.rank);
    for a in alg.positive_roots() {
        let len2 = alg.coroots[a].norm_squared();
        w.axpy(1.0 / len2, &alg.coroots[a], 1.0);
    }
    w
}

/// `h_{α_i} = 2 H_{α_i}/(α_i, α_i)` for the i-th simple root.
pub fn simple_coroot(alg: &LieAlgebraData, i: usize) -> DVector<f64> {
    let a = alg.simple_roots[i];
    &alg.coroots[a] * (2.0 / alg.coroots[a].norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a * b - b * a
    }

    #[test]
    fn sl2_tables() {
        let alg = build_algebra(Series::A, 1).unwrap();
        assert_eq!(alg.roots, vec![vec![1], vec![-1]]);
        assert_eq!(alg.dim(), 3);
        let h = GElement::from_cartan(&alg, &alg.coroots[0]).to_matrix(&alg);
        assert!((h - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]))).amax() < 1e-15);
    }

    #[test]
    fn sl3_cartan_data() {
        let alg = build_algebra(Series::A, 2).unwrap();
        assert_eq!(alg.num_roots(), 6);
        assert_eq!(alg.cartan_matrix, DMatrix::from_row_slice(2, 2, &[2, -1, -1, 2]));
        // Independent inverse of [[2,-1],[-1,2]]: adj/det with det 3.
        let expect = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert!((&alg.cartan_inverse - expect).amax() < 1e-15);
        let id = alg.cartan_matrix.map(|v| v as f64) * &alg.cartan_inverse;
        assert!((id - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn cartan_matrix_from_coroots() {
        for rank in 1..=4 {
            let alg = build_algebra(Series::A, rank).unwrap();
            for i in 0..rank {
                for k in 0..rank {
                    let v = alg.alpha_of(alg.simple_roots[k], &simple_coroot(&alg, i));
                    assert!((v - alg.cartan_matrix[(i, k)] as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unsupported_series() {
        assert!(matches!(
            build_algebra(Series::E, 8),
            Err(Error::UnsupportedAlgebra { .. })
        ));
        assert!(build_algebra(Series::A, 0).is_err());
    }

    #[test]
    fn root_order_and_keys() {
        let alg = build_algebra(Series::A, 2).unwrap();
        let keys: Vec<String> = (0..6).map(|a| alg.root_key(a)).collect();
        assert_eq!(keys, ["1,0", "0,1", "1,1", "-1,0", "0,-1", "-1,-1"]);
        assert_eq!(alg.root_from_key(" 1, 1").unwrap(), 2);
        assert!(alg.root_from_key("1,-1").is_err());
        assert!(alg.root_from_key("1").is_err());
        assert!(parse_root_key("").is_err());
        assert!(parse_root_key("a,1").is_err());
    }

    #[test]
    fn chevalley_relations() {
        for rank in 1..=4 {
            let alg = build_algebra(Series::A, rank).unwrap();
            for a in 0..alg.num_roots() {
                let e = GElement::root_vector(&alg, a);
                let f = GElement::root_vector(&alg, alg.neg(a));
                let br = bracket(&alg, &e, &f).unwrap();
                assert_eq!(br, GElement::from_cartan(&alg, &alg.coroots[a]));
                assert_eq!(form(&alg, &e, &f), 1.0);
                // matrix-level duality as well
                let tr = (alg.root_vectors[a].clone() * &alg.root_vectors[alg.neg(a)]).trace();
                assert_eq!(tr, 1.0);
            }
            for i in 0..rank {
                for j in 0..rank {
                    let tr = (alg.h_basis[i].clone() * &alg.h_basis[j]).trace();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((tr - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn cartan_acts_by_roots() {
        let alg = build_algebra(Series::A, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = sample::cartan(&alg, &mut rng, 1.0);
        let hx = GElement::from_cartan(&alg, &h);
        for a in 0..alg.num_roots() {
            let e = GElement::root_vector(&alg, a);
            let br = bracket(&alg, &hx, &e).unwrap();
            let expect = e.scale(alg.alpha_of(a, &h));
            assert!((br - expect).max_abs() < 1e-14);
        }
    }

    #[test]
    fn structure_constants_closure() {
        for rank in 1..=4 {
            let alg = build_algebra(Series::A, rank).unwrap();
            let nr = alg.num_roots();
            for a in 0..nr {
                for b in 0..nr {
                    let sum: Root =
                        alg.roots[a].iter().zip(&alg.roots[b]).map(|(x, y)| x + y).collect();
                    let is_root = alg.root_index(&sum);
                    match (is_root, alg.structure_constants[a][b]) {
                        (Some(c), Some(sc)) => {
                            assert_eq!(c, sc.sum);
                            assert!(sc.coeff != 0.0);
                            let ba = alg.structure_constants[b][a].unwrap();
                            assert_eq!(ba.coeff, -sc.coeff);
                        }
                        (None, None) => {
                            if b != alg.neg(a) {
                                let m = commutator(&alg.root_vectors[a], &alg.root_vectors[b]);
                                assert_eq!(m.amax(), 0.0);
                            }
                        }
                        other => panic!("closure mismatch {other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn weyl_vector_levels() {
        let alg = build_algebra(Series::A, 1).unwrap();
        let w = weyl_vector_w(&alg);
        assert!((alg.alpha_of(0, &w) - 1.0).abs() < 1e-14);

        let alg = build_algebra(Series::A, 2).unwrap();
        let w = weyl_vector_w(&alg);
        let top = alg.root_from_key("1,1").unwrap();
        assert!((alg.alpha_of(top, &w) - 2.0).abs() < 1e-14);

        let alg = build_algebra(Series::A, 3).unwrap();
        let w = weyl_vector_w(&alg);
        for a in 0..alg.num_roots() {
            let brute: i32 = alg.roots[a].iter().sum();
            assert!((alg.alpha_of(a, &w) - brute as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn coroot_duality() {
        for rank in 1..=4 {
            let alg = build_algebra(Series::A, rank).unwrap();
            for a in 0..alg.num_roots() {
                for k in 0..rank {
                    let hk = GElement::from_cartan(&alg, &DVector::from_fn(rank, |i, _| (i == k) as u8 as f64));
                    let ha = GElement::from_cartan(&alg, &alg.coroots[a]);
                    let xk = DVector::from_fn(rank, |i, _| (i == k) as u8 as f64);
                    assert!((form(&alg, &ha, &hk) - alg.alpha_of(a, &xk)).abs() < 1e-12);
                    // α(x_k) read from the matrices: [x_k, e_α] = α(x_k) e_α
                    let m = commutator(&alg.h_basis[k], &alg.root_vectors[a]);
                    let (i, j) = alg.position(a);
                    assert!((m[(i, j)] - alg.alpha_of(a, &xk)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn projections_split() {
        let alg = build_algebra(Series::A, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sample::element(&alg, &mut rng, 1.0);
        assert_eq!(project_h(&x) + project_h_perp(&x), x);
        let h = GElement::from_cartan(&alg, &x.h);
        assert_eq!(project_h_perp(&h), GElement::zeros(&alg));
        let e = GElement::root_vector(&alg, 0);
        assert_eq!(project_h(&e), GElement::zeros(&alg));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn bracket_matches_commutator(seed in any::<u64>(), rank in 1usize..=4) {
            let alg = build_algebra(Series::A, rank).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = sample::element(&alg, &mut rng, 1.0);
            let y = sample::element(&alg, &mut rng, 1.0);
            let br = bracket(&alg, &x, &y).unwrap().to_matrix(&alg);
            let cm = commutator(&x.to_matrix(&alg), &y.to_matrix(&alg));
            prop_assert!((br - cm).amax() < 1e-12);
        }

        #[test]
        fn matrix_round_trip(seed in any::<u64>(), rank in 1usize..=4) {
            let alg = build_algebra(Series::A, rank).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = sample::element(&alg, &mut rng, 2.0);
            let back = GElement::from_matrix(&alg, &x.to_matrix(&alg));
            prop_assert!((back - x).max_abs() < 1e-12);
        }

        #[test]
        fn form_is_ad_invariant(seed in any::<u64>(), rank in 1usize..=4) {
            let alg = build_algebra(Series::A, rank).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = sample::element(&alg, &mut rng, 1.0);
            let y = sample::element(&alg, &mut rng, 1.0);
            let z = sample::element(&alg, &mut rng, 1.0);
            let lhs = form(&alg, &bracket(&alg, &x, &y).unwrap(), &z)
                + form(&alg, &y, &bracket(&alg, &x, &z).unwrap());
            prop_assert!(lhs.abs() < 1e-10);
            // form agrees with the trace of the defining representation
            let tr = (x.to_matrix(&alg) * y.to_matrix(&alg)).trace();
            prop_assert!((tr - form(&alg, &x, &y)).abs() < 1e-12);
        }

        #[test]
        fn jacobi_identity(seed in any::<u64>(), rank in 1usize..=4) {
            let alg = build_algebra(Series::A, rank).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = sample::element(&alg, &mut rng, 1.0);
            let y = sample::element(&alg, &mut rng, 1.0);
            let z = sample::element(&alg, &mut rng, 1.0);
            let b = |u: &GElement, v: &GElement| bracket(&alg, u, v).unwrap();
            let j = b(&b(&x, &y), &z) + b(&b(&y, &z), &x) + b(&b(&z, &x), &y);
            prop_assert!(j.max_abs() < 1e-10);
        }

        #[test]
        fn ad_torus_matches_conjugation(seed in any::<u64>(), rank in 1usize..=3) {
            let alg = build_algebra(Series::A, rank).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = sample::cartan(&alg, &mut rng, 0.5);
            let x = sample::element(&alg, &mut rng, 1.0);
            let g = alg.torus_matrix(&h);
            let ginv = alg.torus_matrix(&-&h);
            let conj = GElement::from_matrix(&alg, &(&g * x.to_matrix(&alg) * ginv));
            prop_assert!((conj - alg.ad_torus(&h, &x)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a2 = build_algebra(Series::A, 2).unwrap();
        let a1 = build_algebra(Series::A, 1).unwrap();
        let x = GElement::zeros(&a2);
        let y = GElement::zeros(&a1);
        assert!(matches!(bracket(&a2, &x, &y), Err(Error::Dimension { .. })));
    }
}
