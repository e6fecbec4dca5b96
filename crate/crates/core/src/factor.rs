//! Exact solutions by factorization.
//!
//! Spin CM on the zero momentum level: `e^{tL₀} = g(t) n₊(t)⁻¹` in the
//! parabolic chart of π′, an eigendecomposition `g(t)e^{q₀} = x d x⁻¹` in the
//! Levi factor continued along the path, `q = log d`, and the torus correction
//! `k₊ = x·b`. Spin Toda: the full Gauss decomposition `e^{t𝐋₀} = n₋ h n₊⁻¹`.
//!
//! Group elements are matrices of the defining representation. Torus elements
//! are stored either as Cartan points (logarithms) or as diagonals.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynr::{r_pm_apply, RFamily, Sign};
use crate::error::{Error, Result};
use crate::liealg::{CartanPoint, GElement, LieAlgebraData};
use crate::models::{
    g_of_xi, lax_l, lift_reduced_toda, reduce_spin, toda_lax_pair, ReducedState, ReducedTodaState,
    SpinCMState, TodaState, Trajectory,
};

// ---------------------------------------------------------------------------
// Exponential and logarithm

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0,
    3960.0, 90.0, 1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0, 10559470521600.0, 670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
];
const THETA: [f64; 5] = [
    1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1, 2.097847961257068e0,
    5.371920351148152e0,
];

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    let mut pow = DMatrix::identity(n, n);
    for j in 0..b.len() / 2 {
        u += &pow * b[2 * j + 1];
        v += &pow * b[2 * j];
        pow = &pow * &a2;
    }
    (a * u, v)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE13;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_in = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (a * u_in, v)
}

/// Matrix exponential by Padé approximation with scaling and squaring.
pub fn mat_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "mat_exp needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    let nrm = norm1(m);
    let mut s = 0;
    let (u, v) = if nrm <= THETA[0] {
        pade_low(m, &PADE3)
    } else if nrm <= THETA[1] {
        pade_low(m, &PADE5)
    } else if nrm <= THETA[2] {
        pade_low(m, &PADE7)
    } else if nrm <= THETA[3] {
        pade_low(m, &PADE9)
    } else {
        if nrm > THETA[4] {
            s = (nrm / THETA[4]).log2().ceil() as i32;
        }
        pade13(&(m / 2f64.powi(s)))
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is singular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `log d` for a positive diagonal `d` with unit product, as a Cartan point.
pub fn cartan_log(alg: &LieAlgebraData, d: &DVector<f64>) -> Result<CartanPoint> {
    if d.len() != alg.rep_dim {
        return Err(Error::Dimension { expected: alg.rep_dim, got: d.len() });
    }
    if let Some(v) = d.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Branch(format!("diagonal entry {v} has no real logarithm")));
    }
    let logs = d.map(f64::ln);
    if logs.sum().abs() > 1e-10 {
        return Err(Error::Precondition(format!("torus element has determinant {}", logs.sum().exp())));
    }
    Ok(alg.cartan_from_diag(&logs))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone().try_inverse().ok_or_else(|| Error::Precondition("singular matrix".into()))
}

// ---------------------------------------------------------------------------
// Gauss decompositions

/// `m = n₋ · diag(h) · n₊⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussFactors {
    pub n_minus: DMatrix<f64>,
    pub h: DVector<f64>,
    pub n_plus: DMatrix<f64>,
}

/// LDU elimination without pivoting. A pivot below `1e-12·max|m|` means a
/// leading principal minor vanishes.
pub fn gauss_full(m: &DMatrix<f64>) -> Result<GaussFactors> {
    let n = m.nrows();
    if !m.is_square() {
        return Err(Error::Dimension { expected: n, got: m.ncols() });
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let mut a = m.clone();
    let mut l = DMatrix::identity(n, n);
    for k in 0..n {
        let piv = a[(k, k)];
        if piv.abs() <= 1e-12 * scale || !piv.is_finite() {
            return Err(Error::BigCell { minor: k + 1, pivot: piv });
        }
        for i in k + 1..n {
            let f = a[(i, k)] / piv;
            l[(i, k)] = f;
            for j in k..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    let h = a.diagonal();
    let mut u = a.clone();
    for i in 0..n {
        for j in 0..n {
            u[(i, j)] = if j < i { 0.0 } else { a[(i, j)] / h[i] };
        }
    }
    let n_plus = u.solve_upper_triangular(&DMatrix::identity(n, n)).expect("unit triangular");
    Ok(GaussFactors { n_minus: l, h, n_plus })
}

/// Block structure of the defining representation induced by π′: indices i
/// and i+1 share a block exactly when α_{i+1} ∈ π′.
#[derive(Debug, Clone)]
pub struct ParabolicChart {
    pub algebra: Arc<LieAlgebraData>,
    pub pi_prime: Vec<usize>,
    pub blocks: Vec<Range<usize>>,
    block_index: Vec<usize>,
}

impl ParabolicChart {
    pub fn new(algebra: Arc<LieAlgebraData>, pi_prime: &[usize]) -> Self {
        let n = algebra.rep_dim;
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 0..n {
            if i + 1 == n || !pi_prime.contains(&i) {
                blocks.push(start..i + 1);
                start = i + 1;
            }
        }
        let mut block_index = vec![0; n];
        for (b, r) in blocks.iter().enumerate() {
            for i in r.clone() {
                block_index[i] = b;
            }
        }
        let mut pi_prime = pi_prime.to_vec();
        pi_prime.sort_unstable();
        ParabolicChart { algebra, pi_prime, blocks, block_index }
    }

    pub fn from_family(r: &RFamily) -> Self {
        Self::new(r.algebra.clone(), &r.pi_prime)
    }

    /// The Borel chart (π′ = ∅): every block has size one.
    pub fn borel(algebra: Arc<LieAlgebraData>) -> Self {
        Self::new(algebra, &[])
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.block_index[i]
    }

    /// Block-diagonal part (the 𝔤_{π′} / G_{π′} component).
    pub fn block_diag(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            if self.block_of(i) == self.block_of(j) {
                m[(i, j)]
            } else {
                0.0
            }
        })
    }

    fn max_where(&self, m: &DMatrix<f64>, keep: impl Fn(usize, usize) -> bool) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if keep(self.block_of(i), self.block_of(j)) && m[(i, j)].abs() > worst.0 {
                    worst = (m[(i, j)].abs(), i, j);
                }
            }
        }
        worst
    }

    /// Largest entry outside the block-upper-triangular pattern (𝔭⁺, P⁺).
    pub fn p_plus_violation(&self, m: &DMatrix<f64>) -> f64 {
        self.max_where(m, |bi, bj| bi > bj).0
    }

    /// Largest entry outside the block-lower-triangular pattern (𝔭⁻, P⁻).
    pub fn p_minus_violation(&self, m: &DMatrix<f64>) -> f64 {
        self.max_where(m, |bi, bj| bi < bj).0
    }

    /// Largest off-block-diagonal entry (𝔤_{π′}, G_{π′}).
    pub fn levi_violation(&self, m: &DMatrix<f64>) -> f64 {
        self.max_where(m, |bi, bj| bi != bj).0
    }

    /// Distance from N⁺: off-pattern entries and the deviation of the
    /// diagonal blocks from the identity.
    pub fn n_plus_violation(&self, m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        let d = self.block_diag(m) - DMatrix::<f64>::identity(n, n);
        self.p_plus_violation(m).max(d.amax())
    }
}

/// `m = g · n₊⁻¹` with `g` block diagonal and `n₊` block unipotent upper.
pub fn gauss_parabolic(m: &DMatrix<f64>, chart: &ParabolicChart) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = chart.algebra.rep_dim;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension { expected: n, got: m.nrows() });
    }
    let scale = max_abs(m).max(1.0);
    let (v, i, j) = chart.max_where(m, |bi, bj| bi > bj);
    if v > 1e-10 * scale {
        return Err(Error::Pattern { row: i, col: j, value: m[(i, j)] });
    }
    let g = chart.block_diag(m);
    for (b, r) in chart.blocks.iter().enumerate() {
        let blk = g.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let det = blk.determinant();
        let bscale = blk.amax().max(f64::MIN_POSITIVE).powi(r.len() as i32);
        if det.abs() <= 1e-12 * bscale || !det.is_finite() {
            return Err(Error::SingularBlock { block: b });
        }
    }
    let ginv = inverse(&g)?;
    let n_plus = inverse(&(&ginv * m))?;
    Ok((g, n_plus))
}

// ---------------------------------------------------------------------------
// Eigendecomposition along a path in the Levi factor

#[derive(Debug, Clone, PartialEq)]
pub struct EigPath {
    /// Eigenvector matrices, block diagonal, unit columns, `x[0] = I`.
    pub x: Vec<DMatrix<f64>>,
    /// Eigenvalues, `d[0]` the diagonal of `e^{q₀}`.
    pub d: Vec<DVector<f64>>,
}

fn null_vector(b: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let n = b.nrows();
    let shifted = b - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let k = svd.singular_values.imin();
    vt.row(k).transpose().normalize()
}

/// Eigen-decomposition of one block, continued from `prev` (unit columns).
fn continue_block(b: &DMatrix<f64>, prev: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = b.nrows();
    if m == 1 {
        if !(b[(0, 0)] > 0.0) {
            return Err(Error::PathBreakdown(format!("eigenvalue {} is not positive", b[(0, 0)])));
        }
        return Ok((DMatrix::identity(1, 1), DVector::from_element(1, b[(0, 0)])));
    }
    let ev = b.clone().complex_eigenvalues();
    let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut lam = Vec::with_capacity(m);
    for z in ev.iter() {
        if z.im.abs() > 1e-9 * scale {
            return Err(Error::PathBreakdown(format!("complex eigenvalue {z}")));
        }
        if !(z.re > 0.0) {
            return Err(Error::PathBreakdown(format!("eigenvalue {} is not positive", z.re)));
        }
        lam.push(z.re);
    }
    lam.sort_by(f64::total_cmp);
    for w in lam.windows(2) {
        if w[1] - w[0] <= 1e-9 * scale {
            return Err(Error::PathBreakdown(format!("eigenvalues collide near {}", w[0])));
        }
    }
    let vecs: Vec<DVector<f64>> = lam.iter().map(|&l| null_vector(b, l)).collect();
    // Greedy maximal-overlap matching against the previous columns.
    let mut overlap = DMatrix::from_fn(m, m, |i, j| prev.column(i).dot(&vecs[j]).abs());
    let mut assign = vec![usize::MAX; m];
    for _ in 0..m {
        let (mut bi, mut bj, mut bv) = (0, 0, -1.0);
        for i in 0..m {
            for j in 0..m {
                if overlap[(i, j)] > bv {
                    (bi, bj, bv) = (i, j, overlap[(i, j)]);
                }
            }
        }
        if bv < 0.5 {
            return Err(Error::PathBreakdown("eigenvector continuation lost track".into()));
        }
        assign[bi] = bj;
        for k in 0..m {
            overlap[(bi, k)] = -1.0;
            overlap[(k, bj)] = -1.0;
        }
    }
    let mut x = DMatrix::zeros(m, m);
    let mut d = DVector::zeros(m);
    for i in 0..m {
        let mut v = vecs[assign[i]].clone();
        if prev.column(i).dot(&v) < 0.0 {
            v = -v;
        }
        x.set_column(i, &v);
        d[i] = lam[assign[i]];
    }
    Ok((x, d))
}

/// Continues `g(t)e^{q₀} = x d x⁻¹` along `g_path`. On failure returns the
/// valid prefix together with the index and error of the first bad sample.
pub fn levi_eig_path_partial(
    g_path: &[DMatrix<f64>],
    q0: &CartanPoint,
    chart: &ParabolicChart,
) -> (EigPath, Option<(usize, Error)>) {
    let alg = &chart.algebra;
    let n = alg.rep_dim;
    let eq0 = alg.diag_of_cartan(q0).map(f64::exp);
    let mut out = EigPath { x: Vec::new(), d: Vec::new() };
    let mut prev = DMatrix::identity(n, n);
    for (k, g) in g_path.iter().enumerate() {
        let b = DMatrix::from_fn(n, n, |i, j| g[(i, j)] * eq0[j]);
        let mut x = DMatrix::zeros(n, n);
        let mut d = DVector::zeros(n);
        for r in &chart.blocks {
            let len = r.len();
            let blk = b.view((r.start, r.start), (len, len)).into_owned();
            let pblk = prev.view((r.start, r.start), (len, len)).into_owned();
            match continue_block(&blk, &pblk) {
                Ok((xb, db)) => {
                    x.view_mut((r.start, r.start), (len, len)).copy_from(&xb);
                    d.rows_mut(r.start, len).copy_from(&db);
                }
                Err(e) => return (out, Some((k, e))),
            }
        }
        prev = x.clone();
        out.x.push(x);
        out.d.push(d);
    }
    (out, None)
}

pub fn levi_eig_path(g_path: &[DMatrix<f64>], q0: &CartanPoint, chart: &ParabolicChart) -> Result<EigPath> {
    match levi_eig_path_partial(g_path, q0, chart) {
        (p, None) => Ok(p),
        (_, Some((_, e))) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// Torus correction b(t)

/// Diagonals of `b(t) = exp{½(q(t) − q₀) − ∫₀ᵗ diag(x⁻¹ẋ) dτ}` and the
/// Richardson estimate of the quadrature error.
#[derive(Debug, Clone, PartialEq)]
pub struct BCorrection {
    pub b: Vec<DVector<f64>>,
    pub estimate: Option<f64>,
}

fn check_uniform(grid: &[f64]) -> Result<f64> {
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(Error::Precondition("grid must start at t = 0".into()));
    }
    if grid.len() == 1 {
        return Ok(0.0);
    }
    let h = grid[1] - grid[0];
    if !(h > 0.0) {
        return Err(Error::Precondition("grid must be increasing".into()));
    }
    for (k, t) in grid.iter().enumerate() {
        if (t - k as f64 * h).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::Precondition("grid must be uniform".into()));
        }
    }
    Ok(h)
}

/// Fourth-order derivative of a uniformly sampled sequence (≥ 5 samples).
fn derivative<T>(f: &[T], h: f64) -> Vec<T>
where
    T: Clone + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = f.len();
    assert!(n >= 5, "five-point stencils need five samples");
    let c = 1.0 / (12.0 * h);
    let lin = |w: [f64; 5], s: usize| -> T {
        let mut acc = f[s].clone() * w[0];
        for (i, wi) in w.iter().enumerate().skip(1) {
            acc = acc + f[s + i].clone() * *wi;
        }
        acc * c
    };
    (0..n)
        .map(|k| match k {
            0 => lin([-25.0, 48.0, -36.0, 16.0, -3.0], 0),
            1 => lin([-3.0, -10.0, 18.0, -6.0, 1.0], 0),
            _ if k + 2 < n => lin([1.0, -8.0, 0.0, 8.0, -1.0], k - 2),
            _ if k + 2 == n => lin([-1.0, 6.0, -18.0, 10.0, 3.0], n - 5),
            _ => lin([3.0, -16.0, 36.0, -48.0, 25.0], n - 5),
        })
        .collect()
}

/// Cumulative integral: Simpson on even indices, a three-point rule for the
/// last interval at odd indices.
fn cumulative_simpson(f: &[DVector<f64>], h: f64) -> Vec<DVector<f64>> {
    let n = f.len();
    let mut out = vec![DVector::zeros(f[0].len()); n];
    for k in 1..n {
        out[k] = if k % 2 == 0 {
            &out[k - 2] + (&f[k - 2] + &f[k - 1] * 4.0 + &f[k]) * (h / 3.0)
        } else if k == 1 {
            (&f[0] * 5.0 + &f[1] * 8.0 - &f[2]) * (h / 12.0)
        } else {
            &out[k - 1] + (&f[k] * 5.0 + &f[k - 1] * 8.0 - &f[k - 2]) * (h / 12.0)
        };
    }
    out
}

fn diag_integrand(x: &[DMatrix<f64>], h: f64) -> Result<Vec<DVector<f64>>> {
    let xd = derivative(x, h);
    x.iter()
        .zip(&xd)
        .map(|(xk, dk)| {
            let xi = inverse(xk)?;
            Ok((xi * dk).diagonal())
        })
        .collect()
}

pub fn b_correction(
    alg: &LieAlgebraData,
    x_path: &[DMatrix<f64>],
    q_path: &[CartanPoint],
    q0: &CartanPoint,
    grid: &[f64],
    tolerance: f64,
) -> Result<BCorrection> {
    let h = check_uniform(grid)?;
    let n = grid.len();
    if x_path.len() != n || q_path.len() != n {
        return Err(Error::Dimension { expected: n, got: x_path.len().min(q_path.len()) });
    }
    if n < 5 {
        return Err(Error::Precondition("b correction needs at least five samples".into()));
    }
    let integral = cumulative_simpson(&diag_integrand(x_path, h)?, h);
    let mut estimate = None;
    if n >= 9 {
        let coarse: Vec<DMatrix<f64>> = x_path.iter().step_by(2).cloned().collect();
        let ic = cumulative_simpson(&diag_integrand(&coarse, 2.0 * h)?, 2.0 * h);
        let diff = ic.iter().enumerate().map(|(k, v)| (v - &integral[2 * k]).amax()).fold(0.0, f64::max);
        let est = diff / 15.0;
        if est > tolerance {
            return Err(Error::Accuracy { estimate: est, tolerance });
        }
        estimate = Some(est);
    }
    let dq0 = alg.diag_of_cartan(q0);
    let b = q_path
        .iter()
        .zip(&integral)
        .map(|(q, i)| ((alg.diag_of_cartan(q) - &dq0) * 0.5 - i).map(f64::exp))
        .collect();
    Ok(BCorrection { b, estimate })
}

// ---------------------------------------------------------------------------
// Solvers

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Largest internal step for the eigenvector path and the quadrature.
    pub max_step: f64,
    /// Tolerance on the Richardson estimate of the b(t) quadrature.
    pub quadrature_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_step: 2e-3, quadrature_tol: 1e-9 }
    }
}

/// Per-sample consistency checks of an exact solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleDiagnostics {
    /// `max|e^{tL₀} − k₊k₋⁻¹|`.
    pub factorization: f64,
    /// `max|λ⁺(k₋) − e^{q₀}λ⁻(k₊)e^{−q}|` with `k₋ = e^{−tL₀}k₊`, plus its
    /// distance from P⁺.
    pub theta: f64,
    /// `max|Ad_{k₊⁻¹}L₀ − Ad_{k₋⁻¹}L₀|`.
    pub conjugation: f64,
    /// Root-part mismatch between `Ad_{k₊⁻¹}L₀` and the Lax operator rebuilt
    /// from the output state.
    pub lax: f64,
}

impl SampleDiagnostics {
    pub fn worst(&self) -> f64 {
        self.factorization.max(self.theta).max(self.conjugation).max(self.lax)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorPath {
    pub grid: Vec<f64>,
    pub k_plus: Vec<DMatrix<f64>>,
    pub k_minus: Vec<DMatrix<f64>>,
    pub q_path: Vec<CartanPoint>,
    pub diagnostics: Vec<SampleDiagnostics>,
}

impl FactorPath {
    fn new() -> Self {
        FactorPath { grid: vec![], k_plus: vec![], k_minus: vec![], q_path: vec![], diagnostics: vec![] }
    }

    pub fn worst(&self) -> SampleDiagnostics {
        let mut w = SampleDiagnostics::default();
        for d in &self.diagnostics {
            w.factorization = w.factorization.max(d.factorization);
            w.theta = w.theta.max(d.theta);
            w.conjugation = w.conjugation.max(d.conjugation);
            w.lax = w.lax.max(d.lax);
        }
        w
    }
}

/// Where and why a solver stopped before the end of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Horizon {
    pub t: f64,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactRun<S> {
    pub trajectory: Trajectory<S>,
    pub path: FactorPath,
    pub horizon: Option<Horizon>,
    pub quadrature_estimate: Option<f64>,
}

/// Everything the spin CM pipeline produces at the output samples.
struct SpinCore {
    times: Vec<f64>,
    q: Vec<CartanPoint>,
    k_plus: Vec<DMatrix<f64>>,
    n_plus: Vec<DMatrix<f64>>,
    horizon: Option<Horizon>,
    estimate: Option<f64>,
}

fn internal_grid(grid: &[f64], opts: &SolverOptions) -> Result<(f64, usize, usize)> {
    let h_out = check_uniform(grid)?;
    let intervals = grid.len() - 1;
    let mut sub = ((h_out / opts.max_step).ceil() as usize).max(1);
    if sub % 2 == 1 {
        sub += 1;
    }
    while intervals * sub < 8 {
        sub += 2;
    }
    Ok((h_out / sub as f64, sub, intervals * sub))
}

fn spin_core(r: &RFamily, q0: &CartanPoint, l0: &DMatrix<f64>, grid: &[f64], opts: &SolverOptions) -> Result<SpinCore> {
    let alg = r.alg();
    let chart = ParabolicChart::from_family(r);
    let (h, sub, n_int) = internal_grid(grid, opts)?;

    let mut g_path = Vec::with_capacity(n_int + 1);
    let mut n_path = Vec::with_capacity(n_int + 1);
    let mut failure: Option<(usize, Error)> = None;
    for k in 0..=n_int {
        let t = k as f64 * h;
        match gauss_parabolic(&mat_exp(&(l0 * t)), &chart) {
            Ok((g, np)) => {
                g_path.push(g);
                n_path.push(np);
            }
            Err(e) => {
                failure = Some((k, e));
                break;
            }
        }
    }
    let (eig, eig_fail) = levi_eig_path_partial(&g_path, q0, &chart);
    if let Some(f) = eig_fail {
        failure = Some(f);
    }
    let mut q_path = Vec::with_capacity(eig.d.len());
    for (k, d) in eig.d.iter().enumerate() {
        match cartan_log(alg, d) {
            Ok(q) => q_path.push(q),
            Err(e) => {
                failure = Some((k, e));
                break;
            }
        }
    }
    let valid = q_path.len();
    let horizon = failure.map(|(k, e)| Horizon { t: k as f64 * h, error: e.at(k as f64 * h) });

    let mut out = SpinCore { times: vec![], q: vec![], k_plus: vec![], n_plus: vec![], horizon, estimate: None };
    if valid < 5 {
        // Too short for the stencils: only the initial sample is reliable.
        out.times.push(0.0);
        out.q.push(q0.clone());
        out.k_plus.push(DMatrix::identity(alg.rep_dim, alg.rep_dim));
        out.n_plus.push(DMatrix::identity(alg.rep_dim, alg.rep_dim));
        return Ok(out);
    }
    let igrid: Vec<f64> = (0..valid).map(|k| k as f64 * h).collect();
    let bc = b_correction(alg, &eig.x[..valid], &q_path, q0, &igrid, opts.quadrature_tol)?;
    out.estimate = bc.estimate;
    for k in (0..valid).step_by(sub) {
        out.times.push(grid[k / sub]);
        out.q.push(q_path[k].clone());
        let kp = &eig.x[k] * DMatrix::from_diagonal(&bc.b[k]);
        out.k_plus.push(kp);
        out.n_plus.push(n_path[k].clone());
    }
    Ok(out)
}

fn ad_inv(k: &DMatrix<f64>, kinv: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    kinv * m * k
}

/// Diagnostics shared by the CM solvers.
fn spin_diagnostics(
    alg: &LieAlgebraData,
    chart: &ParabolicChart,
    t: f64,
    l0: &DMatrix<f64>,
    q0: &CartanPoint,
    q: &CartanPoint,
    kp: &DMatrix<f64>,
    np: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, SampleDiagnostics)> {
    let eq0 = alg.torus_matrix(q0);
    let eqm = alg.torus_matrix(&-q);
    let kpi = inverse(kp)?;
    let km = np * &eq0 * kp * &eqm;
    let kmi = inverse(&km)?;
    let etl = mat_exp(&(l0 * t));
    let factorization = max_abs(&(&etl - kp * &kmi));
    let km_direct = mat_exp(&(l0 * -t)) * kp;
    let theta = max_abs(&(chart.block_diag(&km_direct) - &eq0 * kp * &eqm))
        .max(chart.p_plus_violation(&km_direct));
    let lp = ad_inv(kp, &kpi, l0);
    let conjugation = max_abs(&(&lp - ad_inv(&km, &kmi, l0)));
    Ok((km, SampleDiagnostics { factorization, theta, conjugation, lax: 0.0 }))
}

fn check_zero_level(xi: &GElement) -> Result<()> {
    if xi.h.amax() > 1e-12 * (1.0 + xi.roots.amax()) {
        return Err(Error::Precondition("exact solver needs Π_𝔥ξ₀ = 0".into()));
    }
    Ok(())
}

/// Spin CM flow on the zero momentum level by factorization.
pub fn solve_spin_cm(r: &RFamily, st0: &SpinCMState, grid: &[f64], opts: &SolverOptions) -> Result<ExactRun<SpinCMState>> {
    let alg = r.alg();
    alg.check(&st0.xi)?;
    check_zero_level(&st0.xi)?;
    r.check_domain(&st0.q)?;
    check_uniform(grid)?;
    let l0e = lax_l(r, st0)?;
    let l0 = l0e.to_matrix(alg);
    let xi0 = st0.xi.to_matrix(alg);
    let chart = ParabolicChart::from_family(r);

    if grid.len() == 1 {
        return Ok(trivial_run(st0.clone(), alg, &st0.q));
    }
    let core = spin_core(r, &st0.q, &l0, grid, opts)?;
    let mut traj = Trajectory::new();
    let mut path = FactorPath::new();
    let mut horizon = core.horizon.clone();
    for k in 0..core.times.len() {
        let t = core.times[k];
        let (q, kp) = (&core.q[k], &core.k_plus[k]);
        let (km, mut diag) = spin_diagnostics(alg, &chart, t, &l0, &st0.q, q, kp, &core.n_plus[k])?;
        let kpi = inverse(kp)?;
        let xi = GElement::from_matrix(alg, &ad_inv(kp, &kpi, &xi0));
        let lt = GElement::from_matrix(alg, &ad_inv(kp, &kpi, &l0));
        let st = SpinCMState { q: q.clone(), p: lt.h.clone(), xi };
        match lax_l(r, &st) {
            Ok(rebuilt) => diag.lax = (rebuilt - lt).max_abs(),
            Err(e) => {
                horizon = Some(Horizon { t, error: e.at(t) });
                break;
            }
        }
        if t == 0.0 {
            traj.push(0.0, st0.clone());
        } else {
            traj.push(t, st);
        }
        path.grid.push(t);
        path.k_plus.push(kp.clone());
        path.k_minus.push(km);
        path.q_path.push(q.clone());
        path.diagnostics.push(diag);
    }
    Ok(ExactRun { trajectory: traj, path, horizon, quadrature_estimate: core.estimate })
}

fn trivial_run<S>(st0: S, alg: &LieAlgebraData, q0: &CartanPoint) -> ExactRun<S> {
    let n = alg.rep_dim;
    let mut trajectory = Trajectory::new();
    trajectory.push(0.0, st0);
    let path = FactorPath {
        grid: vec![0.0],
        k_plus: vec![DMatrix::identity(n, n)],
        k_minus: vec![DMatrix::identity(n, n)],
        q_path: vec![q0.clone()],
        diagnostics: vec![SampleDiagnostics::default()],
    };
    ExactRun { trajectory, path, horizon: None, quadrature_estimate: None }
}

/// Reduced CM flow: lift `ξ₀ = s₀`, run the spin pipeline, reduce along the
/// way. `p(t)` is the Cartan part of `Ad_{(k₊g)⁻¹}L₀ + R⁻(q)s`; the root
/// part of that sum must vanish and is reported as the Lax diagnostic.
pub fn solve_reduced_cm(r: &RFamily, st0: &ReducedState, grid: &[f64], opts: &SolverOptions) -> Result<ExactRun<ReducedState>> {
    let alg = r.alg();
    alg.check(&st0.s)?;
    for &a in &alg.simple_roots {
        if (st0.s.roots[a] - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition("reduced spin needs unit simple-root coefficients".into()));
        }
    }
    let lift = SpinCMState { q: st0.q.clone(), p: st0.p.clone(), xi: GElement { h: DVector::zeros(alg.rank), roots: st0.s.roots.clone() } };
    let spin = solve_spin_cm(r, &lift, grid, opts)?;
    let l0 = lax_l(r, &lift)?.to_matrix(alg);
    let mut traj = Trajectory::new();
    let mut path = FactorPath::new();
    let mut horizon = spin.horizon.clone();
    for (k, st) in spin.trajectory.states.iter().enumerate() {
        let t = spin.trajectory.times[k];
        let mut diag = spin.path.diagnostics[k];
        if t == 0.0 {
            traj.push(0.0, st0.clone());
        } else {
            let s = match reduce_spin(alg, &st.xi) {
                Ok(mut s) => {
                    s.h.fill(0.0);
                    s
                }
                Err(e) => {
                    horizon = Some(Horizon { t, error: e.at(t) });
                    break;
                }
            };
            let kg = &spin.path.k_plus[k] * alg.torus_matrix(&g_of_xi(alg, &st.xi)?);
            let lt = GElement::from_matrix(alg, &ad_inv(&kg, &inverse(&kg)?, &l0));
            let full = lt + r_pm_apply(r, Sign::Minus, &st.q, &s)?;
            diag.lax = diag.lax.max(full.roots.amax());
            traj.push(t, ReducedState { q: st.q.clone(), p: full.h.clone(), s });
        }
        path.diagnostics.push(diag);
        path.grid.push(t);
        path.k_plus.push(spin.path.k_plus[k].clone());
        path.k_minus.push(spin.path.k_minus[k].clone());
        path.q_path.push(st.q.clone());
    }
    Ok(ExactRun { trajectory: traj, path, horizon, quadrature_estimate: spin.quadrature_estimate })
}

/// Spin Toda flow from the Gauss decomposition of `e^{t𝐋₀}`.
pub fn solve_toda(r: &RFamily, st0: &TodaState, grid: &[f64]) -> Result<ExactRun<TodaState>> {
    let alg = r.alg();
    alg.check(&st0.eta)?;
    check_uniform(grid)?;
    let (l0e, _) = toda_lax_pair(r, st0)?;
    let l0 = l0e.to_matrix(alg);
    let borel = ParabolicChart::borel(r.algebra.clone());
    let n = alg.rep_dim;
    let mut traj = Trajectory::new();
    let mut path = FactorPath::new();
    let mut horizon = None;
    for &t in grid {
        let step = || -> Result<(TodaState, DMatrix<f64>, DMatrix<f64>, SampleDiagnostics)> {
            let etl = mat_exp(&(&l0 * t));
            let gf = gauss_full(&etl)?;
            let logh = cartan_log(alg, &gf.h)?;
            let half = alg.torus_matrix(&(&logh * 0.5));
            let half_inv = alg.torus_matrix(&(&logh * -0.5));
            let kp = &gf.n_minus * &half;
            let km = &gf.n_plus * &half_inv;
            let (kpi, kmi) = (inverse(&kp)?, inverse(&km)?);
            let x = &st0.x + &logh;
            let eta = alg.ad_torus(&(&logh * -0.5), &st0.eta);
            let lt = GElement::from_matrix(alg, &ad_inv(&kp, &kpi, &l0));
            let p = &lt.h - &st0.eta.h * 0.5;
            let st = TodaState { x: x.clone(), p, eta };
            let factorization = max_abs(&(&etl - &kp * &kmi));
            let km_direct = mat_exp(&(&l0 * -t)) * &kp;
            let lam_minus = DMatrix::from_diagonal(&kp.diagonal());
            let rhs = alg.torus_matrix(&st0.x) * lam_minus * alg.torus_matrix(&-&x);
            let theta = max_abs(&(borel.block_diag(&km_direct) - rhs)).max(borel.p_plus_violation(&km_direct));
            let conjugation = max_abs(&(ad_inv(&kp, &kpi, &l0) - ad_inv(&km, &kmi, &l0)));
            let (rebuilt, _) = toda_lax_pair(r, &st)?;
            let lax = (rebuilt - lt).max_abs();
            Ok((st, kp, km, SampleDiagnostics { factorization, theta, conjugation, lax }))
        };
        match step() {
            Ok((st, kp, km, diag)) => {
                traj.push(t, if t == 0.0 { st0.clone() } else { st });
                path.grid.push(t);
                path.q_path.push(traj.states.last().unwrap().x.clone());
                path.k_plus.push(if t == 0.0 { DMatrix::identity(n, n) } else { kp });
                path.k_minus.push(if t == 0.0 { DMatrix::identity(n, n) } else { km });
                path.diagnostics.push(diag);
            }
            Err(e) => {
                horizon = Some(Horizon { t, error: e.at(t) });
                break;
            }
        }
    }
    Ok(ExactRun { trajectory: traj, path, horizon, quadrature_estimate: None })
}

/// Reduced Toda: lift with η supported on ±π′, solve, project to `(x, p)`.
pub fn solve_toda_reduced(r: &RFamily, st0: &ReducedTodaState, c: &[f64], grid: &[f64]) -> Result<ExactRun<ReducedTodaState>> {
    let lift = lift_reduced_toda(r, st0, c)?;
    let run = solve_toda(r, &lift, grid)?;
    let trajectory = Trajectory {
        times: run.trajectory.times.clone(),
        states: run.trajectory.states.iter().map(|s| ReducedTodaState { x: s.x.clone(), p: s.p.clone() }).collect(),
        monitors: vec![],
    };
    Ok(ExactRun { trajectory, path: run.path, horizon: run.horizon, quadrature_estimate: None })
}

/// Uniform grid `0, dt, …` up to `t_max` (the last step is shortened to land
/// on `t_max` only by choosing `n = ceil(t_max/dt)` equal steps).
pub fn uniform_grid(t_max: f64, dt: f64) -> Vec<f64> {
    let n = ((t_max / dt) - 1e-9).ceil().max(0.0) as usize;
    if n == 0 {
        return vec![0.0];
    }
    let h = t_max / n as f64;
    (0..=n).map(|k| k as f64 * h).collect()
}
