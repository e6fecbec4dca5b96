//! Hamiltonians, equations of motion, Lax operators, momentum maps and
//! reductions for the spin Calogero-Moser family, its reduction to 𝔤_red, the
//! spin Toda lattices obtained in the scaling limit, and their reductions.
//!
//! Equation-of-motion functions return the time derivative packed in the same
//! struct as the state (`q̇` in the `q` slot and so on).

use nalgebra::DVector;

use crate::dynr::{const_r_apply, dr_apply, r_apply, r_pm_apply, RFamily, Sign};
use crate::error::{Error, Result};
use crate::liealg::{
    bracket_unchecked, form, simple_coroot, weyl_vector_w, CartanPoint, GElement, LieAlgebraData,
};
use crate::poisson::{Gradient3, Point3, SmoothFunction3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `+½(p, Π_𝔥ξ)`, with Lax operator `p − R⁻(q)ξ`.
    Plus,
    /// `−½(p, Π_𝔥ξ)`, with Lax operator `p − R⁺(q)ξ`.
    Minus,
}

impl Variant {
    fn sign(self) -> f64 {
        match self {
            Variant::Plus => 1.0,
            Variant::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinCMState {
    pub q: CartanPoint,
    pub p: DVector<f64>,
    pub xi: GElement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub q: CartanPoint,
    pub p: DVector<f64>,
    /// Spin in 𝔤_red: simple-root coefficients 1, no Cartan part.
    pub s: GElement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TodaState {
    pub x: CartanPoint,
    pub p: DVector<f64>,
    pub eta: GElement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTodaState {
    pub x: CartanPoint,
    pub p: DVector<f64>,
}

/// Flat coordinates for the integrator and for output.
pub trait PhaseState: Clone {
    fn to_flat(&self) -> DVector<f64>;
    /// A state of the same shape as `self` built from flat coordinates.
    fn with_flat(&self, v: &DVector<f64>) -> Self;
}

fn flat3(a: &DVector<f64>, b: &DVector<f64>, x: Option<&GElement>) -> DVector<f64> {
    let mut v: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    if let Some(x) = x {
        v.extend(x.h.iter());
        v.extend(x.roots.iter());
    }
    DVector::from_vec(v)
}

fn unflat3(n: usize, nr: usize, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>, GElement) {
    (
        v.rows(0, n).into_owned(),
        v.rows(n, n).into_owned(),
        GElement { h: v.rows(2 * n, n).into_owned(), roots: v.rows(3 * n, nr).into_owned() },
    )
}

impl PhaseState for SpinCMState {
    fn to_flat(&self) -> DVector<f64> {
        flat3(&self.q, &self.p, Some(&self.xi))
    }
    fn with_flat(&self, v: &DVector<f64>) -> Self {
        let (q, p, xi) = unflat3(self.q.len(), self.xi.roots.len(), v);
        SpinCMState { q, p, xi }
    }
}

impl PhaseState for ReducedState {
    fn to_flat(&self) -> DVector<f64> {
        flat3(&self.q, &self.p, Some(&self.s))
    }
    fn with_flat(&self, v: &DVector<f64>) -> Self {
        let (q, p, s) = unflat3(self.q.len(), self.s.roots.len(), v);
        ReducedState { q, p, s }
    }
}

impl PhaseState for TodaState {
    fn to_flat(&self) -> DVector<f64> {
        flat3(&self.x, &self.p, Some(&self.eta))
    }
    fn with_flat(&self, v: &DVector<f64>) -> Self {
        let (x, p, eta) = unflat3(self.x.len(), self.eta.roots.len(), v);
        TodaState { x, p, eta }
    }
}

impl PhaseState for ReducedTodaState {
    fn to_flat(&self) -> DVector<f64> {
        flat3(&self.x, &self.p, None)
    }
    fn with_flat(&self, v: &DVector<f64>) -> Self {
        let n = self.x.len();
        ReducedTodaState { x: v.rows(0, n).into_owned(), p: v.rows(n, n).into_owned() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSeries {
    pub name: String,
    pub values: Vec<f64>,
}

/// Time-stamped states plus monitored scalar series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub monitors: Vec<MonitorSeries>,
}

impl<S> Trajectory<S> {
    pub fn new() -> Self {
        Trajectory { times: Vec::new(), states: Vec::new(), monitors: Vec::new() }
    }

    pub fn push(&mut self, t: f64, s: S) {
        self.times.push(t);
        self.states.push(s);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &S)> {
        self.times.last().map(|&t| (t, self.states.last().unwrap()))
    }

    pub fn monitor(&self, name: &str) -> Option<&[f64]> {
        self.monitors.iter().find(|m| m.name == name).map(|m| m.values.as_slice())
    }

    /// Checks equal lengths and strictly increasing times.
    pub fn is_well_formed(&self) -> bool {
        self.times.len() == self.states.len()
            && self.monitors.iter().all(|m| m.values.len() == self.times.len())
            && self.times.windows(2).all(|w| w[0] < w[1])
    }
}

impl<S> Default for Trajectory<S> {
    fn default() -> Self {
        Self::new()
    }
}

// ---------------------------------------------------------------------------
// Spin Calogero-Moser

/// `½|p|² + ⅛|Π_𝔥ξ|² ± ½(p, Π_𝔥ξ) − ⅛ Σ_{α∈⟨π′⟩} ξ_α ξ_{−α} / sinh²(½α(q))`.
pub fn spin_cm_hamiltonian(r: &RFamily, st: &SpinCMState, variant: Variant) -> Result<f64> {
    let alg = r.alg();
    alg.check(&st.xi)?;
    let mut h = 0.5 * st.p.norm_squared() + 0.125 * st.xi.h.norm_squared()
        + 0.5 * variant.sign() * st.p.dot(&st.xi.h);
    for a in r.span_roots() {
        h -= 0.125 * st.xi.roots[a] * st.xi.roots[alg.neg(a)] * r.csch2(a, &st.q)?;
    }
    Ok(h)
}

/// Partials `(δ_q, δ_p, δ_ξ)` of the spin CM Hamiltonian.
pub fn spin_cm_gradient(r: &RFamily, st: &SpinCMState, variant: Variant) -> Result<Gradient3> {
    let alg = r.alg();
    alg.check(&st.xi)?;
    let sg = variant.sign();
    let mut d1 = DVector::zeros(alg.rank);
    let mut d = GElement::from_cartan(alg, &(&st.xi.h * 0.25 + &st.p * (0.5 * sg)));
    for a in r.span_roots() {
        let c2 = r.csch2(a, &st.q)?;
        let ct = r.coth(a, &st.q)?;
        let prod = st.xi.roots[a] * st.xi.roots[alg.neg(a)];
        d1.axpy(0.125 * prod * ct * c2, &alg.coroots[a], 1.0);
        d.roots[a] = -0.25 * st.xi.roots[a] * c2;
    }
    Ok(Gradient3 { d1, d2: &st.p + &st.xi.h * (0.5 * sg), d })
}

/// `L = p − R⁻(q)ξ` (plus variant) or the mirror `p − R⁺(q)ξ`.
pub fn lax_l_variant(r: &RFamily, st: &SpinCMState, variant: Variant) -> Result<GElement> {
    let sign = match variant {
        Variant::Plus => Sign::Minus,
        Variant::Minus => Sign::Plus,
    };
    let alg = r.alg();
    Ok(GElement::from_cartan(alg, &st.p) - r_pm_apply(r, sign, &st.q, &st.xi)?)
}

/// The Lax operator `L = p − R⁻(q)ξ`.
pub fn lax_l(r: &RFamily, st: &SpinCMState) -> Result<GElement> {
    lax_l_variant(r, st, Variant::Plus)
}

/// Equations of motion of the plus variant:
/// `q̇ = p + ½Π_𝔥ξ`, `ṗ = −⅛ Σ coth·csch² ξ_α ξ_{−α} H_α`, `ξ̇ = [ξ, δ_ξ𝓗]`.
pub fn spin_cm_eom_rhs(r: &RFamily, st: &SpinCMState) -> Result<SpinCMState> {
    spin_cm_eom_rhs_variant(r, st, Variant::Plus)
}

pub fn spin_cm_eom_rhs_variant(r: &RFamily, st: &SpinCMState, variant: Variant) -> Result<SpinCMState> {
    let g = spin_cm_gradient(r, st, variant)?;
    Ok(SpinCMState { q: g.d2, p: -g.d1, xi: bracket_unchecked(r.alg(), &st.xi, &g.d) })
}

/// Chain-rule `dL/dt` along the flow minus `[L, R(q)L] − dR(q)(Π_𝔥ξ)L`.
pub fn quasi_lax_residual(r: &RFamily, st: &SpinCMState) -> Result<GElement> {
    let alg = r.alg();
    let v = spin_cm_eom_rhs(r, st)?;
    let mut ldot = GElement::from_cartan(alg, &v.p);
    ldot -= &dr_apply(r, &st.q, &v.q, &st.xi)?;
    ldot -= &r_pm_apply(r, Sign::Minus, &st.q, &v.xi)?;
    Ok(ldot - quasi_lax_rhs(r, st)?)
}

/// `[L, R(q)L] − dR(q)(Π_𝔥ξ)L`.
pub fn quasi_lax_rhs(r: &RFamily, st: &SpinCMState) -> Result<GElement> {
    let alg = r.alg();
    let l = lax_l(r, st)?;
    let rl = r_apply(r, &st.q, &l)?;
    Ok(bracket_unchecked(alg, &l, &rl) - dr_apply(r, &st.q, &st.xi.h, &l)?)
}

/// Momentum map `J = −Π_𝔥ξ`.
pub fn momentum_j(st: &SpinCMState) -> DVector<f64> {
    -&st.xi.h
}

/// The spin CM Hamiltonian as a function of `(q, p, ξ)` for the Poisson
/// cross-checks. Evaluates to NaN outside the domain.
pub struct SpinCMHamiltonian<'a> {
    pub r: &'a RFamily,
    pub variant: Variant,
}

fn cm_state(pt: &Point3) -> SpinCMState {
    SpinCMState { q: pt.q.clone(), p: pt.l.clone(), xi: pt.x.clone() }
}

impl SmoothFunction3 for SpinCMHamiltonian<'_> {
    fn eval(&self, pt: &Point3) -> f64 {
        spin_cm_hamiltonian(self.r, &cm_state(pt), self.variant).unwrap_or(f64::NAN)
    }
    fn grad(&self, pt: &Point3) -> Gradient3 {
        spin_cm_gradient(self.r, &cm_state(pt), self.variant).expect("point outside the domain")
    }
}

// ---------------------------------------------------------------------------
// Reduction to 𝔤_red

fn simple_coeffs_checked(alg: &LieAlgebraData, xi: &GElement) -> Result<Vec<f64>> {
    alg.simple_roots
        .iter()
        .map(|&a| {
            let v = xi.roots[a];
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::OutOfChart { root: alg.root_key(a), value: v })
            }
        })
        .collect()
}

/// Logarithm of `g(ξ) = exp(Σ_{i,j} C_{ji} log ξ_{α_j} h_{α_i})`, as a
/// Cartan point. Requires every simple-root coefficient to be positive.
pub fn g_of_xi(alg: &LieAlgebraData, xi: &GElement) -> Result<CartanPoint> {
    alg.check(xi)?;
    let logs: Vec<f64> = simple_coeffs_checked(alg, xi)?.iter().map(|v| v.ln()).collect();
    let mut out = DVector::zeros(alg.rank);
    for i in 0..alg.rank {
        let hi = simple_coroot(alg, i);
        let c: f64 = (0..alg.rank).map(|j| alg.cartan_inverse[(j, i)] * logs[j]).sum();
        out.axpy(c, &hi, 1.0);
    }
    Ok(out)
}

/// `Ad_{g(ξ)⁻¹}ξ`, computed as `ξ_α / Π_j ξ_{α_j}^{m_j(α)}` so that the
/// simple-root coefficients come out as exactly 1.
pub fn reduce_spin(alg: &LieAlgebraData, xi: &GElement) -> Result<GElement> {
    alg.check(xi)?;
    let simple = simple_coeffs_checked(alg, xi)?;
    let mut s = xi.clone();
    for a in 0..alg.num_roots() {
        let mut denom = 1.0;
        for (j, &m) in alg.roots[a].iter().enumerate() {
            denom *= simple[j].powi(m);
        }
        s.roots[a] = xi.roots[a] / denom;
    }
    Ok(s)
}

pub fn reduce_state(r: &RFamily, st: &SpinCMState) -> Result<ReducedState> {
    let scale = 1.0 + st.xi.roots.amax();
    if st.xi.h.amax() > 1e-12 * scale {
        return Err(Error::Precondition("reduction needs Π_𝔥ξ = 0".into()));
    }
    let mut s = reduce_spin(r.alg(), &st.xi)?;
    s.h.fill(0.0);
    Ok(ReducedState { q: st.q.clone(), p: st.p.clone(), s })
}

/// `𝓗₀ = ½|p|² − ¼ Σ_{α∈⟨π′⟩⁺} s_α s_{−α} / sinh²(½α(q))`.
pub fn reduced_hamiltonian(r: &RFamily, st: &ReducedState) -> Result<f64> {
    let alg = r.alg();
    alg.check(&st.s)?;
    let mut h = 0.5 * st.p.norm_squared();
    for a in r.span_roots().filter(|&a| alg.is_positive(a)) {
        h -= 0.25 * st.s.roots[a] * st.s.roots[alg.neg(a)] * r.csch2(a, &st.q)?;
    }
    Ok(h)
}

/// The element 𝓜 of the reduced equation `ṡ = [s, 𝓜]`.
pub fn reduced_m(r: &RFamily, st: &ReducedState) -> Result<GElement> {
    let alg = r.alg();
    let mut m = GElement::zeros(alg);
    for a in r.span_roots() {
        m.roots[a] = -0.25 * st.s.roots[a] * r.csch2(a, &st.q)?;
    }
    // Correction along h_{α_i} that keeps the simple coefficients fixed.
    let mut weights = vec![0.0; alg.rank];
    for (j, &aj) in alg.simple_roots.iter().enumerate() {
        for a in r.span_roots() {
            if alg.simple_roots.contains(&a) {
                continue;
            }
            let diff: Vec<i32> = alg.roots[aj].iter().zip(&alg.roots[a]).map(|(x, y)| x - y).collect();
            let Some(b) = alg.root_index(&diff) else { continue };
            let n_ab = alg.structure_constants[a][b].map_or(0.0, |sc| sc.coeff);
            weights[j] += n_ab * st.s.roots[a] * st.s.roots[b] * r.csch2(a, &st.q)?;
        }
    }
    for i in 0..alg.rank {
        let c: f64 = (0..alg.rank).map(|j| alg.cartan_inverse[(j, i)] * weights[j]).sum();
        m.h.axpy(0.25 * c, &simple_coroot(alg, i), 1.0);
    }
    Ok(m)
}

/// `q̇ = p`, `ṗ = −⅛ Σ_{⟨π′⟩} coth·csch² s_α s_{−α} H_α`, `ṡ = [s, 𝓜]`.
pub fn reduced_eom_rhs(r: &RFamily, st: &ReducedState) -> Result<ReducedState> {
    let alg = r.alg();
    alg.check(&st.s)?;
    let mut pdot = DVector::zeros(alg.rank);
    for a in r.span_roots() {
        let prod = st.s.roots[a] * st.s.roots[alg.neg(a)];
        pdot.axpy(-0.125 * prod * r.coth(a, &st.q)? * r.csch2(a, &st.q)?, &alg.coroots[a], 1.0);
    }
    let m = reduced_m(r, st)?;
    Ok(ReducedState { q: st.p.clone(), p: pdot, s: bracket_unchecked(alg, &st.s, &m) })
}

// ---------------------------------------------------------------------------
// Spin Toda

/// `𝓗ˢ = ½|p|² + ⅛|Π_𝔥η|² + ½(p, Π_𝔥η) − Σ_{α∈π′} η_α η_{−α} e^{−α(x)}`.
pub fn toda_hamiltonian(r: &RFamily, st: &TodaState) -> Result<f64> {
    let alg = r.alg();
    alg.check(&st.eta)?;
    let mut h = 0.5 * st.p.norm_squared() + 0.125 * st.eta.h.norm_squared() + 0.5 * st.p.dot(&st.eta.h);
    for &i in &r.pi_prime {
        let a = alg.simple_roots[i];
        h -= st.eta.roots[a] * st.eta.roots[alg.neg(a)] * (-alg.alpha_of(a, &st.x)).exp();
    }
    Ok(h)
}

pub fn toda_gradient(r: &RFamily, st: &TodaState) -> Result<Gradient3> {
    let alg = r.alg();
    alg.check(&st.eta)?;
    let mut d1 = DVector::zeros(alg.rank);
    let mut d = GElement::from_cartan(alg, &(&st.eta.h * 0.25 + &st.p * 0.5));
    for &i in &r.pi_prime {
        let a = alg.simple_roots[i];
        let na = alg.neg(a);
        let e = (-alg.alpha_of(a, &st.x)).exp();
        d1.axpy(st.eta.roots[a] * st.eta.roots[na] * e, &alg.coroots[a], 1.0);
        // coefficient on e_β is ∂/∂η_{−β}
        d.roots[na] = -st.eta.roots[na] * e;
        d.roots[a] = -st.eta.roots[a] * e;
    }
    Ok(Gradient3 { d1, d2: &st.p + &st.eta.h * 0.5, d })
}

/// `ẋ = p + ½Π_𝔥η`, `ṗ = −Σ_{π′} e^{−α(x)} η_α η_{−α} H_α`,
/// `η̇ = [η, ¼Π_𝔥η + ½p]`.
pub fn toda_eom_rhs(r: &RFamily, st: &TodaState) -> Result<TodaState> {
    let alg = r.alg();
    let g = toda_gradient(r, st)?;
    let gen = GElement::from_cartan(alg, &(&st.eta.h * 0.25 + &st.p * 0.5));
    Ok(TodaState { x: g.d2, p: -g.d1, eta: bracket_unchecked(alg, &st.eta, &gen) })
}

/// `(𝐋, 𝐌)` with
/// `𝐋 = p + ½Π_𝔥η + Σ_{π} η_α e_α − Σ_{π′} e^{−α(x)} η_{−α} e_{−α}` and
/// `𝐌 = −½Σ_{π} η_α e_α − ½Σ_{π′} e^{−α(x)} η_{−α} e_{−α}`.
pub fn toda_lax_pair(r: &RFamily, st: &TodaState) -> Result<(GElement, GElement)> {
    let alg = r.alg();
    alg.check(&st.eta)?;
    let mut l = GElement::from_cartan(alg, &(&st.p + &st.eta.h * 0.5));
    let mut m = GElement::zeros(alg);
    for &a in &alg.simple_roots {
        l.roots[a] = st.eta.roots[a];
        m.roots[a] = -0.5 * st.eta.roots[a];
    }
    for &i in &r.pi_prime {
        let a = alg.simple_roots[i];
        let na = alg.neg(a);
        let c = (-alg.alpha_of(a, &st.x)).exp() * st.eta.roots[na];
        l.roots[na] = -c;
        m.roots[na] = -0.5 * c;
    }
    Ok((l, m))
}

/// Chain-rule `d𝐋/dt` along the Toda flow minus `[𝐋, 𝐌]`.
pub fn toda_lax_residual(r: &RFamily, st: &TodaState) -> Result<GElement> {
    let alg = r.alg();
    let v = toda_eom_rhs(r, st)?;
    let mut ldot = GElement::from_cartan(alg, &(&v.p + &v.eta.h * 0.5));
    for &a in &alg.simple_roots {
        ldot.roots[a] = v.eta.roots[a];
    }
    for &i in &r.pi_prime {
        let a = alg.simple_roots[i];
        let na = alg.neg(a);
        let e = (-alg.alpha_of(a, &st.x)).exp();
        ldot.roots[na] = -e * (v.eta.roots[na] - alg.alpha_of(a, &v.x) * st.eta.roots[na]);
    }
    let (l, m) = toda_lax_pair(r, st)?;
    Ok(ldot - bracket_unchecked(alg, &l, &m))
}

pub struct TodaHamiltonian<'a> {
    pub r: &'a RFamily,
}

fn toda_state(pt: &Point3) -> TodaState {
    TodaState { x: pt.q.clone(), p: pt.l.clone(), eta: pt.x.clone() }
}

impl SmoothFunction3 for TodaHamiltonian<'_> {
    fn eval(&self, pt: &Point3) -> f64 {
        toda_hamiltonian(self.r, &toda_state(pt)).unwrap_or(f64::NAN)
    }
    fn grad(&self, pt: &Point3) -> Gradient3 {
        toda_gradient(self.r, &toda_state(pt)).expect("dimension mismatch")
    }
}

/// The map `𝛒(x, p, η) = (x, −Π_𝔥η, 𝐋(x, p, η))` into the dual bundle 𝐀.
pub fn rho_map(r: &RFamily, st: &TodaState) -> Result<Point3> {
    let (l, _) = toda_lax_pair(r, st)?;
    Ok(Point3::new(st.x.clone(), -&st.eta.h, l))
}

/// Pullback `f∘𝛒` of a function on 𝐀 to `(x, p, η)`, with chain-rule partials.
pub struct RhoPullback<'a> {
    pub r: &'a RFamily,
    pub f: &'a dyn SmoothFunction3,
}

impl SmoothFunction3 for RhoPullback<'_> {
    fn eval(&self, pt: &Point3) -> f64 {
        self.f.eval(&rho_map(self.r, &toda_state(pt)).expect("dimension mismatch"))
    }

    fn grad(&self, pt: &Point3) -> Gradient3 {
        let r = self.r;
        let alg = r.alg();
        let st = toda_state(pt);
        let g = self.f.grad(&rho_map(r, &st).expect("dimension mismatch"));
        let mut d1 = g.d1.clone();
        let mut d = GElement::from_cartan(alg, &(&g.d.h * 0.5 - &g.d2));
        for &a in &alg.simple_roots {
            let na = alg.neg(a);
            d.roots[na] = g.d.roots[na];
        }
        for &i in &r.pi_prime {
            let a = alg.simple_roots[i];
            let na = alg.neg(a);
            let e = (-alg.alpha_of(a, &st.x)).exp();
            d1.axpy(e * st.eta.roots[na] * g.d.roots[a], &alg.coroots[a], 1.0);
            d.roots[a] = -e * g.d.roots[a];
        }
        Gradient3 { d1, d2: g.d.h.clone(), d }
    }
}

// ---------------------------------------------------------------------------
// Scaling limit

/// `(x, p, η) ↦ (x + 2τw, p, ξ)` with `ξ_i = η_i`, `ξ_α = η_α e^τ`.
pub fn scale_state(alg: &LieAlgebraData, st: &TodaState, tau: f64) -> SpinCMState {
    let w = weyl_vector_w(alg);
    let mut xi = st.eta.clone();
    xi.roots *= tau.exp();
    SpinCMState { q: &st.x + &w * (2.0 * tau), p: st.p.clone(), xi }
}

/// `Ad_{e^{−τw}} L` for a spin CM state.
pub fn gauged_lax(r: &RFamily, st: &SpinCMState, tau: f64) -> Result<GElement> {
    let alg = r.alg();
    let w = weyl_vector_w(alg);
    Ok(alg.ad_torus(&(&w * -tau), &lax_l(r, st)?))
}

/// Predicted exponential decay rates (per unit τ) of the three scaling-limit
/// deviations: Hamiltonian, gauged Lax operator, r-matrix. `None` means the
/// deviation vanishes identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRates {
    pub hamiltonian: Option<f64>,
    pub lax: Option<f64>,
    pub r_matrix: Option<f64>,
}

/// Leading decay rates read off from the level structure of the roots.
///
/// On a level-l root of ⟨π′⟩⁺, the potential term deviates like
/// `e^{−2τ(l−1)}` for l ≥ 2, and like `e^{−2τ}` for l = 1 (next order of
/// `1/sinh²`). The gauged Lax coefficient of a level-l root decays like
/// `e^{−τ(|l|−1)}` for |l| ≥ 2 (roots of ⟨π′⟩ or ᾱ′⁺) and like `e^{−2τ}` on
/// ±π′. The r-matrix coefficients on ⟨π′⟩ decay like `e^{−2τ|l|}`.
pub fn scaling_rates(r: &RFamily, eta: &GElement) -> ScalingRates {
    use crate::dynr::RootClass;
    let alg = r.alg();
    let min = |acc: Option<f64>, v: f64| Some(acc.map_or(v, |a: f64| a.min(v)));
    let (mut h, mut l, mut rm) = (None, None, None);
    for a in 0..alg.num_roots() {
        let lev = alg.height(a).abs() as f64;
        let na = alg.neg(a);
        let nonzero = eta.roots[a] != 0.0;
        match r.class(a) {
            RootClass::Span => {
                rm = min(rm, 2.0 * lev);
                if alg.is_positive(a) && nonzero && eta.roots[na] != 0.0 {
                    h = min(h, if lev == 1.0 { 2.0 } else { 2.0 * (lev - 1.0) });
                }
                if nonzero {
                    l = min(l, if lev == 1.0 { 2.0 } else { lev - 1.0 });
                }
            }
            RootClass::ComplementPos => {
                if nonzero && lev >= 2.0 {
                    l = min(l, lev - 1.0);
                }
            }
            RootClass::ComplementNeg => {}
        }
    }
    ScalingRates { hamiltonian: h, lax: l, r_matrix: rm }
}

// ---------------------------------------------------------------------------
// Reduced Toda

/// `𝓗ˢ₀ = ½|p|² − Σ_{α∈π′} c_α e^{−α(x)}`; `c[i]` belongs to α_{i+1}.
pub fn reduced_toda_hamiltonian(r: &RFamily, st: &ReducedTodaState, c: &[f64]) -> Result<f64> {
    let alg = r.alg();
    check_constants(alg, c)?;
    let mut h = 0.5 * st.p.norm_squared();
    for &i in &r.pi_prime {
        h -= c[i] * (-alg.alpha_of(alg.simple_roots[i], &st.x)).exp();
    }
    Ok(h)
}

/// `ẋ = p`, `ṗ = −Σ_{π′} c_α e^{−α(x)} H_α`.
pub fn reduced_toda_rhs(r: &RFamily, st: &ReducedTodaState, c: &[f64]) -> Result<ReducedTodaState> {
    let alg = r.alg();
    check_constants(alg, c)?;
    let mut pdot = DVector::zeros(alg.rank);
    for &i in &r.pi_prime {
        let a = alg.simple_roots[i];
        pdot.axpy(-c[i] * (-alg.alpha_of(a, &st.x)).exp(), &alg.coroots[a], 1.0);
    }
    Ok(ReducedTodaState { x: st.p.clone(), p: pdot })
}

fn check_constants(alg: &LieAlgebraData, c: &[f64]) -> Result<()> {
    if c.len() != alg.rank {
        return Err(Error::Dimension { expected: alg.rank, got: c.len() });
    }
    Ok(())
}

/// Lift of a reduced Toda state: `η_{±α} = √c_α` for `c_α > 0`, and
/// `η_α = √|c_α|`, `η_{−α} = −√|c_α|` for `c_α < 0`, on α ∈ π′.
pub fn lift_reduced_toda(r: &RFamily, st: &ReducedTodaState, c: &[f64]) -> Result<TodaState> {
    let alg = r.alg();
    check_constants(alg, c)?;
    let mut eta = GElement::zeros(alg);
    for &i in &r.pi_prime {
        let a = alg.simple_roots[i];
        let s = c[i].abs().sqrt();
        eta.roots[a] = s;
        eta.roots[alg.neg(a)] = if c[i] < 0.0 { -s } else { s };
    }
    Ok(TodaState { x: st.x.clone(), p: st.p.clone(), eta })
}

/// Reduced constants `c_α = η_α η_{−α}` on π′ (zero elsewhere).
pub fn toda_constants(r: &RFamily, st: &TodaState) -> Vec<f64> {
    let alg = r.alg();
    (0..alg.rank)
        .map(|i| {
            if r.in_pi_prime(i) {
                let a = alg.simple_roots[i];
                st.eta.roots[a] * st.eta.roots[alg.neg(a)]
            } else {
                0.0
            }
        })
        .collect()
}

/// `½(L, L)`, used to cross-check the Hamiltonian on the zero momentum level.
pub fn half_lax_norm(r: &RFamily, st: &SpinCMState) -> Result<f64> {
    let l = lax_l(r, st)?;
    Ok(0.5 * form(r.alg(), &l, &l))
}

/// `𝐑(𝐋)`, which coincides with 𝐌.
pub fn toda_m_from_r(alg: &LieAlgebraData, l: &GElement) -> GElement {
    const_r_apply(alg, l)
}
