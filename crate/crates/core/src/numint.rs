//! Fixed-step RK4 reference integrator with step-halving error estimates, and
//! the standard monitor sets for each system.

use std::str::FromStr;

use nalgebra::{Complex, DMatrix, DVector};

use crate::dynr::RFamily;
use crate::error::{Error, Result};
use crate::liealg::GElement;
use crate::models::{
    lax_l_variant, reduced_hamiltonian, reduced_toda_hamiltonian, spin_cm_hamiltonian,
    toda_hamiltonian, toda_lax_pair, MonitorSeries, PhaseState, ReducedState, ReducedTodaState,
    SpinCMState, TodaState, Trajectory, Variant,
};

/// A named scalar functional sampled at every recorded state.
pub struct Monitor<S> {
    pub name: String,
    pub f: Box<dyn Fn(&S) -> f64 + Send + Sync>,
}

impl<S> Monitor<S> {
    pub fn new(name: impl Into<String>, f: impl Fn(&S) -> f64 + Send + Sync + 'static) -> Self {
        Monitor { name: name.into(), f: Box::new(f) }
    }
}

impl<S> std::fmt::Debug for Monitor<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Monitor").field("name", &self.name).finish()
    }
}

#[derive(Debug)]
pub struct IntegratorConfig<S> {
    /// Requested step. The actual step is `t_max / ceil(t_max / dt)`.
    pub dt: f64,
    pub t_max: f64,
    pub monitors: Vec<Monitor<S>>,
    /// Threshold for the step-halving estimate; exceeding it sets a warning.
    pub tolerance: f64,
    /// Record every k-th step (the final step is always recorded).
    pub record_every: usize,
    /// Run the dt/2 companion integration to estimate the global error.
    pub estimate_error: bool,
}

impl<S> IntegratorConfig<S> {
    pub fn new(dt: f64, t_max: f64) -> Self {
        IntegratorConfig {
            dt,
            t_max,
            monitors: Vec::new(),
            tolerance: 1e-6,
            record_every: 1,
            estimate_error: false,
        }
    }

    pub fn with_monitors(mut self, monitors: Vec<Monitor<S>>) -> Self {
        self.monitors = monitors;
        self
    }

    pub fn with_error_estimate(mut self, tolerance: f64) -> Self {
        self.estimate_error = true;
        self.tolerance = tolerance;
        self
    }

    pub fn recording_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Precondition(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(Error::Precondition(format!("t_max must be non-negative, got {}", self.t_max)));
        }
        Ok((self.t_max / self.dt - 1e-9).ceil().max(0.0) as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration<S> {
    pub trajectory: Trajectory<S>,
    /// Sup-norm difference against the dt/2 run, scaled by 16/15.
    pub error_estimate: Option<f64>,
    /// Set when the estimate exceeds the configured tolerance.
    pub accuracy_warning: bool,
    /// Present when the right-hand side failed mid-run; the trajectory stops
    /// at the last good state.
    pub truncated: Option<Error>,
}

fn rk4_step<S: PhaseState>(rhs: &dyn Fn(&S) -> Result<S>, s: &S, h: f64) -> Result<S> {
    let y = s.to_flat();
    let f = |v: &DVector<f64>| -> Result<DVector<f64>> { Ok(rhs(&s.with_flat(v))?.to_flat()) };
    let k1 = f(&y)?;
    let k2 = f(&(&y + &k1 * (0.5 * h)))?;
    let k3 = f(&(&y + &k2 * (0.5 * h)))?;
    let k4 = f(&(&y + &k3 * h))?;
    Ok(s.with_flat(&(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))))
}

/// Plain RK4 run returning `(times, states, failure)`, recording every
/// `every`-th of `n` steps of size `h`.
fn run<S: PhaseState>(
    rhs: &dyn Fn(&S) -> Result<S>,
    st0: &S,
    n: usize,
    h: f64,
    every: usize,
) -> (Vec<f64>, Vec<S>, Option<Error>) {
    let mut times = vec![0.0];
    let mut states = vec![st0.clone()];
    let mut cur = st0.clone();
    for k in 0..n {
        match rk4_step(rhs, &cur, h) {
            Ok(next) if next.to_flat().iter().all(|v| v.is_finite()) => cur = next,
            Ok(_) => {
                let e = Error::Precondition("non-finite state".into()).at(k as f64 * h);
                return (times, states, Some(e));
            }
            Err(e) => return (times, states, Some(e.at(k as f64 * h))),
        }
        if (k + 1) % every == 0 || k + 1 == n {
            times.push((k + 1) as f64 * h);
            states.push(cur.clone());
        }
    }
    (times, states, None)
}

pub fn integrate<S: PhaseState>(
    rhs: &dyn Fn(&S) -> Result<S>,
    st0: &S,
    cfg: &IntegratorConfig<S>,
) -> Result<Integration<S>> {
    let n = cfg.steps()?;
    let h = if n == 0 { 0.0 } else { cfg.t_max / n as f64 };
    let (times, states, truncated) = run(rhs, st0, n, h, cfg.record_every);

    let mut error_estimate = None;
    if cfg.estimate_error && truncated.is_none() && n > 0 {
        let (t2, s2, fail2) = run(rhs, st0, 2 * n, 0.5 * h, 2 * cfg.record_every);
        if fail2.is_none() {
            let mut worst: f64 = 0.0;
            for (a, b) in states.iter().zip(&s2) {
                worst = worst.max((a.to_flat() - b.to_flat()).amax());
            }
            debug_assert_eq!(t2.len(), times.len());
            error_estimate = Some(worst * 16.0 / 15.0);
        }
    }
    let accuracy_warning = error_estimate.is_some_and(|e| e > cfg.tolerance);

    let monitors = cfg
        .monitors
        .iter()
        .map(|m| MonitorSeries { name: m.name.clone(), values: states.iter().map(|s| (m.f)(s)).collect() })
        .collect();
    Ok(Integration {
        trajectory: Trajectory { times, states, monitors },
        error_estimate,
        accuracy_warning,
        truncated,
    })
}

/// Final state of an RK4 run with `n` steps over `[0, t_max]`.
pub fn rk4_final<S: PhaseState>(rhs: &dyn Fn(&S) -> Result<S>, st0: &S, t_max: f64, n: usize) -> Result<S> {
    let h = t_max / n as f64;
    let mut cur = st0.clone();
    for _ in 0..n {
        cur = rk4_step(rhs, &cur, h)?;
    }
    Ok(cur)
}

/// Observed order `log₂(|y_n − y_{2n}| / |y_{2n} − y_{4n}|)` at `t_max`.
pub fn measured_order<S: PhaseState>(
    rhs: &dyn Fn(&S) -> Result<S>,
    st0: &S,
    t_max: f64,
    n: usize,
) -> Result<f64> {
    let a = rk4_final(rhs, st0, t_max, n)?.to_flat();
    let b = rk4_final(rhs, st0, t_max, 2 * n)?.to_flat();
    let c = rk4_final(rhs, st0, t_max, 4 * n)?.to_flat();
    Ok(((&a - &b).norm() / (&b - &c).norm()).log2())
}

// ---------------------------------------------------------------------------
// Monitors

/// Eigenvalues of a real matrix sorted by real part, then imaginary part.
pub fn sorted_spectrum(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// Largest distance between two spectra under the best matching
/// (greedy nearest neighbour, adequate for well-separated spectra).
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap_or((0, f64::INFINITY));
        if j < used.len() {
            used[j] = true;
        }
        worst = worst.max(d);
    }
    worst
}

/// `tr(M^k)` for `k = 2..=kmax`.
pub fn trace_powers(m: &DMatrix<f64>, kmax: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut p = m.clone();
    for _ in 2..=kmax {
        p = &p * m;
        out.push(p.trace());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemTag {
    SpinCm,
    ReducedCm,
    SpinToda,
    ReducedToda,
}

impl FromStr for SystemTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spin-cm" => Ok(SystemTag::SpinCm),
            "reduced-cm" => Ok(SystemTag::ReducedCm),
            "spin-toda" | "toda" => Ok(SystemTag::SpinToda),
            "reduced-toda" => Ok(SystemTag::ReducedToda),
            other => Err(Error::UnknownTag(other.to_string())),
        }
    }
}

impl std::fmt::Display for SystemTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SystemTag::SpinCm => "spin-cm",
            SystemTag::ReducedCm => "reduced-cm",
            SystemTag::SpinToda => "spin-toda",
            SystemTag::ReducedToda => "reduced-toda",
        })
    }
}

/// Everything a monitor set needs besides the state.
#[derive(Debug, Clone)]
pub struct MonitorContext {
    pub r: RFamily,
    pub variant: Variant,
    /// Reduced Toda constants, one per simple root.
    pub constants: Vec<f64>,
}

pub enum MonitorSuite {
    SpinCm(Vec<Monitor<SpinCMState>>),
    ReducedCm(Vec<Monitor<ReducedState>>),
    SpinToda(Vec<Monitor<TodaState>>),
    ReducedToda(Vec<Monitor<ReducedTodaState>>),
}

impl MonitorSuite {
    pub fn names(&self) -> Vec<String> {
        fn n<S>(v: &[Monitor<S>]) -> Vec<String> {
            v.iter().map(|m| m.name.clone()).collect()
        }
        match self {
            MonitorSuite::SpinCm(v) => n(v),
            MonitorSuite::ReducedCm(v) => n(v),
            MonitorSuite::SpinToda(v) => n(v),
            MonitorSuite::ReducedToda(v) => n(v),
        }
    }
}

fn spectrum_monitors<S: 'static>(
    n: usize,
    lax: impl Fn(&S) -> Option<DMatrix<f64>> + Send + Sync + Clone + 'static,
) -> Vec<Monitor<S>> {
    let mut out = Vec::new();
    for k in 0..n {
        let l = lax.clone();
        out.push(Monitor::new(format!("spec_re_{}", k + 1), move |s: &S| {
            l(s).map_or(f64::NAN, |m| sorted_spectrum(&m)[k].re)
        }));
        let l = lax.clone();
        out.push(Monitor::new(format!("spec_im_{}", k + 1), move |s: &S| {
            l(s).map_or(f64::NAN, |m| sorted_spectrum(&m)[k].im)
        }));
    }
    out
}

/// Standard monitors: energy, momentum-map norm and Lax spectrum for the spin
/// systems; energy and simple-root coefficients for reduced CM; energy for
/// reduced Toda.
pub fn monitor_suite(tag: &str, ctx: &MonitorContext) -> Result<MonitorSuite> {
    let tag: SystemTag = tag.parse()?;
    let n = ctx.r.alg().rep_dim;
    Ok(match tag {
        SystemTag::SpinCm => {
            let (r, v) = (ctx.r.clone(), ctx.variant);
            let mut m = vec![
                Monitor::new("H", move |s: &SpinCMState| spin_cm_hamiltonian(&r, s, v).unwrap_or(f64::NAN)),
                Monitor::new("J_norm", |s: &SpinCMState| s.xi.h.norm()),
            ];
            let r = ctx.r.clone();
            m.extend(spectrum_monitors(n, move |s: &SpinCMState| {
                lax_l_variant(&r, s, v).ok().map(|l| l.to_matrix(r.alg()))
            }));
            MonitorSuite::SpinCm(m)
        }
        SystemTag::ReducedCm => {
            let r = ctx.r.clone();
            let mut m = vec![Monitor::new("H", move |s: &ReducedState| {
                reduced_hamiltonian(&r, s).unwrap_or(f64::NAN)
            })];
            for (i, &a) in ctx.r.alg().simple_roots.iter().enumerate() {
                m.push(Monitor::new(format!("s_simple_{}", i + 1), move |s: &ReducedState| s.s.roots[a]));
            }
            MonitorSuite::ReducedCm(m)
        }
        SystemTag::SpinToda => {
            let r = ctx.r.clone();
            let mut m = vec![
                Monitor::new("H", move |s: &TodaState| toda_hamiltonian(&r, s).unwrap_or(f64::NAN)),
                Monitor::new("J_norm", |s: &TodaState| s.eta.h.norm()),
            ];
            let r = ctx.r.clone();
            m.extend(spectrum_monitors(n, move |s: &TodaState| {
                toda_lax_pair(&r, s).ok().map(|(l, _)| l.to_matrix(r.alg()))
            }));
            MonitorSuite::SpinToda(m)
        }
        SystemTag::ReducedToda => {
            let (r, c) = (ctx.r.clone(), ctx.constants.clone());
            MonitorSuite::ReducedToda(vec![Monitor::new("H", move |s: &ReducedTodaState| {
                reduced_toda_hamiltonian(&r, s, &c).unwrap_or(f64::NAN)
            })])
        }
    })
}

/// Matrix of a Lax element, for spectrum checks.
pub fn lax_matrix(r: &RFamily, l: &GElement) -> DMatrix<f64> {
    l.to_matrix(r.alg())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::{build_algebra, Series};
    use crate::models::{
        lax_l, reduce_state, reduced_eom_rhs, reduced_toda_rhs, spin_cm_eom_rhs, toda_eom_rhs,
    };
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[derive(Debug, Clone, PartialEq)]
    struct Osc(DVector<f64>);

    impl PhaseState for Osc {
        fn to_flat(&self) -> DVector<f64> {
            self.0.clone()
        }
        fn with_flat(&self, v: &DVector<f64>) -> Self {
            Osc(v.clone())
        }
    }

    fn harmonic(s: &Osc) -> Result<Osc> {
        Ok(Osc(DVector::from_vec(vec![s.0[1], -s.0[0]])))
    }

    fn family(rank: usize, pi: &[usize]) -> RFamily {
        RFamily::new(Arc::new(build_algebra(Series::A, rank).unwrap()), pi).unwrap()
    }

    #[test]
    fn zero_rhs_is_constant() {
        let s0 = Osc(DVector::from_vec(vec![1.0, 2.0]));
        let cfg = IntegratorConfig::new(0.1, 1.0);
        let out = integrate(&|s: &Osc| Ok(Osc(&s.0 * 0.0)), &s0, &cfg).unwrap();
        assert!(out.trajectory.states.iter().all(|s| *s == s0));
        assert_eq!(out.trajectory.len(), 11);
        assert!(out.trajectory.is_well_formed());
    }

    #[test]
    fn harmonic_fourth_order() {
        let s0 = Osc(DVector::from_vec(vec![1.0, 0.0]));
        let err = |n: usize| {
            let s = rk4_final(&harmonic, &s0, 1.0, n).unwrap();
            ((s.0[0] - 1f64.cos()).powi(2) + (s.0[1] + 1f64.sin()).powi(2)).sqrt()
        };
        let order = (err(20) / err(40)).log2();
        assert!((order - 4.0).abs() < 0.1, "{order}");
        let m = measured_order(&harmonic, &s0, 1.0, 20).unwrap();
        assert!((m - 4.0).abs() < 0.1, "{m}");
    }

    #[test]
    fn error_estimate_tracks_true_error() {
        let s0 = Osc(DVector::from_vec(vec![1.0, 0.0]));
        let cfg = IntegratorConfig::new(0.05, 2.0).with_error_estimate(1e-12);
        let out = integrate(&harmonic, &s0, &cfg).unwrap();
        let est = out.error_estimate.unwrap();
        let (t, s) = out.trajectory.last().unwrap();
        let truth = (s.0[0] - t.cos()).abs().max((s.0[1] + t.sin()).abs());
        assert!(est > 0.5 * truth && est < 2.0 * truth, "{est} vs {truth}");
        assert!(out.accuracy_warning);
    }

    #[test]
    fn record_every_keeps_final_sample() {
        let s0 = Osc(DVector::from_vec(vec![1.0, 0.0]));
        let cfg = IntegratorConfig::new(0.1, 1.05).recording_every(3);
        let out = integrate(&harmonic, &s0, &cfg).unwrap();
        let tr = out.trajectory;
        assert!((tr.times.last().unwrap() - 1.05).abs() < 1e-12);
        assert!(tr.is_well_formed());
    }

    #[test]
    fn bad_config_rejected() {
        let s0 = Osc(DVector::from_vec(vec![1.0, 0.0]));
        assert!(integrate(&harmonic, &s0, &IntegratorConfig::new(0.0, 1.0)).is_err());
        assert!(integrate(&harmonic, &s0, &IntegratorConfig::new(0.1, -1.0)).is_err());
    }

    #[test]
    fn domain_error_truncates() {
        let s0 = Osc(DVector::from_vec(vec![0.0, 1.0]));
        let rhs = |s: &Osc| {
            if s.0[0] > 0.5 {
                Err(Error::Domain { root: "1".into(), value: 0.0 })
            } else {
                Ok(Osc(DVector::from_vec(vec![1.0, 0.0])))
            }
        };
        let out = integrate(&rhs, &s0, &IntegratorConfig::new(0.01, 1.0)).unwrap();
        let Some(Error::AtTime { t, .. }) = out.truncated else { panic!() };
        assert!(t > 0.45 && t < 0.52);
        assert!(*out.trajectory.times.last().unwrap() <= t + 1e-12);
    }

    #[test]
    fn free_spin_cm_is_linear() {
        let r = family(2, &[0, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let alg = r.alg();
        let st = SpinCMState {
            q: sample::chamber_point(alg, &mut rng, 0.5, 1.0),
            p: sample::cartan(alg, &mut rng, 1.0),
            xi: GElement::zeros(alg),
        };
        let out = integrate(&|s| spin_cm_eom_rhs(&r, s), &st, &IntegratorConfig::new(0.01, 1.0)).unwrap();
        for (t, s) in out.trajectory.times.iter().zip(&out.trajectory.states) {
            assert!((&s.q - (&st.q + &st.p * *t)).amax() < 1e-12);
        }
    }

    #[test]
    fn monitor_suite_catalog() {
        let r = family(2, &[0]);
        let ctx = MonitorContext { r, variant: Variant::Plus, constants: vec![1.0, 0.0] };
        let names = monitor_suite("spin-cm", &ctx).unwrap().names();
        assert_eq!(&names[..3], &["H", "J_norm", "spec_re_1"]);
        assert_eq!(names.len(), 2 + 2 * 3);
        assert_eq!(monitor_suite("toda", &ctx).unwrap().names().len(), 8);
        assert_eq!(monitor_suite("reduced-cm", &ctx).unwrap().names(), vec!["H", "s_simple_1", "s_simple_2"]);
        assert_eq!(monitor_suite("reduced-toda", &ctx).unwrap().names(), vec!["H"]);
        assert!(matches!(monitor_suite("kdv", &ctx), Err(Error::UnknownTag(_))));
    }

    #[test]
    fn rk4_order_on_all_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = family(2, &[0, 1]);
        let alg = r.alg();
        let mut xi = sample::chart_spin(alg, &mut rng, 0.5, 1.0, 0.5);
        let cm = SpinCMState { q: sample::chamber_point(alg, &mut rng, 0.8, 1.2), p: sample::cartan(alg, &mut rng, 0.5), xi: xi.clone() };
        let o1 = measured_order(&|s| spin_cm_eom_rhs(&r, s), &cm, 1.0, 8).unwrap();
        let red = reduce_state(&r, &cm).unwrap();
        let o2 = measured_order(&|s| reduced_eom_rhs(&r, s), &red, 1.0, 8).unwrap();
        xi.h = sample::cartan(alg, &mut rng, 0.5);
        let td = TodaState { x: sample::cartan(alg, &mut rng, 0.5), p: cm.p.clone(), eta: xi };
        let o3 = measured_order(&|s| toda_eom_rhs(&r, s), &td, 1.0, 8).unwrap();
        let c = [1.0, -0.5];
        let rt = ReducedTodaState { x: td.x.clone(), p: td.p.clone() };
        let o4 = measured_order(&|s| reduced_toda_rhs(&r, s, &c), &rt, 1.0, 8).unwrap();
        for o in [o1, o2, o3, o4] {
            assert!((3.7..=4.3).contains(&o), "{o1} {o2} {o3} {o4}");
        }
    }

    #[test]
    fn spin_cm_conservation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = family(2, &[0, 1]);
        let alg = r.alg();
        let st = SpinCMState {
            q: sample::chamber_point(alg, &mut rng, 0.8, 1.2),
            p: sample::cartan(alg, &mut rng, 0.5),
            xi: sample::root_element(alg, &mut rng, 0.5),
        };
        let ctx = MonitorContext { r: r.clone(), variant: Variant::Plus, constants: vec![] };
        let MonitorSuite::SpinCm(mons) = monitor_suite("spin-cm", &ctx).unwrap() else { unreachable!() };
        let cfg = IntegratorConfig::new(1e-3, 1.0).with_monitors(mons);
        let out = integrate(&|s| spin_cm_eom_rhs(&r, s), &st, &cfg).unwrap();
        let h = out.trajectory.monitor("H").unwrap();
        assert!(h.iter().all(|v| (v - h[0]).abs() < 1e-8));
        let j = out.trajectory.monitor("J_norm").unwrap();
        assert!(j.iter().all(|v| v.abs() < 1e-9));
        let l0 = lax_matrix(&r, &lax_l(&r, &st).unwrap());
        let (spec0, tr0) = (sorted_spectrum(&l0), trace_powers(&l0, 3));
        for s in &out.trajectory.states {
            let l = lax_matrix(&r, &lax_l(&r, s).unwrap());
            assert!(spectrum_distance(&sorted_spectrum(&l), &spec0) < 1e-7);
            for (a, b) in trace_powers(&l, 3).iter().zip(&tr0) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }
}
