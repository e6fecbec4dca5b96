//! JSON run configuration: parsing, validation and resolution into engine
//! types.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spintoda::dynr::RFamily;
use spintoda::liealg::{build_algebra, GElement, LieAlgebraData, Series};
use spintoda::models::{reduce_state, ReducedState, ReducedTodaState, SpinCMState, TodaState, Variant};
use spintoda::numint::SystemTag;
use spintoda::sample;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algebra: AlgebraSpec,
    /// Simple-root indices, 1-based.
    pub pi_prime: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Number of random cases for verify suites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub series: String,
    pub rank: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default, alias = "x", skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, alias = "xi", alias = "eta", alias = "s", skip_serializing_if = "Option::is_none")]
    pub spin: Option<SpinSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

/// Spin coefficients: root vectors keyed by simple-root coordinates, plus
/// Cartan coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSpec {
    #[serde(default)]
    pub roots: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cartan: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// RK4 step when it differs from the sampling step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rk4_dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

/// A field-level validation failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError { field: field.into(), message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses a JSON document into a [`RunConfig`] without semantic checks.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::new("", format!("invalid config: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Rk4,
    Both,
}

impl Method {
    fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "exact" => Ok(Method::Exact),
            "rk4" => Ok(Method::Rk4),
            "both" => Ok(Method::Both),
            other => Err(ConfigError::new("method", format!("expected exact, rk4 or both, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    SpinCm(SpinCMState),
    ReducedCm(ReducedState),
    SpinToda(TodaState),
    ReducedToda(ReducedTodaState, Vec<f64>),
}

/// Algebra and r-matrix family only; enough for verify suites.
#[derive(Debug, Clone)]
pub struct Setup {
    pub family: RFamily,
    pub seed: u64,
}

impl Setup {
    pub fn alg(&self) -> &LieAlgebraData {
        self.family.alg()
    }
}

/// A configuration checked and converted for a trajectory command.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// The input with every default and random choice written out.
    pub config: RunConfig,
    pub setup: Setup,
    pub system: SystemTag,
    pub variant: Variant,
    pub method: Option<Method>,
    pub initial: InitialState,
    pub grid: Vec<f64>,
    /// Explicit RK4 step, if configured.
    pub rk4_dt: Option<f64>,
}

/// Checks algebra, π′ and seed.
pub fn resolve_setup(cfg: &RunConfig) -> Result<Setup, ConfigError> {
    let series: Series = cfg
        .algebra
        .series
        .parse()
        .map_err(|_| ConfigError::new("algebra.series", format!("unknown series {:?}", cfg.algebra.series)))?;
    let rank = cfg.algebra.rank;
    if rank == 0 {
        return Err(ConfigError::new("algebra.rank", "must be at least 1"));
    }
    let alg = build_algebra(series, rank).map_err(|e| ConfigError::new("algebra", e))?;
    let mut pi = Vec::with_capacity(cfg.pi_prime.len());
    for (k, &i) in cfg.pi_prime.iter().enumerate() {
        if i == 0 || i > rank {
            return Err(ConfigError::new(format!("pi_prime[{k}]"), format!("index {i} outside 1..={rank}")));
        }
        if pi.contains(&(i - 1)) {
            return Err(ConfigError::new(format!("pi_prime[{k}]"), format!("duplicate index {i}")));
        }
        pi.push(i - 1);
    }
    let family = RFamily::new(Arc::new(alg), &pi).map_err(|e| ConfigError::new("pi_prime", e))?;
    Ok(Setup { family, seed: cfg.seed.unwrap_or(0) })
}

fn vector(field: &str, v: &Option<Vec<f64>>, len: usize, default: Option<f64>) -> Result<DVector<f64>, ConfigError> {
    match v {
        Some(v) if v.len() != len => Err(ConfigError::new(field, format!("expected {len} entries, got {}", v.len()))),
        Some(v) if v.iter().any(|x| !x.is_finite()) => Err(ConfigError::new(field, "entries must be finite")),
        Some(v) => Ok(DVector::from_column_slice(v)),
        None => default.map(|d| DVector::from_element(len, d)).ok_or_else(|| ConfigError::new(field, "required")),
    }
}

fn spin(field: &str, alg: &LieAlgebraData, spec: &Option<SpinSpec>) -> Result<GElement, ConfigError> {
    let mut x = GElement::zeros(alg);
    let Some(spec) = spec else { return Ok(x) };
    for (key, &v) in &spec.roots {
        let a = alg
            .root_from_key(key)
            .map_err(|_| ConfigError::new(format!("{field}.roots[{key:?}]"), "not a root of this algebra"))?;
        if !v.is_finite() {
            return Err(ConfigError::new(format!("{field}.roots[{key:?}]"), "must be finite"));
        }
        x.roots[a] = v;
    }
    x.h = vector(&format!("{field}.cartan"), &spec.cartan, alg.rank, Some(0.0))?;
    Ok(x)
}

fn spin_spec(alg: &LieAlgebraData, x: &GElement) -> SpinSpec {
    SpinSpec {
        roots: (0..alg.num_roots()).map(|a| (alg.root_key(a), x.roots[a])).collect(),
        cartan: Some(x.h.iter().copied().collect()),
    }
}

fn random_initial(system: SystemTag, r: &RFamily, rng: &mut ChaCha8Rng) -> Result<InitialState, ConfigError> {
    let alg = r.alg();
    let cm = |rng: &mut ChaCha8Rng| SpinCMState {
        q: sample::chamber_point(alg, rng, 1.0, 2.0),
        p: sample::cartan(alg, rng, 0.5),
        xi: sample::chart_spin(alg, rng, 0.2, 0.5, 0.3),
    };
    Ok(match system {
        SystemTag::SpinCm => InitialState::SpinCm(cm(rng)),
        SystemTag::ReducedCm => {
            InitialState::ReducedCm(reduce_state(r, &cm(rng)).map_err(|e| ConfigError::new("initial", e))?)
        }
        SystemTag::SpinToda => InitialState::SpinToda(TodaState {
            x: sample::cartan(alg, rng, 0.5),
            p: sample::cartan(alg, rng, 0.5),
            eta: sample::element(alg, rng, 0.5),
        }),
        SystemTag::ReducedToda => InitialState::ReducedToda(
            ReducedTodaState { x: sample::cartan(alg, rng, 0.5), p: sample::cartan(alg, rng, 0.5) },
            vec![1.0; alg.rank],
        ),
    })
}

fn explicit_initial(system: SystemTag, alg: &LieAlgebraData, init: &InitialSpec) -> Result<InitialState, ConfigError> {
    let n = alg.rank;
    let p = vector("initial.p", &init.p, n, Some(0.0))?;
    if init.c.is_some() && system != SystemTag::ReducedToda {
        return Err(ConfigError::new("initial.c", "only used by reduced-toda"));
    }
    Ok(match system {
        SystemTag::SpinCm => InitialState::SpinCm(SpinCMState {
            q: vector("initial.q", &init.q, n, None)?,
            p,
            xi: spin("initial.spin", alg, &init.spin)?,
        }),
        SystemTag::ReducedCm => {
            let mut s = spin("initial.spin", alg, &init.spin)?;
            if s.h.amax() != 0.0 {
                return Err(ConfigError::new("initial.spin.cartan", "reduced spin has no Cartan part"));
            }
            let given = init.spin.as_ref().map(|sp| &sp.roots);
            for &a in &alg.simple_roots {
                let key = alg.root_key(a);
                match given.and_then(|g| g.get(&key)) {
                    None => s.roots[a] = 1.0,
                    Some(&v) if (v - 1.0).abs() > 1e-12 => {
                        return Err(ConfigError::new(
                            format!("initial.spin.roots[{key:?}]"),
                            format!("simple-root coefficients of a reduced spin are 1, got {v}"),
                        ))
                    }
                    Some(_) => s.roots[a] = 1.0,
                }
            }
            InitialState::ReducedCm(ReducedState { q: vector("initial.q", &init.q, n, None)?, p, s })
        }
        SystemTag::SpinToda => InitialState::SpinToda(TodaState {
            x: vector("initial.x", &init.q, n, Some(0.0))?,
            p,
            eta: spin("initial.spin", alg, &init.spin)?,
        }),
        SystemTag::ReducedToda => {
            if init.spin.is_some() {
                return Err(ConfigError::new("initial.spin", "reduced-toda takes constants c instead"));
            }
            let c = vector("initial.c", &init.c, n, Some(1.0))?;
            InitialState::ReducedToda(
                ReducedTodaState { x: vector("initial.x", &init.q, n, Some(0.0))?, p },
                c.iter().copied().collect(),
            )
        }
    })
}

/// The initial state written back as an [`InitialSpec`].
pub fn describe_initial(alg: &LieAlgebraData, st: &InitialState) -> InitialSpec {
    let v = |x: &DVector<f64>| Some(x.iter().copied().collect());
    match st {
        InitialState::SpinCm(s) => InitialSpec { q: v(&s.q), p: v(&s.p), spin: Some(spin_spec(alg, &s.xi)), c: None },
        InitialState::ReducedCm(s) => {
            let mut sp = spin_spec(alg, &s.s);
            sp.cartan = None;
            InitialSpec { q: v(&s.q), p: v(&s.p), spin: Some(sp), c: None }
        }
        InitialState::SpinToda(s) => InitialSpec { q: v(&s.x), p: v(&s.p), spin: Some(spin_spec(alg, &s.eta)), c: None },
        InitialState::ReducedToda(s, c) => InitialSpec { q: v(&s.x), p: v(&s.p), spin: None, c: Some(c.clone()) },
    }
}

fn resolve_grid(time: &TimeSpec) -> Result<(Vec<f64>, TimeSpec), ConfigError> {
    let positive = |field: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(ConfigError::new(field, format!("must be positive and finite, got {v}")))
        }
    };
    let rk4_dt = time.rk4_dt.map(|v| positive("time.rk4_dt", v)).transpose()?;
    if let Some(grid) = &time.grid {
        if time.t_max.is_some() || time.dt.is_some() {
            return Err(ConfigError::new("time.grid", "give either grid or t_max/dt, not both"));
        }
        if grid.first() != Some(&0.0) {
            return Err(ConfigError::new("time.grid", "must start at 0"));
        }
        if grid.len() > 1 {
            let h = grid[1] - grid[0];
            positive("time.grid", h)?;
            for (k, w) in grid.windows(2).enumerate() {
                if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
                    return Err(ConfigError::new(format!("time.grid[{}]", k + 1), "grid must be uniform"));
                }
            }
        }
        let spec = TimeSpec { grid: Some(grid.clone()), rk4_dt, ..Default::default() };
        return Ok((grid.clone(), spec));
    }
    let t_max = time.t_max.ok_or_else(|| ConfigError::new("time.t_max", "required"))?;
    if !t_max.is_finite() || t_max < 0.0 {
        return Err(ConfigError::new("time.t_max", format!("must be finite and non-negative, got {t_max}")));
    }
    let dt = positive("time.dt", time.dt.ok_or_else(|| ConfigError::new("time.dt", "required"))?)?;
    let grid = spintoda::factor::uniform_grid(t_max, dt);
    Ok((grid, TimeSpec { t_max: Some(t_max), dt: Some(dt), grid: None, rk4_dt }))
}

/// Full validation for trajectory commands.
pub fn resolve(cfg: &RunConfig) -> Result<Resolved, ConfigError> {
    let setup = resolve_setup(cfg)?;
    let system_name = cfg.system.as_deref().ok_or_else(|| ConfigError::new("system", "required"))?;
    let system: SystemTag = system_name.parse().map_err(|_| {
        ConfigError::new("system", format!("expected spin-cm, reduced-cm, spin-toda or reduced-toda, got {system_name:?}"))
    })?;
    let variant = match cfg.variant.as_deref() {
        None | Some("plus") => Variant::Plus,
        Some("minus") if system == SystemTag::SpinCm => Variant::Minus,
        Some("minus") => return Err(ConfigError::new("variant", "only spin-cm has a variant")),
        Some(other) => return Err(ConfigError::new("variant", format!("expected plus or minus, got {other:?}"))),
    };
    let method = cfg.method.as_deref().map(Method::parse).transpose()?;
    let time = cfg.time.as_ref().ok_or_else(|| ConfigError::new("time", "required"))?;
    let (grid, time_spec) = resolve_grid(time)?;
    let initial = match &cfg.initial {
        Some(init) => explicit_initial(system, setup.alg(), init)?,
        None => random_initial(system, &setup.family, &mut ChaCha8Rng::seed_from_u64(setup.seed))?,
    };
    if let Some(tol) = cfg.tolerance {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(ConfigError::new("tolerance", "must be positive"));
        }
    }
    if let Some(out) = &cfg.output {
        if let Some(f) = &out.format {
            crate::output::Format::parse(f).map_err(|m| ConfigError::new("output.format", m))?;
        }
    }
    let mut config = cfg.clone();
    config.system = Some(system.to_string());
    config.seed = Some(setup.seed);
    config.time = Some(time_spec.clone());
    config.initial = Some(describe_initial(setup.alg(), &initial));
    if system == SystemTag::SpinCm {
        config.variant = Some(if variant == Variant::Plus { "plus" } else { "minus" }.into());
    }
    Ok(Resolved { config, setup, system, variant, method, initial, grid, rk4_dt: time_spec.rk4_dt })
}

impl Resolved {
    /// Rejects a configured method that contradicts the subcommand.
    pub fn require_method(&self, allowed: &[Method]) -> Result<(), ConfigError> {
        match self.method {
            Some(m) if !allowed.contains(&m) => {
                Err(ConfigError::new("method", format!("{m:?} conflicts with this subcommand").to_lowercase()))
            }
            _ => Ok(()),
        }
    }

    /// The exact solvers need zero Cartan momentum and a chart spin.
    pub fn require_exact_preconditions(&self) -> Result<(), ConfigError> {
        if let InitialState::SpinCm(st) = &self.initial {
            if self.variant != Variant::Plus {
                return Err(ConfigError::new("variant", "the exact spin-cm solver covers the plus variant only"));
            }
            if st.xi.h.amax() != 0.0 {
                return Err(ConfigError::new(
                    "initial.spin.cartan",
                    "the exact spin-cm solver needs zero Cartan part of the spin",
                ));
            }
        }
        Ok(())
    }
}
